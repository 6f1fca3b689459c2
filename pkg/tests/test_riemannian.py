import math

import numpy as np
import pytest

from crhyp import EvalContext, RegimeError, DomainError, q_exact, q_integral, q_small_time
from crhyp.core import Flag
from crhyp.riemannian import acosh_sq_jet, q_kernel


def closed_form_n1(t, d):
    ratio = 1.0 if d == 0 else d / math.sinh(d)
    return math.exp(-t) * (4 * math.pi * t) ** -1.5 * ratio * math.exp(-d * d / (4 * t))


def test_q_exact_examples(ctx1, ctx2):
    assert q_exact(ctx1, 0.5, 0.0).value == pytest.approx(math.exp(-0.5) * (2 * math.pi) ** -1.5, rel=1e-14)
    assert q_exact(ctx1, 0.5, 0.0).value == pytest.approx(0.038511, abs=1e-6)
    assert q_exact(ctx1, 0.5, 1.0).value == pytest.approx(0.019876, abs=1e-6)
    assert q_exact(ctx2, 0.5, 1.0).value == pytest.approx(q_integral(ctx2, 0.5, 1.0).value, rel=1e-6)


@pytest.mark.parametrize("t", [0.01, 0.1, 0.5, 1.0, 3.0])
def test_q_exact_n1_closed_form(ctx1, t):
    for d in np.linspace(0, 5, 41):
        assert q_exact(ctx1, t, d).value == pytest.approx(closed_form_n1(t, d), rel=1e-12)


def _q_by_recursion(n, t, d, h=1e-4):
    # q_{n+1} = e^{-(n+1)^2 t} (-1/(2 pi sinh d)) d/dd [e^{n^2 t} q_n]
    def g(x):
        return math.exp(n * n * t) * float(q_kernel(n, t, x))
    deriv = (g(d + h) - g(d - h)) / (2 * h)
    return math.exp(-(n + 1) ** 2 * t) * (-1.0 / (2 * math.pi * math.sinh(d))) * deriv


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("d", [0.3, 1.0, 2.5])
def test_q_exact_dimension_recursion(n, d):
    t = 0.4
    assert float(q_kernel(n + 1, t, d)) == pytest.approx(_q_by_recursion(n, t, d), rel=1e-7)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("t", [0.25, 0.5, 1.0])
def test_cross_formula(n, t):
    ctx = EvalContext(n)
    for d in (0.0, 0.5, 1.0, 2.0, 3.0):
        a = q_exact(ctx, t, d).value
        b = q_integral(ctx, t, d)
        assert abs(a - b.value) <= 1e-6 * max(abs(a), 1e-30)
        assert Flag.OscillationResolved in b.flags
        assert a > 0


def test_q_integral_examples(ctx1):
    assert q_integral(ctx1, 0.5, 1.0).value == pytest.approx(0.019876, abs=1e-6)
    assert q_integral(ctx1, 0.5, 1.0).value == pytest.approx(q_exact(ctx1, 0.5, 1.0).value, abs=1e-8)
    assert q_integral(ctx1, 0.25, 2.0).value == pytest.approx(0.0014127, abs=1e-7)
    ctx3 = EvalContext(3)
    assert q_integral(ctx3, 1.0, 0.0).value == pytest.approx(q_exact(ctx3, 1.0, 0.0).value, rel=1e-6)


def test_q_integral_regime(ctx1):
    with pytest.raises(RegimeError) as e:
        q_integral(ctx1, 0.01, 1.0)
    assert e.value.alternative == "q_exact"
    with pytest.raises(DomainError):
        q_exact(ctx1, 0.5, -1.0)


def test_small_delta_is_smooth():
    # the derivative formula is even in delta; no jump where the series takes over
    for n in (1, 2, 5):
        d = np.array([0.0, 1e-8, 1e-4, 0.99, 1.0, 1.01]) * 1.0
        v = q_kernel(n, 0.3, d)
        assert v[1] == pytest.approx(v[0], rel=1e-14)
        assert v[2] == pytest.approx(v[0], rel=1e-7)
    s_edge = np.array([0.5 - 1e-12, 0.5 + 1e-12])
    c = acosh_sq_jet(s_edge, 4).c
    assert np.allclose(c[:, 0], c[:, 1], rtol=1e-10)


def test_complex_argument_is_analytic():
    # Cauchy-Riemann: jet value at s + i h against the real derivative
    s0, h = 0.8, 1e-6
    j = acosh_sq_jet(np.array([s0]), 3)
    jc = acosh_sq_jet(np.array([s0 + 1j * h]), 3)
    assert (jc.c[0][0].imag / h) == pytest.approx(j.c[1][0], rel=1e-8)


def test_small_time_examples(ctx1, ctx2):
    r1 = q_small_time(ctx1, 0.01, 1.0).value / q_exact(ctx1, 0.01, 1.0).value
    assert abs(r1 - 1) <= 1e-3
    for t in (0.1, 0.5):
        assert q_small_time(ctx1, t, 1.3).info["bracket"] == pytest.approx(1.0 - t, rel=1e-15)


@pytest.mark.xfail(strict=True, reason="true relative error is 5.6e-4 at this point (second-order term)")
def test_small_time_n2_claimed_1e4(ctx2):
    r2 = q_small_time(ctx2, 0.01, 1.0).value / q_exact(ctx2, 0.01, 1.0).value
    assert abs(r2 - 1) <= 1.5e-4


def test_small_time_order(ctx2):
    # the remainder is O(t^2): the scaled error settles as t decreases
    for d in (0.0, 1.0):
        e = [(q_small_time(ctx2, t, d).value / q_exact(ctx2, t, d).value - 1) / t**2 for t in (0.02, 0.01, 0.005)]
        assert abs(e[2] - e[1]) < abs(e[1] - e[0]) and abs(e[2]) < 6


@pytest.mark.parametrize("n", [1, pytest.param(2, marks=pytest.mark.xfail(
    strict=True, reason="second-order coefficient for n=2 is about -5.4, outside the 5 t^2 band"))])
def test_small_time_band(n):
    ctx = EvalContext(n)
    for t in (0.02, 0.01, 0.005):
        for d in (0.0, 0.5, 1.0, 2.0, 3.0):
            ratio = q_small_time(ctx, t, d).value / q_exact(ctx, t, d).value
            assert 1 - 5 * t * t <= ratio <= 1 + 5 * t * t
