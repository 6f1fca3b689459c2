import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crhyp.core import (
    ConvergenceError, CylPoint, DomainError, EvalContext, EvalResult, Flag, QuadSpec, Space,
    acosh_safe, canonical_theta, check_time, integrate_adaptive, measure_density,
)


def test_context_validation():
    assert EvalContext().n == 1
    assert EvalContext(3, "compact").compact
    assert not EvalContext(3, Space.UniversalCover).compact
    for bad in (0, -1, 21, 1.5, True):
        with pytest.raises(DomainError):
            EvalContext(bad)
    with pytest.raises(DomainError):
        EvalContext(1, "sphere")


def test_time_and_point_validation():
    assert check_time(0.5) == 0.5
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(DomainError):
            check_time(bad)
    with pytest.raises(DomainError):
        CylPoint(-0.1, 0.0)
    with pytest.raises(DomainError):
        CylPoint(1.0, math.nan)
    assert CylPoint(1.0, 0.0).rho == pytest.approx(math.tanh(1.0))


def test_quadspec_validation():
    with pytest.raises(DomainError):
        QuadSpec(nodes_per_unit=3)
    with pytest.raises(DomainError):
        QuadSpec(rel_tol=0.0)
    assert QuadSpec(abs_tol=1e-8, rel_tol=1e-3).tolerance(1.0) == 1e-3


def test_eval_result():
    with pytest.raises(ValueError):
        EvalResult(1.0, -1.0)
    r = EvalResult(2.0, 1e-3, {Flag.Truncated})
    assert r.rel_err == 5e-4 and Flag.Truncated in r.flags and float(r) == 2.0


def test_canonical_theta():
    assert canonical_theta(math.pi) == math.pi
    assert canonical_theta(-math.pi) == -math.pi
    assert canonical_theta(3 * math.pi) == math.pi
    assert canonical_theta(-3 * math.pi) == -math.pi
    assert canonical_theta(0.5 + 4 * math.pi) == pytest.approx(0.5, abs=1e-14)


@given(st.floats(-50, 50))
def test_canonical_theta_range_and_period(theta):
    c = canonical_theta(theta)
    assert -math.pi <= c <= math.pi
    assert math.cos(c - theta) == pytest.approx(1.0, abs=1e-12)


def test_acosh_examples():
    assert acosh_safe(1.0) == 0.0
    assert acosh_safe(math.cosh(2.0)) == pytest.approx(2.0, rel=1e-15)
    x = 1.0 + 1e-12
    s = x - 1.0  # the representable offset, 1.0000889e-12
    assert acosh_safe(x) == pytest.approx(math.sqrt(2.0 * s) * (1.0 - s / 12.0), rel=1e-12)
    assert acosh_safe(1.0 - 5e-13) == 0.0
    with pytest.raises(DomainError):
        acosh_safe(1.0 - 1e-9)


def test_acosh_inverse_property():
    # below x ~ 2e-2 the rounding of cosh(x) itself exceeds 1e-12 relative in x
    x = np.linspace(0.02, 20.0, 2000)
    assert np.allclose(acosh_safe(np.cosh(x)), x, rtol=1e-12, atol=0)
    tiny = np.array([1e-7, 1e-5, 1e-3])
    assert np.allclose(acosh_safe(np.cosh(tiny)), tiny, rtol=1e-16 / tiny**2 * 4)


def test_measure_density_examples(ctx1, ctx2):
    assert measure_density(ctx1, 0.0) == 0.0
    assert measure_density(ctx1, 1.0) == pytest.approx(math.pi * math.sinh(2.0), rel=1e-14)
    assert measure_density(ctx1, 1.0) == pytest.approx(11.3937, abs=1e-3)
    assert measure_density(ctx2, 1.0) == pytest.approx(2 * math.pi**2 * math.sinh(1) ** 3 * math.cosh(1), rel=1e-14)
    assert measure_density(ctx2, 1.0) == pytest.approx(49.44, abs=5e-3)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_measure_density_small_r_and_monotone(n):
    ctx = EvalContext(n)
    r = 1e-4
    lead = 2 * math.pi**n / math.factorial(n - 1) * r ** (2 * n - 1)
    assert measure_density(ctx, r) / lead == pytest.approx(1.0, abs=1e-3)
    rs = np.linspace(1e-3, 5, 500)
    assert np.all(np.diff(measure_density(ctx, rs)) > 0)


def test_integrate_examples():
    assert integrate_adaptive(lambda x: np.ones_like(x), 0, 1).value == pytest.approx(1.0, rel=1e-14)
    assert integrate_adaptive(np.sin, 0, math.pi).value == pytest.approx(2.0, rel=1e-13)
    r = integrate_adaptive(lambda x: np.exp(-x * x), -8, 8)
    assert r.value == pytest.approx(math.sqrt(math.pi), rel=1e-13)
    assert r.abs_err <= QuadSpec().tolerance(r.value)


def _fixed_rule(f, a, b, n=20000):
    x, w = np.polynomial.legendre.leggauss(64)
    edges = np.linspace(a, b, n // 64 + 1)
    h = 0.5 * np.diff(edges)
    m = 0.5 * (edges[1:] + edges[:-1])
    xx = (m[:, None] + h[:, None] * x).ravel()
    return float(f(xx) @ (h[:, None] * w).ravel())


@pytest.mark.parametrize("f,a,b,period", [
    (lambda x: np.exp(-x) * np.cos(40 * x), 0.0, 5.0, 2 * math.pi / 40),
    (lambda x: 1.0 / (1 + x * x), -30.0, 30.0, None),
    (lambda x: np.exp(-((x - 0.3) ** 2) / 1e-3), -1.0, 1.0, None),
    (lambda x: np.sin(200 * x) * x, 0.0, 1.0, 2 * math.pi / 200),
])
def test_integrate_matches_fixed_rule(f, a, b, period):
    r = integrate_adaptive(f, a, b, period=period)
    ref = _fixed_rule(f, a, b)
    assert abs(r.value - ref) <= max(r.abs_err, 1e-14 * abs(ref)) * 10
    assert (Flag.OscillationResolved in r.flags) == (period is not None)


def test_integrate_budget_error_carries_estimate():
    with pytest.raises(ConvergenceError) as e:
        integrate_adaptive(lambda x: np.sin(1.0 / x), 1e-8, 1.0, QuadSpec(rel_tol=1e-14), max_panels=50)
    assert Flag.Truncated in e.value.result.flags
