"""Heat kernel of the radial Laplace-Beltrami operator on real hyperbolic
space of dimension 2n+1, as a function of the distance ``delta`` to the pole.

Two independent evaluators are provided:

* :func:`q_exact` applies ``(-1/(2 pi sinh d) d/dd)^n`` to a Gaussian.  Since
  ``(1/sinh d) d/dd = d/dz`` with ``z = cosh d``, the operator is ``n``
  derivatives in ``z`` of ``exp(-acosh(z)^2/4t)``.  Those are read off a
  :class:`~crhyp.jet.Jet` of order ``n``, which is smooth through ``d = 0``
  and works for complex ``d`` (needed by the contour-shifted integrals).
* :func:`q_integral` is the oscillatory one-dimensional integral in ``u``.

:func:`q_small_time` is the two-term small-time expansion.
"""
from __future__ import annotations

import math

import numpy as np

from .core import (
    DomainError, EvalContext, EvalResult, Flag, QuadSpec, RegimeError,
    GK_NODES, GK_WEIGHTS, adaptive_gk, check_time,
)
from .jet import Jet

Q_INTEGRAL_MIN_T = 0.05
_NEAR_ONE = 0.5
_SERIES_TERMS = 64


def _acosh_sq_series(nterms: int = _SERIES_TERMS) -> np.ndarray:
    # acosh(1+s)^2 = sum a_j s^j, from (z^2-1) w'' + z w' = 2 at z = 1
    a = np.zeros(nterms)
    a[1] = 2.0
    for j in range(1, nterms - 1):
        a[j + 1] = -j * j * a[j] / ((j + 1) * (2 * j + 1))
    return a


_A = _acosh_sq_series()
_BINOM = np.array([[math.comb(j, k) for j in range(_SERIES_TERMS)] for k in range(_SERIES_TERMS)], dtype=float)


def acosh_sq_jet(s, order: int, delta=None) -> Jet:
    """Jet in ``z`` of ``acosh(z)^2`` at ``z = 1 + s`` (``s`` real or complex array).

    Near ``z = 1`` the power series about 1 is re-expanded; elsewhere the
    coefficients follow from ``(z^2-1) w'' + z w' = 2`` started from
    ``w = d^2`` and ``w' = 2 d / sinh d`` with ``d = acosh z``.  ``delta`` may
    be passed when it is known more accurately than ``acosh(1 + s)``.
    """
    s = np.asarray(s)
    shape = s.shape
    s = np.atleast_1d(s)
    if delta is not None:
        delta = np.broadcast_to(np.asarray(delta), shape).reshape(s.shape)
    dtype = np.result_type(s, float)
    c = np.zeros((order + 1,) + s.shape, dtype=dtype)
    near = np.abs(s) < _NEAR_ONE
    if np.any(near):
        sn = s[near]
        powers = sn[None, :] ** np.arange(_SERIES_TERMS)[:, None]
        for k in range(order + 1):
            coef = _BINOM[k, k:] * _A[k:]
            c[k][near] = coef @ powers[: _SERIES_TERMS - k]
    far = ~near
    if np.any(far):
        sf = s[far]
        root = np.sqrt(sf + 2.0) * np.sqrt(sf)  # sinh(acosh z), principal branch
        if delta is None:
            d = np.log1p(sf + root)
        else:
            d = delta[far]
        z0 = 1.0 + sf
        z2m1 = sf * (sf + 2.0)
        cf = np.zeros((order + 2,) + sf.shape, dtype=dtype)
        cf[0] = d * d
        cf[1] = 2.0 * d / root
        for k in range(order - 1):
            rhs = (2.0 if k == 0 else 0.0) - z0 * (k + 1) * (2 * k + 1) * cf[k + 1] - k * k * cf[k]
            cf[k + 2] = rhs / (z2m1 * (k + 2) * (k + 1))
        for k in range(order + 1):
            c[k][far] = cf[k]
    return Jet(c.reshape((order + 1,) + shape))


def q_log_parts(n: int, t: float, s, delta=None):
    """Return ``(log_scale, factor)`` with ``q_t = factor * exp(log_scale)``.

    ``s = cosh(delta) - 1`` may be complex.  ``log_scale = -n^2 t - delta^2/4t``
    carries all the Gaussian decay so callers can combine exponents before
    exponentiating.
    """
    w = acosh_sq_jet(s, n, delta)
    w0 = w.c[0].copy()
    v = w * (-1.0 / (4.0 * t))
    v.c[0] = 0.0
    e = v.exp()
    factor = (-1.0 / (2.0 * math.pi)) ** n * math.factorial(n) / math.sqrt(4.0 * math.pi * t) * e.c[n]
    log_scale = -n * n * t - w0 / (4.0 * t)
    return log_scale, factor


def q_kernel(n: int, t: float, delta):
    """Vectorised Riemannian heat kernel at real distances ``delta``."""
    d = np.asarray(delta, dtype=float)
    s = 2.0 * np.sinh(0.5 * d) ** 2
    log_scale, factor = q_log_parts(n, t, s, d)
    return factor * np.exp(log_scale)


def q_exact(ctx: EvalContext, t: float, delta: float) -> EvalResult:
    """Heat kernel at distance ``delta`` via the n-fold derivative formula."""
    t = check_time(t)
    if not delta >= 0:
        raise DomainError(f"delta must be >= 0, got {delta}")
    value = float(q_kernel(ctx.n, t, delta))
    return EvalResult(value, 8.0 * (ctx.n + 1) * np.finfo(float).eps * abs(value))


def _q_integral_prefactor(n: int, t: float) -> float:
    return math.gamma(n + 1) * math.exp(-n * n * t) / ((2.0 * math.pi) ** (n + 1) * math.sqrt(math.pi * t))


def _q_integrand(n: int, t: float, z):
    z = np.asarray(z)

    def f(u):
        u = u.reshape(u.shape + (1,) * z.ndim) if z.ndim else u
        return (np.exp((math.pi**2 - u * u) / (4.0 * t)) * np.sinh(u) * np.sin(math.pi * u / (2.0 * t))
                / (np.cosh(u) + z) ** (n + 1))

    return f


def _u_cut(t: float, spec: QuadSpec) -> float:
    return min(spec.u_max, math.sqrt(math.pi**2 + 4.0 * t * spec.exponent_cutoff))


def q_integral(ctx: EvalContext, t: float, delta: float, spec: QuadSpec | None = None) -> EvalResult:
    """Heat kernel at distance ``delta`` from the oscillatory ``u`` integral.

    Only valid for ``t >= 0.05``; below that the ``sin(pi u / 2t)`` factor
    oscillates too fast and :func:`q_exact` must be used.
    """
    spec = spec or QuadSpec()
    t = check_time(t)
    if t < Q_INTEGRAL_MIN_T:
        raise RegimeError(f"q_integral needs t >= {Q_INTEGRAL_MIN_T}, got t={t}; use q_exact", "q_exact")
    if not delta >= 0:
        raise DomainError(f"delta must be >= 0, got {delta}")
    n = ctx.n
    ucut = _u_cut(t, spec)
    period = 4.0 * t
    init = math.ceil(ucut / period * spec.nodes_per_unit / 21.0) * 2
    z = math.cosh(delta)
    out = adaptive_gk(_q_integrand(n, t, z), 0.0, ucut, spec.abs_tol, spec.rel_tol, init_panels=init)
    pref = _q_integral_prefactor(n, t)
    value = pref * float(out.value)
    err = pref * out.abs_err
    flags = {Flag.OscillationResolved}
    if not out.converged or ucut < math.sqrt(math.pi**2 + 4.0 * t * spec.exponent_cutoff):
        flags.add(Flag.Truncated)
    return EvalResult(value, err, flags, {"u_max": ucut, "panels": len(out.panels),
                                          "roundoff": pref * np.finfo(float).eps * out.abs_integral})


def q_integral_batch(n: int, t: float, z, spec: QuadSpec | None = None):
    """Fixed-rule version of :func:`q_integral` for many arguments ``z = cosh delta``.

    Returns ``(values, roundoff)`` where ``roundoff`` estimates the
    cancellation error ``eps * integral of |integrand|`` per value.
    """
    spec = spec or QuadSpec()
    if t < Q_INTEGRAL_MIN_T:
        raise RegimeError(f"q_integral needs t >= {Q_INTEGRAL_MIN_T}, got t={t}; use q_exact", "q_exact")
    z = np.asarray(z, dtype=float)
    ucut = _u_cut(t, spec)
    # two Kronrod panels per oscillation period
    npan = max(4, math.ceil(ucut / (2.0 * t)))
    edges = np.linspace(0.0, ucut, npan + 1)
    half = 0.5 * np.diff(edges)
    u = (0.5 * (edges[1:] + edges[:-1])[:, None] + half[:, None] * GK_NODES[None, :]).ravel()
    wts = (half[:, None] * GK_WEIGHTS[None, :]).ravel()
    vals = _q_integrand(n, t, z)(u)
    pref = _q_integral_prefactor(n, t)
    integral = np.tensordot(wts, vals, axes=(0, 0))
    absint = np.tensordot(wts, np.abs(vals), axes=(0, 0))
    return pref * integral, pref * np.finfo(float).eps * absint


def small_time_bracket(delta):
    """``(sinh d - d cosh d)/(d^2 sinh d)``, with its series near 0 (limit -1/3)."""
    d = np.asarray(delta, dtype=float)
    small = np.abs(d) < 1e-3
    ds = np.where(small, 1.0, d)
    out = np.where(small, -1.0 / 3.0 + d * d / 45.0,
                   (np.sinh(ds) - ds * np.cosh(ds)) / (ds * ds * np.sinh(ds)))
    return float(out) if out.ndim == 0 else out


def d_over_sinh(delta):
    d = np.asarray(delta, dtype=float)
    small = np.abs(d) < 1e-4
    ds = np.where(small, 1.0, d)
    out = np.where(small, 1.0 - d * d / 6.0, ds / np.sinh(ds))
    return float(out) if out.ndim == 0 else out


def q_small_time(ctx: EvalContext, t: float, delta: float) -> EvalResult:
    """Two-term small-time expansion of the heat kernel."""
    t = check_time(t)
    if not delta >= 0:
        raise DomainError(f"delta must be >= 0, got {delta}")
    n = ctx.n
    # the -n^2 t comes from the factor exp(-n^2 t)
    bracket = 1.0 - (n * n + n * (n - 1) * small_time_bracket(delta)) * t
    value = (4.0 * math.pi * t) ** (-(n + 0.5)) * d_over_sinh(delta) ** n * math.exp(-delta * delta / (4.0 * t)) * bracket
    return EvalResult(value, 0.0, info={"bracket": bracket})
