"""Saddle point, sub-Riemannian distance and small-time asymptotics.

Throughout, ``u = cosh r cos(phi)`` and

    S(u) = acosh(u)/sqrt(u^2 - 1)    (u > 1)
         = arccos(u)/sqrt(1 - u^2)   (-1 < u < 1),

which is one real-analytic, decreasing function on (-1, inf) with S(1) = 1.
The saddle equation ``phi - theta = cosh r sin(phi) S(u)`` has a root for
every real ``theta`` once phi ranges over ``|phi| < arccos(-1/cosh r)``; the
root lies inside ``|phi| < arccos(1/cosh r)`` (where u > 1) only for
``|theta| < sinh r - arccos(1/cosh r)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import (
    DomainError, EvalContext, EvalResult, QuadSpec, RegimeError, CylPoint,
    canonical_theta, check_time, integrate_adaptive,
)
from .riemannian import d_over_sinh, small_time_bracket

_S_SERIES_RADIUS = 0.25
_S_TERMS = 40


def _s_series_coeffs(nterms: int = _S_TERMS) -> np.ndarray:
    # (u^2 - 1) S' + u S = 1 about u = 1
    b = np.zeros(nterms)
    b[0] = 1.0
    for k in range(1, nterms):
        b[k] = -k * b[k - 1] / (2 * k + 1)
    return b


_B = _s_series_coeffs()


def s_func(s: float, p: float | None = None) -> float:
    """S(u) at u = 1 + s, s in (-2, inf); ``p = u + 1`` if known more accurately than ``s + 2``."""
    if abs(s) < _S_SERIES_RADIUS:
        return float(np.polyval(_B[::-1], s))
    p = s + 2.0 if p is None else p
    if s > 0:
        return math.log1p(s + math.sqrt(s * p)) / math.sqrt(s * p)
    if p <= 0.0:
        return math.inf
    return 2.0 * math.atan2(math.sqrt(-s), math.sqrt(p)) / math.sqrt(-s * p)


def s_prime_neg(s: float, p: float | None = None) -> float:
    """-S'(u) = (u S(u) - 1)/(u^2 - 1) > 0 at u = 1 + s."""
    if abs(s) < _S_SERIES_RADIUS:
        k = np.arange(1, _S_TERMS)
        return float(-np.polyval((k * _B[1:])[::-1], s))
    p = s + 2.0 if p is None else p
    return ((1.0 + s) * s_func(s, p) - 1.0) / (s * p)


def _u_minus_one(r: float, phi: float) -> float:
    # cosh r cos phi - 1 without cancellation
    return 2.0 * math.sinh(0.5 * r) ** 2 * math.cos(phi) - 2.0 * math.sin(0.5 * phi) ** 2


def _u_plus_one(r: float, phi: float) -> float:
    return 2.0 * math.sinh(0.5 * r) ** 2 * math.cos(phi) + 2.0 * math.cos(0.5 * phi) ** 2


def strip_bound(r: float) -> float:
    """arccos(1/cosh r): the half-width where u stays above 1."""
    return math.atan(math.sinh(r))


def phi_domain(r: float) -> float:
    """arccos(-1/cosh r): the half-width where u stays above -1."""
    return math.pi - math.atan(math.sinh(r))


@dataclass(frozen=True)
class PhiSolution:
    phi: float
    u: float
    strip_bound: float
    residual: float
    u_minus_one: float = 0.0
    u_plus_one: float = 2.0

    @property
    def in_strip(self) -> bool:
        return abs(self.phi) < self.strip_bound


def saddle_map(r: float, phi: float) -> float:
    """phi - cosh r sin(phi) S(cosh r cos phi): strictly decreasing in phi."""
    return phi - math.cosh(r) * math.sin(phi) * s_func(_u_minus_one(r, phi), _u_plus_one(r, phi))


def phi_solve(r: float, theta: float) -> PhiSolution:
    """Saddle angle phi(r, theta): the root of ``saddle_map(r, phi) = theta``."""
    if not r > 0:
        raise DomainError(f"phi_solve needs r > 0, got r={r}; the origin r=0 has a closed form")
    if not math.isfinite(theta):
        raise DomainError(f"theta must be finite, got {theta}")
    sb = strip_bound(r)
    if theta == 0.0:
        return PhiSolution(0.0, math.cosh(r), sb, 0.0, 2.0 * math.sinh(0.5 * r) ** 2,
                           2.0 * math.cosh(0.5 * r) ** 2)
    lim = phi_domain(r)

    def g(phi):
        return saddle_map(r, phi) - theta

    # the root has the sign opposite to theta
    sign = -math.copysign(1.0, theta)
    lo, hi = 0.0, sign * lim
    # move the outer end inwards until g is finite there; g -> -sign*inf at the edge
    eps = 1e-12
    outer = sign * lim * (1.0 - eps)
    while not math.isfinite(g(outer)):
        eps *= 10.0
        outer = sign * lim * (1.0 - eps)
    glo, gout = g(lo), g(outer)
    if glo * gout > 0:
        # theta beyond the range reachable in double precision near the domain edge
        raise AssertionError(f"phi_solve bracket failed at r={r}, theta={theta}")
    a, b = (lo, outer) if lo < outer else (outer, lo)
    phi = brentq(g, a, b, xtol=1e-300, rtol=4.0 * np.finfo(float).eps, maxiter=500)
    um1 = _u_minus_one(r, phi)
    return PhiSolution(phi, 1.0 + um1, sb, abs(g(phi)), um1, _u_plus_one(r, phi))


class DistanceRegime(enum.Enum):
    Origin = "origin"
    Axis = "axis"
    General = "general"


@dataclass(frozen=True)
class DistanceValue:
    d2: float
    d: float
    regime: DistanceRegime


ORIGIN_FALLBACK_R = 1e-4
AXIS_EXPANSION_THETA = 1e-6


def sr_distance(ctx: EvalContext, pt: CylPoint) -> DistanceValue:
    """Sub-Riemannian distance from the pole to (r, theta)."""
    r, theta = pt.r, pt.theta
    if ctx.compact:
        theta = canonical_theta(theta)
    if theta == 0.0:
        d = r
        return DistanceValue(d * d, d, DistanceRegime.Origin if r == 0 else DistanceRegime.Axis)
    if r < ORIGIN_FALLBACK_R:
        d2 = 2.0 * math.pi * abs(theta) + theta * theta
        return DistanceValue(d2, math.sqrt(d2), DistanceRegime.Origin)
    if abs(theta) < AXIS_EXPANSION_THETA:
        # (phi - theta)/sin(phi) -> r coth r on the axis
        d2 = r * r
        return DistanceValue(d2, r, DistanceRegime.Axis)
    sol = phi_solve(r, theta)
    sphi = math.sin(sol.phi)
    if abs(sphi) > 1e-6:
        d2 = ((sol.phi - theta) * math.tanh(r) / sphi) ** 2
    else:
        d2 = (math.sinh(r) * s_func(sol.u_minus_one, sol.u_plus_one)) ** 2
    return DistanceValue(d2, math.sqrt(d2), DistanceRegime.General)


@dataclass(frozen=True)
class SaddleCurvature:
    f2: float


def f_second_derivative(r: float, theta: float) -> SaddleCurvature:
    """Second derivative of the phase at its critical point, 2 sinh^2 r (uS(u)-1)/(u^2-1)."""
    if not r > 0:
        raise DomainError(f"f_second_derivative needs r > 0, got {r}")
    sol = phi_solve(r, theta)
    return SaddleCurvature(2.0 * math.sinh(r) ** 2 * s_prime_neg(sol.u_minus_one, sol.u_plus_one))


@dataclass(frozen=True)
class AsymptoticConstants:
    n: int
    A_n: float
    B_n: float


def _ratio_power(y, n):
    return d_over_sinh(y) ** n


def an_bn_constants(n: int, spec: QuadSpec | None = None) -> AsymptoticConstants:
    """Constants A_n, B_n of p_t(0,0) = (4 pi t)^-(n+1) (A_n + B_n t + O(t^2)).

    B_n integrates (y/sinh y)^n against the first-order coefficient of the
    Riemannian small-time expansion, -n^2 - n(n-1)(sinh y - y cosh y)/(y^2 sinh y).
    """
    if int(n) != n or n < 1:
        raise DomainError(f"n must be an integer >= 1, got {n}")
    spec = spec or QuadSpec(rel_tol=1e-13)
    # (y/sinh y)^n < (2y)^n e^{-ny}; cut where that is below e^{-cutoff}
    ycut = spec.exponent_cutoff / n
    for _ in range(20):
        ycut = (spec.exponent_cutoff + n * math.log(2.0 * ycut)) / n
    ycut = min(ycut, spec.y_halfwidth)

    def fa(y):
        return _ratio_power(y, n)

    def fb(y):
        return -_ratio_power(y, n) * (n * n + n * (n - 1) * small_time_bracket(y))

    a = integrate_adaptive(fa, 0.0, ycut, spec)
    b = integrate_adaptive(fb, 0.0, ycut, spec)
    return AsymptoticConstants(n, 2.0 * a.value, 2.0 * b.value)


def asym_diagonal(ctx: EvalContext, t: float, consts: AsymptoticConstants | None = None) -> EvalResult:
    t = check_time(t)
    n = ctx.n
    c = consts if consts is not None and consts.n == n else an_bn_constants(n)
    return EvalResult((4.0 * math.pi * t) ** (-(n + 1)) * (c.A_n + c.B_n * t), 0.0,
                      info={"A_n": c.A_n, "B_n": c.B_n})


def asym_vertical(ctx: EvalContext, t: float, theta: float) -> EvalResult:
    t = check_time(t)
    if theta == 0:
        raise RegimeError("asym_vertical needs theta != 0; use asym_diagonal", "asym_diagonal")
    n = ctx.n
    a = abs(theta)
    value = a ** (n - 1) / (2.0 ** (3 * n) * t ** (2 * n) * math.factorial(n - 1)) \
        * math.exp(-(2.0 * math.pi * a + a * a) / (4.0 * t))
    return EvalResult(value, 0.0, info={"exponent": -(2.0 * math.pi * a + a * a) / (4.0 * t)})


def asym_axis(ctx: EvalContext, t: float, r: float) -> EvalResult:
    t = check_time(t)
    if not r > 0:
        raise RegimeError("asym_axis needs r > 0; use asym_diagonal", "asym_diagonal")
    n = ctx.n
    # r coth r - 1 = sinh^2 r * (-S'(cosh r))
    rc = math.sinh(r) ** 2 * s_prime_neg(2.0 * math.sinh(0.5 * r) ** 2)
    value = math.exp(-r * r / (4.0 * t)) / (4.0 * math.pi * t) ** (n + 0.5) \
        * d_over_sinh(r) ** n / math.sqrt(rc)
    return EvalResult(value, 0.0, info={"exponent": -r * r / (4.0 * t)})


def asym_general(ctx: EvalContext, t: float, pt: CylPoint) -> EvalResult:
    """Steepest-descent leading term of the kernel at (r, theta), r > 0, theta != 0."""
    t = check_time(t)
    r, theta = pt.r, pt.theta
    if not r > 0:
        raise RegimeError("asym_general needs r > 0; use asym_vertical", "asym_vertical")
    if theta == 0:
        raise RegimeError("asym_general needs theta != 0; use asym_axis", "asym_axis")
    n = ctx.n
    sol = phi_solve(r, theta)
    s = s_func(sol.u_minus_one, sol.u_plus_one)
    h = s_prime_neg(sol.u_minus_one, sol.u_plus_one)
    sphi = math.sin(sol.phi)
    if abs(sphi) > 1e-6:
        d2 = ((sol.phi - theta) * math.tanh(r) / sphi) ** 2
    else:
        d2 = (math.sinh(r) * s) ** 2
    # (acosh u)^n / ((u^2-1)^((n-1)/2) sqrt(u acosh u/sqrt(u^2-1) - 1)) = S^n / sqrt(h)
    value = (4.0 * math.pi * t) ** (-(n + 0.5)) / math.sinh(r) * s**n / math.sqrt(h) \
        * math.exp(-d2 / (4.0 * t))
    return EvalResult(value, 0.0, info={"exponent": -d2 / (4.0 * t), "phi": sol.phi, "u": sol.u})
