"""Shared numeric primitives and the parameter/result types.

Everything here is a pure function of its inputs.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

MAX_N = 20
ACOSH_CLAMP = 1e-12


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class RegimeError(DomainError):
    """The requested evaluator is not valid for these arguments.

    ``alternative`` names the evaluator that should be used instead.
    """

    def __init__(self, message: str, alternative: str | None = None):
        super().__init__(message)
        self.alternative = alternative


class ConvergenceError(RuntimeError):
    """Tolerance was not met; ``result`` carries the best estimate."""

    def __init__(self, message: str, result: "EvalResult"):
        super().__init__(message)
        self.result = result


class Space(enum.Enum):
    CompactCircleBundle = "compact"
    UniversalCover = "cover"

    @classmethod
    def parse(cls, s: "str | Space") -> "Space":
        if isinstance(s, Space):
            return s
        for member in cls:
            if s in (member.value, member.name):
                return member
        raise DomainError(f"unknown space {s!r}; expected 'compact' or 'cover'")


class Flag(enum.Enum):
    Truncated = "truncated"
    OscillationResolved = "oscillation_resolved"
    ImagResidueLarge = "imag_residue_large"


@dataclass(frozen=True)
class EvalContext:
    """Dimension index ``n`` (the space has real dimension 2n+1) and the space."""

    n: int = 1
    space: Space = Space.UniversalCover

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise DomainError(f"n must be an integer, got {self.n!r}")
        if not 1 <= self.n <= MAX_N:
            raise DomainError(f"n must satisfy 1 <= n <= {MAX_N}, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "space", Space.parse(self.space))

    @property
    def compact(self) -> bool:
        return self.space is Space.CompactCircleBundle


def check_time(t: float) -> float:
    t = float(t)
    if not (t > 0 and math.isfinite(t)):
        raise DomainError(f"heat time must be positive and finite, got {t}")
    return t


def canonical_theta(theta: float) -> float:
    """Representative of ``theta`` modulo 2*pi in [-pi, pi]."""
    theta = float(theta)
    if -math.pi <= theta <= math.pi:
        return theta
    w = math.remainder(theta, 2.0 * math.pi)
    # remainder() maps odd multiples of pi to +-pi depending on parity; keep the sign of theta
    if abs(abs(w) - math.pi) < 1e-15 * max(1.0, abs(theta)):
        return math.copysign(math.pi, theta)
    return w


@dataclass(frozen=True)
class CylPoint:
    """Point of the cylindrical chart: radial ``r`` (rho = tanh r) and fiber ``theta``."""

    r: float
    theta: float = 0.0

    def __post_init__(self):
        if not (self.r >= 0 and math.isfinite(self.r)):
            raise DomainError(f"r must be finite and >= 0, got {self.r}")
        if not math.isfinite(self.theta):
            raise DomainError(f"theta must be finite, got {self.theta}")
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def rho(self) -> float:
        return math.tanh(self.r)

    def canonical(self) -> "CylPoint":
        return CylPoint(self.r, canonical_theta(self.theta))


@dataclass(frozen=True)
class QuadSpec:
    """Quadrature controls shared by every integral in the package.

    ``y_halfwidth`` and ``u_max`` are upper bounds on the truncation of the
    dummy variables; the actual cut is where the integrand has decayed by
    ``exponent_cutoff`` e-folds.  ``nodes_per_unit`` is the minimum number of
    nodes per unit length (or per oscillation period where one is known).
    """

    y_halfwidth: float = 200.0
    u_max: float = 60.0
    nodes_per_unit: int = 8
    exponent_cutoff: float = 50.0
    abs_tol: float = 1e-300
    rel_tol: float = 1e-10

    def __post_init__(self):
        for name in ("y_halfwidth", "u_max", "exponent_cutoff", "abs_tol", "rel_tol"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"QuadSpec.{name} must be positive, got {v}")
        if int(self.nodes_per_unit) != self.nodes_per_unit or self.nodes_per_unit < 4:
            raise DomainError(f"QuadSpec.nodes_per_unit must be an integer >= 4, got {self.nodes_per_unit}")

    def tolerance(self, value: float) -> float:
        return max(self.abs_tol, self.rel_tol * abs(value))


@dataclass(frozen=True)
class EvalResult:
    value: float
    abs_err: float = 0.0
    flags: frozenset = frozenset()
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.abs_err >= 0:
            raise ValueError(f"abs_err must be >= 0, got {self.abs_err}")
        object.__setattr__(self, "flags", frozenset(self.flags))

    def __float__(self) -> float:
        return float(self.value)

    @property
    def rel_err(self) -> float:
        return self.abs_err / abs(self.value) if self.value else math.inf


def acosh_safe(x):
    """Principal inverse hyperbolic cosine, clamped to 0 just below 1.

    Accepts scalars or arrays.  Values in [1 - 1e-12, 1) return 0; anything
    smaller raises :class:`DomainError`.  Near 1 the argument is handled as
    ``x - 1`` so no digits are lost to the ``x*x - 1`` cancellation.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(np.isnan(xa)) or np.any(xa < 1.0 - ACOSH_CLAMP):
        raise DomainError(f"acosh argument below 1: {np.min(xa)}")
    s = np.maximum(xa - 1.0, 0.0)
    out = np.log1p(s + np.sqrt(s * (s + 2.0)))
    return float(out) if np.ndim(out) == 0 else out


def measure_density(ctx: EvalContext, r):
    """Density of the invariant measure in (r, theta): 2 pi^n/(n-1)! sinh^(2n-1) r cosh r."""
    n = ctx.n
    const = 2.0 * math.pi**n / math.factorial(n - 1)
    ra = np.asarray(r, dtype=float)
    if np.any(ra < 0):
        raise DomainError("r must be >= 0")
    out = const * np.sinh(ra) ** (2 * n - 1) * np.cosh(ra)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Adaptive Gauss-Kronrod (10/21 points), vectorised over panels.

_XK = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0,
])
_WK = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077958109831074, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

GK_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
GK_WEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
_G_WEIGHTS = np.zeros(21)
_G_WEIGHTS[1:10:2] = _WG
_G_WEIGHTS[11:20:2] = _WG[::-1]


def _gk_panels(f, lo, hi):
    """Kronrod estimate, error estimate and sum |f| on each panel [lo_i, hi_i]."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * GK_NODES[None, :]
    fx = np.asarray(f(x.ravel())).reshape(x.shape)
    k = half * (fx @ GK_WEIGHTS)
    g = half * (fx @ _G_WEIGHTS)
    absint = np.abs(half) * (np.abs(fx) @ GK_WEIGHTS)
    err = np.abs(k - g) + 50.0 * np.finfo(float).eps * absint
    return k, err, absint


@dataclass
class QuadOutcome:
    """Raw outcome of :func:`adaptive_gk` (value may be complex)."""

    value: complex
    abs_err: float
    abs_integral: float
    converged: bool
    panels: np.ndarray  # (m, 2) panel endpoints in ascending order
    roundoff_limited: bool = False


def adaptive_gk(f: Callable, a: float, b: float, abs_tol: float, rel_tol: float,
                init_panels: int = 1, max_panels: int = 20000) -> QuadOutcome:
    """Globally adaptive Gauss-Kronrod quadrature of a vectorised integrand.

    The integrand may be real or complex.  Panels are split largest error
    first; each sweep splits every panel whose error exceeds the average
    share of the tolerance, always including the worst one.  Refinement also
    stops once the error is at the cancellation floor ``100 eps * int |f|``,
    which is reported through ``roundoff_limited``.
    """
    floor_factor = 100.0 * np.finfo(float).eps
    edges = np.linspace(a, b, max(1, int(init_panels)) + 1)
    lo, hi = edges[:-1].copy(), edges[1:].copy()
    k, err, absint = _gk_panels(f, lo, hi)
    while True:
        total = k.sum()
        tol = max(abs_tol, rel_tol * abs(total))
        total_err = err.sum()
        if total_err <= tol:
            converged = True
            break
        if total_err <= floor_factor * absint.sum():
            converged = True
            break
        if lo.size >= max_panels:
            converged = False
            break
        order = np.argsort(err)[::-1]
        share = tol / lo.size
        nsplit = max(1, int(np.count_nonzero(err > share)))
        nsplit = min(nsplit, max_panels - lo.size)
        if nsplit <= 0:
            converged = False
            break
        pick = order[:nsplit]
        keep = np.ones(lo.size, dtype=bool)
        keep[pick] = False
        plo, phi = lo[pick], hi[pick]
        pmid = 0.5 * (plo + phi)
        nlo = np.concatenate([plo, pmid])
        nhi = np.concatenate([pmid, phi])
        nk, nerr, nabs = _gk_panels(f, nlo, nhi)
        lo = np.concatenate([lo[keep], nlo])
        hi = np.concatenate([hi[keep], nhi])
        k = np.concatenate([k[keep], nk])
        err = np.concatenate([err[keep], nerr])
        absint = np.concatenate([absint[keep], nabs])
    idx = np.argsort(lo)
    total = k[idx].sum()
    total_err = float(err.sum())
    return QuadOutcome(value=total, abs_err=total_err,
                       abs_integral=float(absint.sum()), converged=converged,
                       panels=np.stack([lo[idx], hi[idx]], axis=1),
                       roundoff_limited=total_err > max(abs_tol, rel_tol * abs(total)))


def fixed_gk(f: Callable, panels: np.ndarray):
    """Kronrod rule on a frozen panel set; smooth in any parameters of ``f``."""
    k, err, _ = _gk_panels(f, panels[:, 0], panels[:, 1])
    return k.sum(), float(err.sum())


def integrate_adaptive(f: Callable, a: float, b: float, spec: QuadSpec | None = None, *,
                       period: float | None = None, max_panels: int = 20000) -> EvalResult:
    """Integrate the real vectorised function ``f`` over [a, b].

    At least ``spec.nodes_per_unit`` nodes are placed initially per unit
    length, or per ``period`` when the integrand oscillates with a known
    period.  Raises :class:`ConvergenceError` carrying the best
    estimate, flagged ``Truncated``, when the panel budget runs out.
    """
    spec = spec or QuadSpec()
    if not a < b:
        raise DomainError(f"need a < b, got [{a}, {b}]")
    scale = 1.0 if period is None else min(1.0, period)
    init = math.ceil((b - a) / scale * spec.nodes_per_unit / 21.0)
    out = adaptive_gk(f, a, b, spec.abs_tol, spec.rel_tol, init_panels=init, max_panels=max_panels)
    value = float(np.real(out.value))
    flags = set() if period is None else {Flag.OscillationResolved}
    res = EvalResult(value, out.abs_err, flags, {"panels": len(out.panels)})
    if not out.converged:
        res = EvalResult(value, out.abs_err, flags | {Flag.Truncated}, res.info)
        raise ConvergenceError(
            f"quadrature on [{a}, {b}] stopped at {len(out.panels)} panels with error {out.abs_err:.3g}", res)
    return res
