"""Subelliptic heat kernel issued from the north pole.

``p_cover`` evaluates

    p_t(r, theta) = (4 pi t)^(-1/2) int exp((y - i theta)^2 / 4t) q_t(cosh r cosh y) dy

on the universal cover.  On the real axis the integrand is as large as
``exp(-(r^2 + theta^2)/4t)`` while the result is ``exp(-d^2/4t)``, so for small
``t`` the cancellation exhausts double precision.  The integrand is analytic
for ``|Im y| < arccos(-1/cosh r)``, so the line is moved to ``Im y = phi``
through the saddle point (or, on the axis r = 0, close to the pole at
``Im y = -pi sign(theta)``), where it no longer cancels.

``p_cover_double`` keeps the real axis and the oscillatory ``u`` integral for
the Riemannian kernel; it exists as an independent check.  ``p_compact``
sums the cover kernel over the deck translations ``theta -> theta + 2 pi k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    ConvergenceError, CylPoint, DomainError, EvalContext, EvalResult, Flag, QuadSpec,
    RegimeError, adaptive_gk, canonical_theta, check_time, fixed_gk, GK_NODES, GK_WEIGHTS,
)
from .distance import ORIGIN_FALLBACK_R, phi_domain, phi_solve
from .riemannian import Q_INTEGRAL_MIN_T, q_integral_batch, q_kernel, q_log_parts

_LOG_TINY = -745.0
_MAX_PANELS = 20000


def contour_shift(n: int, t: float, r: float, theta: float) -> float:
    """Imaginary offset of the integration line for p_cover."""
    if theta == 0.0:
        return 0.0
    lim = phi_domain(r)
    margin = min(2.0 * n * t / abs(theta), 0.5 * lim)
    edge = lim - margin
    if r < ORIGIN_FALLBACK_R:
        # the saddle sits within O(r) of the edge; any line is exact, this one is cheap
        return -math.copysign(edge, theta)
    phi = phi_solve(r, theta).phi
    return max(-edge, min(edge, phi))


class _CoverIntegrand:
    """``exp(L(y) - ref) * factor(y)`` on the line ``y = x + i shift``."""

    def __init__(self, n, t, r, theta, shift):
        self.n, self.t, self.r, self.theta, self.shift = n, t, r, theta, shift
        self.sh2 = 2.0 * math.sinh(0.5 * r) ** 2
        self.ref = 0.0

    def log_parts(self, x):
        x = np.asarray(x, dtype=float)
        if self.shift == 0.0:
            y = x
            s = self.sh2 * np.cosh(y) + 2.0 * np.sinh(0.5 * y) ** 2
            delta = None if self.r > 0 else np.abs(y)
        else:
            y = x + 1j * self.shift
            s = self.sh2 * np.cosh(y) + 2.0 * np.sinh(0.5 * y) ** 2
            delta = None if self.r > 0 else np.where(x >= 0, y, -y)
        log_scale, factor = q_log_parts(self.n, self.t, s, delta)
        return (y - 1j * self.theta) ** 2 / (4.0 * self.t) + log_scale, factor

    def log_modulus(self, x):
        log_l, factor = self.log_parts(x)
        with np.errstate(divide="ignore"):
            return np.real(log_l) + np.log(np.abs(factor))

    def __call__(self, x):
        log_l, factor = self.log_parts(x)
        out = factor * np.exp(log_l - self.ref)
        if self.shift == 0.0 and self.theta == 0.0:
            return out.real
        return out


@dataclass(frozen=True)
class Contour:
    """Frozen integration rule for p_cover: line offset, reference log scale, panels."""

    shift: float
    ref: float
    panels: np.ndarray


def _truncation(g: _CoverIntegrand, spec: QuadSpec, side: int) -> tuple[float, bool]:
    """Distance along one side beyond which the integrand is below e^-cutoff of its peak."""
    xmax = spec.y_halfwidth
    xs = np.linspace(0.0, xmax, 4001) * side
    lm = g.log_modulus(xs) - g.ref
    above = np.nonzero(lm > -spec.exponent_cutoff)[0]
    if above.size == 0:
        return 0.5, False
    last = above[-1]
    if last == xs.size - 1:
        return xmax, True
    return min(xmax, abs(xs[min(last + 2, xs.size - 1)]) + 0.5), False


def _setup(n, t, r, theta, spec, shift=None):
    shift = contour_shift(n, t, r, theta) if shift is None else shift
    g = _CoverIntegrand(n, t, r, theta, shift)
    xs = np.linspace(-0.5, 0.5, 201)
    g.ref = float(np.max(g.log_modulus(xs)))
    return g


def _abs_tol_scaled(spec, ref, t):
    lg = math.log(spec.abs_tol) - ref + 0.5 * math.log(4.0 * math.pi * t)
    return math.exp(min(lg, 700.0)) if lg > _LOG_TINY else 0.0


def _finish(g, integral, err, t, spec, flags, info):
    scale = math.exp(g.ref) / math.sqrt(4.0 * math.pi * t) if g.ref > _LOG_TINY else 0.0
    value = float(np.real(integral)) * scale
    imag = float(np.imag(integral)) * scale
    abs_err = err * scale
    if abs(imag) > 10.0 * max(spec.abs_tol, abs_err):
        flags.add(Flag.ImagResidueLarge)
    info.update(imag=imag, shift=g.shift, log_scale=g.ref, log_integral=math.log(abs(np.real(integral))) if np.real(integral) else -math.inf)
    return EvalResult(value, abs_err, flags, info)


def cover_contour(ctx: EvalContext, t: float, pt: CylPoint, spec: QuadSpec | None = None) -> Contour:
    """Adaptive rule for ``p_cover`` at ``pt``; reusable at nearby points."""
    spec = spec or QuadSpec()
    return _p_cover_adaptive(ctx.n, check_time(t), pt.r, abs(pt.theta), spec)[1]


def _p_cover_adaptive(n, t, r, theta, spec):
    g = _setup(n, t, r, theta, spec)
    xp, trunc_p = _truncation(g, spec, +1)
    xm, trunc_m = _truncation(g, spec, -1)
    flags = set()
    if trunc_p or trunc_m:
        flags.add(Flag.Truncated)
    width = min(1.0, math.sqrt(t))
    if theta != 0.0:
        width = min(width, 4.0 * math.pi * t / abs(theta))
        flags.add(Flag.OscillationResolved)
    init = math.ceil((xp + xm) / width * spec.nodes_per_unit / 21.0)
    out = adaptive_gk(g, -xm, xp, _abs_tol_scaled(spec, g.ref, t), spec.rel_tol,
                      init_panels=init, max_panels=_MAX_PANELS)
    err = out.abs_err
    if trunc_p or trunc_m:
        # beyond the cut the integrand decays like |x|^n exp(-n|x|) or faster
        edge = np.exp(g.log_modulus(np.array([-xm, xp])) - g.ref)
        err += 2.0 * float(np.sum(edge * [trunc_m, trunc_p])) / n
    ok = out.converged and not (trunc_p or trunc_m)
    if not out.converged:
        flags.add(Flag.Truncated)
    res = _finish(g, out.value, err, t, spec, flags,
                  {"y_range": (-xm, xp), "panels": len(out.panels)})
    return res, Contour(g.shift, g.ref, out.panels), ok


def p_cover(ctx: EvalContext, t: float, pt: CylPoint, spec: QuadSpec | None = None, *,
            contour: Contour | None = None) -> EvalResult:
    """Subelliptic heat kernel on the universal cover at (r, theta).

    The kernel is even in theta and is always evaluated at ``|theta|``.

    With ``contour`` the integral is taken with that frozen rule instead of
    adaptively, which makes the result a smooth function of (t, r, theta) as
    needed by finite-difference stencils.
    """
    spec = spec or QuadSpec()
    t = check_time(t)
    n = ctx.n
    if contour is not None:
        g = _CoverIntegrand(n, t, pt.r, abs(pt.theta), contour.shift)
        g.ref = contour.ref
        integral, err = fixed_gk(g, contour.panels)
        return _finish(g, integral, err, t, spec, set(), {"panels": len(contour.panels)})
    res, _, converged = _p_cover_adaptive(n, t, pt.r, abs(pt.theta), spec)
    if not converged and res.abs_err > 10.0 * spec.tolerance(res.value):
        raise ConvergenceError(f"p_cover at t={t}, r={pt.r}, theta={pt.theta} did not converge", res)
    return res


def log_p_cover(ctx: EvalContext, t: float, pt: CylPoint, spec: QuadSpec | None = None) -> float:
    """Natural log of p_cover, usable when the value itself underflows."""
    res = p_cover(ctx, t, pt, spec)
    return res.info["log_scale"] + res.info["log_integral"] - 0.5 * math.log(4.0 * math.pi * t)


# ---------------------------------------------------------------------------
# many points at once (real axis, fixed rule): for moderate t only

def _real_axis_rule(n: int, t: float, theta_max: float, spec: QuadSpec):
    # slowest decay is on the axis r = 0: (y/sinh y)^n ~ (2y)^n e^{-ny}
    ycut = spec.exponent_cutoff / n
    for _ in range(20):
        ycut = (spec.exponent_cutoff + n * math.log(2.0 * ycut + 1.0)) / n
    ycut = min(ycut, spec.y_halfwidth)
    width = min(0.5, math.sqrt(t))
    if theta_max > 0:
        width = min(width, 4.0 * math.pi * t / theta_max)
    npan = math.ceil(ycut / width)
    edges = np.linspace(0.0, ycut, npan + 1)
    half = 0.5 * np.diff(edges)
    y = (0.5 * (edges[1:] + edges[:-1])[:, None] + half[:, None] * GK_NODES[None, :]).ravel()
    w = (half[:, None] * GK_WEIGHTS[None, :]).ravel()
    return y, w


MANY_ROUNDOFF = 1e-9


def p_cover_many(ctx: EvalContext, t: float, r, theta, spec: QuadSpec | None = None,
                 abs_floor=0.0, wrap_k: int = 0, chunk: int = 128) -> np.ndarray:
    """Vectorised p_cover for arrays ``r``, ``theta`` (broadcast together).

    Uses the real-axis cosine form with one shared composite Kronrod rule;
    the ``q`` factor is computed once per distinct ``r``.  With ``wrap_k > 0``
    the values are summed over ``theta + 2 pi k``, ``|k| <= wrap_k``.
    Points where that form loses more than ``MANY_ROUNDOFF`` relative accuracy
    to cancellation (small t, large theta), and whose rounding error also
    exceeds ``abs_floor`` (broadcast like ``r``), are redone with :func:`p_cover`.
    """
    spec = spec or QuadSpec()
    t = check_time(t)
    r, theta = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(theta, dtype=float))
    shape = r.shape
    rf, tf = r.ravel(), theta.ravel()
    floor = np.broadcast_to(np.asarray(abs_floor, dtype=float), shape).ravel()
    shifts = 2.0 * math.pi * np.arange(-wrap_k, wrap_k + 1)
    thetas = np.abs(tf[:, None] + shifts[None, :])          # (points, shifts)
    y, w = _real_axis_rule(ctx.n, t, float(np.max(thetas)) if thetas.size else 0.0, spec)
    ru, inv = np.unique(rf, return_inverse=True)
    order = np.argsort(inv, kind="stable")
    bounds = np.searchsorted(inv[order], np.arange(ru.size + 1))
    out = np.zeros(thetas.shape)
    noise = np.zeros(thetas.shape)
    n = ctx.n
    shy = 2.0 * np.sinh(0.5 * y) ** 2
    chy = np.cosh(y)
    for i0 in range(0, ru.size, chunk):
        rc = ru[i0:i0 + chunk, None]
        s = 2.0 * np.sinh(0.5 * rc) ** 2 * chy[None, :] + shy[None, :]
        log_scale, factor = q_log_parts(n, t, s)
        magw = factor * np.exp(log_scale + y[None, :] ** 2 / (4.0 * t)) * w[None, :]
        absw = np.abs(magw).sum(axis=1)
        for i in range(i0, min(i0 + chunk, ru.size)):
            idx = order[bounds[i]:bounds[i + 1]]
            th = thetas[idx]
            decay = np.exp(-th**2 / (4.0 * t))
            out[idx] = (np.cos(th[..., None] * y / (2.0 * t)) @ magw[i - i0]) * decay
            noise[idx] = absw[i - i0] * decay
    out *= 2.0 / math.sqrt(4.0 * math.pi * t)
    noise *= 32.0 * np.finfo(float).eps / math.sqrt(4.0 * math.pi * t)
    bad = (noise > MANY_ROUNDOFF * np.abs(out)) & (noise > floor[:, None])
    for j, k in zip(*np.nonzero(bad)):
        out[j, k] = p_cover(ctx, t, CylPoint(rf[j], thetas[j, k]), spec).value
    return out.sum(axis=1).reshape(shape)


# ---------------------------------------------------------------------------
# double integral

def p_cover_double(ctx: EvalContext, t: float, pt: CylPoint, spec: QuadSpec | None = None, *,
                   inner_rel_noise: float = 1e-9) -> EvalResult:
    """Kernel on the cover from the iterated (y, u) integral.

    The inner ``u`` integral cancels catastrophically once ``q_t`` falls far
    below ``exp(pi^2/4t)``: its rounding error is measured per node and the
    outer range where it exceeds ``inner_rel_noise`` is supplied by the
    derivative-formula kernel.  ``info['tail_fraction']`` reports the share
    of the result coming from that tail.
    """
    spec = spec or QuadSpec()
    t = check_time(t)
    if t < Q_INTEGRAL_MIN_T:
        raise RegimeError(f"p_cover_double needs t >= {Q_INTEGRAL_MIN_T}; use p_cover", "p_cover")
    n, r, theta = ctx.n, pt.r, abs(pt.theta)
    sh2 = 2.0 * math.sinh(0.5 * r) ** 2

    def z_of(y):
        return sh2 * np.cosh(y) + np.cosh(y)

    # locate the reliable range |y| <= y_safe of the inner integral
    ys = np.linspace(0.0, min(spec.y_halfwidth, 40.0), 801)
    qv, noise = q_integral_batch(n, t, z_of(ys), spec)
    exact = q_kernel(n, t, np.arccosh(z_of(ys)))
    bad = np.nonzero(noise > inner_rel_noise * np.abs(exact))[0]
    y_safe = ys[bad[0] - 1] if bad.size else ys[-1]
    y_safe = max(y_safe, 0.0)

    def outer(y):
        qi, _ = q_integral_batch(n, t, z_of(y), spec)
        return np.exp((y - 1j * theta) ** 2 / (4.0 * t)) * qi

    def outer_tail(y):
        s = sh2 * np.cosh(y) + 2.0 * np.sinh(0.5 * y) ** 2
        log_scale, factor = q_log_parts(n, t, s)
        return np.exp((y - 1j * theta) ** 2 / (4.0 * t) + log_scale) * factor

    flags = {Flag.OscillationResolved}
    width = min(1.0, math.sqrt(t))
    if theta != 0:
        width = min(width, 4.0 * math.pi * t / abs(theta))
    core = adaptive_gk(outer, -y_safe, y_safe, spec.abs_tol, spec.rel_tol,
                       init_panels=math.ceil(2 * y_safe / width * spec.nodes_per_unit / 21.0) if y_safe > 0 else 1)
    # tail: integrand decays at least like (2y)^n e^{-ny}
    ycut = spec.exponent_cutoff / n
    for _ in range(20):
        ycut = (spec.exponent_cutoff + n * math.log(2.0 * ycut + 1.0)) / n
    ycut = max(min(ycut, spec.y_halfwidth), y_safe)
    tail = 0.0 + 0.0j
    tail_err = 0.0
    if ycut > y_safe:
        init = math.ceil((ycut - y_safe) / width * spec.nodes_per_unit / 21.0)
        for a, b in ((y_safe, ycut), (-ycut, -y_safe)):
            o = adaptive_gk(outer_tail, a, b, spec.abs_tol, spec.rel_tol, init_panels=init)
            tail += o.value
            tail_err += o.abs_err
    if not core.converged:
        flags.add(Flag.Truncated)
    norm = 1.0 / math.sqrt(4.0 * math.pi * t)
    total = (core.value + tail) * norm
    value = float(np.real(total))
    abs_err = (core.abs_err + tail_err) * norm
    imag = float(np.imag(total))
    if abs(imag) > 10.0 * max(spec.abs_tol, abs_err, spec.rel_tol * abs(value)):
        flags.add(Flag.ImagResidueLarge)
    return EvalResult(value, abs_err, flags, {
        "imag": imag, "y_safe": float(y_safe),
        "tail_fraction": abs(float(np.real(tail)) * norm) / abs(value) if value else math.inf,
    })


# ---------------------------------------------------------------------------
# compact quotient

@dataclass(frozen=True)
class WrapSpec:
    k_max: int | None = None
    tail_tol: float = 1e-14

    def __post_init__(self):
        if self.k_max is not None and (int(self.k_max) != self.k_max or self.k_max < 1):
            raise DomainError(f"k_max must be an integer >= 1, got {self.k_max}")
        if not self.tail_tol > 0:
            raise DomainError(f"tail_tol must be positive, got {self.tail_tol}")


def default_k_max(t: float, theta: float, spec: QuadSpec) -> int:
    return 1 + math.ceil(math.sqrt(4.0 * t * spec.exponent_cutoff) / (2.0 * math.pi) + abs(theta) / (2.0 * math.pi))


def p_compact(ctx: EvalContext, t: float, pt: CylPoint, spec: QuadSpec | None = None,
              wrap: WrapSpec | None = None) -> EvalResult:
    """Kernel on the compact circle bundle: sum of the cover kernel over theta + 2 pi k."""
    spec = spec or QuadSpec()
    wrap = wrap or WrapSpec()
    t = check_time(t)
    theta = canonical_theta(pt.theta)
    kmax = wrap.k_max if wrap.k_max is not None else default_k_max(t, theta, spec)
    terms = {}
    for k in range(-kmax - 1, kmax + 2):
        terms[k] = p_cover(ctx, t, CylPoint(pt.r, theta + 2.0 * math.pi * k), spec)
    # fixed summation order: k = 0, then +-1, +-2, ...
    total = terms[0].value
    err = terms[0].abs_err
    for k in range(1, kmax + 1):
        total += terms[k].value + terms[-k].value
        err += terms[k].abs_err + terms[-k].abs_err
    omitted = terms[kmax + 1].value + terms[-kmax - 1].value
    flags = set().union(*(terms[k].flags for k in range(-kmax, kmax + 1)))
    info = {"k_max": kmax, "first_omitted": omitted, "terms": {k: terms[k].value for k in terms}}
    res = EvalResult(total, err + abs(omitted), flags, info)
    if abs(omitted) > wrap.tail_tol * abs(total):
        raise ConvergenceError(
            f"periodisation tail {omitted:.3g} exceeds tail_tol at k_max={kmax}; increase k_max", res)
    return res
