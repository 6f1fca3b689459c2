"""Checks of the computed kernel against the heat equation, total mass and
the law of the diffusion generated by the radial sub-Laplacian

    L = d_rr + ((2n-1) coth r + tanh r) d_r + tanh(r)^2 d_thth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (
    CylPoint, DomainError, EvalContext, EvalResult, QuadSpec, canonical_theta, check_time,
    measure_density,
)
from .subelliptic import WrapSpec, cover_contour, default_k_max, p_cover, p_cover_many

# ---------------------------------------------------------------------------
# heat equation


def radial_drift(n: int, r):
    return (2 * n - 1) / np.tanh(r) + np.tanh(r)


@dataclass(frozen=True)
class ResidualReport:
    point: tuple
    dt_estimate: float
    Lp_estimate: float
    rel_residual: float
    steps: tuple


def _frozen_kernel(ctx: EvalContext, t: float, pt: CylPoint, spec: QuadSpec) -> Callable:
    """p as a smooth function of (t, r, theta) near ``pt``: quadrature rules fixed at ``pt``."""
    if not ctx.compact:
        contour = cover_contour(ctx, t, pt, spec)
        return lambda tt, rr, th: p_cover(ctx, tt, CylPoint(rr, th), spec, contour=contour).value
    theta = canonical_theta(pt.theta)
    kmax = default_k_max(t, theta, spec)
    shifts = [2.0 * math.pi * k for k in range(-kmax, kmax + 1)]
    rules = [cover_contour(ctx, t, CylPoint(pt.r, theta + s), spec) for s in shifts]

    def f(tt, rr, th):
        th = th + theta - pt.theta
        return sum(p_cover(ctx, tt, CylPoint(rr, th + s), spec, contour=c).value
                   for s, c in zip(shifts, rules))

    return f


def pde_residual(ctx: EvalContext, t: float, pt: CylPoint, steps=(1e-3, 1e-3, 1e-3),
                 spec: QuadSpec | None = None, kernel: Callable | None = None) -> ResidualReport:
    """Central-difference residual of ``d_t p = L p`` at (t, r, theta).

    ``kernel(t, r, theta)`` replaces the computed kernel when given.
    """
    spec = spec or QuadSpec()
    t = check_time(t)
    ht, hr, hth = (float(h) for h in steps)
    if not (ht > 0 and hr > 0 and hth > 0):
        raise DomainError(f"finite-difference steps must be positive, got {steps}")
    if pt.r < 5.0 * hr:
        raise DomainError(f"pde_residual needs r >= 5 h_r, got r={pt.r}, h_r={hr}")
    if t < 2.0 * ht:
        raise DomainError(f"pde_residual needs t >= 2 h_t, got t={t}, h_t={ht}")
    f = kernel if kernel is not None else _frozen_kernel(ctx, t, pt, spec)
    r, th = pt.r, pt.theta
    p0 = f(t, r, th)
    dt = (f(t + ht, r, th) - f(t - ht, r, th)) / (2.0 * ht)
    prp, prm = f(t, r + hr, th), f(t, r - hr, th)
    ptp, ptm = f(t, r, th + hth), f(t, r, th - hth)
    p_rr = (prp - 2.0 * p0 + prm) / hr**2
    p_r = (prp - prm) / (2.0 * hr)
    p_thth = (ptp - 2.0 * p0 + ptm) / hth**2
    lp = p_rr + radial_drift(ctx.n, r) * p_r + math.tanh(r) ** 2 * p_thth
    rel = abs(dt - lp) / (abs(dt) + 1e-30)
    return ResidualReport((t, r, th), dt, lp, rel, (ht, hr, hth))


# ---------------------------------------------------------------------------
# total mass


def _gl_composite(a: float, b: float, width: float, order: int = 8):
    npan = max(1, math.ceil((b - a) / width))
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, npan + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def r_max(n: int, t: float, cutoff: float) -> float:
    """Radius beyond which exp(-r^2/4t) times the volume growth exp(2nr) is below exp(-cutoff)."""
    return 4.0 * t * n + math.sqrt(16.0 * t * t * n * n + 4.0 * t * cutoff)


def theta_max(t: float, cutoff: float) -> float:
    return math.sqrt(4.0 * t * cutoff)


def p_many(ctx: EvalContext, t: float, r, theta, spec: QuadSpec | None = None, abs_floor=0.0,
           wrap: WrapSpec | None = None):
    """Kernel on arrays of points for the space of ``ctx``."""
    spec = spec or QuadSpec()
    if not ctx.compact:
        return p_cover_many(ctx, t, r, theta, spec, abs_floor=abs_floor)
    r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
    theta = np.vectorize(canonical_theta)(theta) if theta.size else theta
    if wrap is not None and wrap.k_max is not None:
        kmax = wrap.k_max
    else:
        # translates farther than theta_max from [-pi, pi] are below exp(-cutoff)
        kmax = math.ceil((theta_max(t, spec.exponent_cutoff) + math.pi) / (2.0 * math.pi))
    return p_cover_many(ctx, t, r, theta, spec, abs_floor=abs_floor, wrap_k=kmax)


def normalization_check(ctx: EvalContext, t: float, spec: QuadSpec | None = None) -> EvalResult:
    """Integral of the kernel against the invariant measure; expected to be 1."""
    spec = spec or QuadSpec()
    t = check_time(t)
    width = min(0.5, math.sqrt(t))
    rmax = r_max(ctx.n, t, spec.exponent_cutoff)
    rr, wr = _gl_composite(0.0, rmax, width)
    if ctx.compact:
        tt, wt = _gl_composite(0.0, math.pi, width)
    else:
        tt, wt = _gl_composite(0.0, theta_max(t, spec.exponent_cutoff), width)
    dens = measure_density(ctx, rr)
    # absolute accuracy of ~1e-12 per unit area of (r, theta) is plenty for the total
    floor = 1e-12 / np.maximum(dens, 1e-300)[:, None]
    p = p_many(ctx, t, rr[:, None], tt[None, :], spec, abs_floor=floor)
    total = 2.0 * float(wr @ (p * dens[:, None]) @ wt)
    return EvalResult(total, 0.0, info={"r_max": rmax, "nodes": p.size})


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class McConfig:
    paths: int = 100_000
    dt: float = 1e-3
    seed: int = 0
    r0: float = 1e-3
    substep_threshold: float = 0.1
    max_substeps: int = 1_000_000
    block: int = 8192

    def __post_init__(self):
        if int(self.paths) != self.paths or self.paths < 1000:
            raise DomainError(f"paths must be an integer >= 1000, got {self.paths}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DomainError(f"dt must be positive, got {self.dt}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not self.r0 > 0:
            raise DomainError(f"r0 must be positive, got {self.r0}")
        if not self.substep_threshold > 0:
            raise DomainError(f"substep_threshold must be positive, got {self.substep_threshold}")
        if self.block < 1:
            raise DomainError("block must be >= 1")


@dataclass
class McSamples:
    r: np.ndarray
    theta: np.ndarray
    aborted: int = 0
    substeps: int = 0

    def __len__(self):
        return self.r.size

    def __iter__(self):
        return iter(zip(self.r.tolist(), self.theta.tolist()))


def _block_rng(seed: int, block: int) -> np.random.Generator:
    # counter-based generator keyed by (seed, block); independent of scheduling
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _simulate_block(n: int, t: float, cfg: McConfig, npaths: int, rng: np.random.Generator):
    nsteps = max(1, math.ceil(t / cfg.dt - 1e-9))
    h = t / nsteps
    r = np.full(npaths, cfg.r0)
    th = np.zeros(npaths)
    subs = np.zeros(npaths, dtype=np.int64)
    alive = np.ones(npaths, dtype=bool)
    sq = math.sqrt(2.0 * h)
    for _ in range(nsteps):
        z = rng.standard_normal((2, npaths))
        big = alive & (r >= cfg.substep_threshold)
        rb = r[big]
        r[big] = np.abs(rb + radial_drift(n, rb) * h + sq * z[0, big])
        th[big] += sq * np.tanh(rb) * z[1, big]
        idx = np.nonzero(alive & ~big)[0]
        rem = np.full(idx.size, h)
        while idx.size:
            rs = np.maximum(r[idx], 1e-300)
            hh = np.minimum(rem, rs / (2.0 * radial_drift(n, rs)))
            zz = rng.standard_normal((2, idx.size))
            s2 = np.sqrt(2.0 * hh)
            r[idx] = np.abs(rs + radial_drift(n, rs) * hh + s2 * zz[0])
            th[idx] += s2 * np.tanh(rs) * zz[1]
            subs[idx] += 1
            rem -= hh
            over = subs[idx] > cfg.max_substeps
            alive[idx[over]] = False
            keep = (rem > 1e-15 * h) & ~over
            idx, rem = idx[keep], rem[keep]
    return r[alive], th[alive], int((~alive).sum()), int(subs.sum())


def mc_simulate(ctx: EvalContext, t: float, cfg: McConfig) -> McSamples:
    """Euler-Maruyama samples of the diffusion with generator L at time ``t``.

    Started at (r0, 0); reflected at r = 0; steps below ``substep_threshold``
    are subdivided so that drift * step <= r/2.  Paths exceeding
    ``max_substeps`` substeps are dropped and counted in ``aborted``.
    """
    t = check_time(t)
    if cfg.dt > t:
        raise DomainError(f"dt={cfg.dt} exceeds t={t}")
    rs, ths, aborted, subs = [], [], 0, 0
    for b, start in enumerate(range(0, cfg.paths, cfg.block)):
        m = min(cfg.block, cfg.paths - start)
        r, th, ab, sb = _simulate_block(ctx.n, t, cfg, m, _block_rng(cfg.seed, b))
        rs.append(r)
        ths.append(th)
        aborted += ab
        subs += sb
    theta = np.concatenate(ths)
    if ctx.compact:
        theta = np.vectorize(canonical_theta)(theta) if theta.size else theta
    return McSamples(np.concatenate(rs), theta, aborted, subs)


@dataclass
class HistogramGrid:
    r_edges: np.ndarray
    theta_edges: np.ndarray
    counts: np.ndarray = None
    mu_mass: np.ndarray = None

    def __post_init__(self):
        self.r_edges = np.asarray(self.r_edges, dtype=float)
        self.theta_edges = np.asarray(self.theta_edges, dtype=float)
        for e in (self.r_edges, self.theta_edges):
            if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
                raise DomainError("histogram edges must be strictly ascending with at least two entries")
        if self.r_edges[0] < 0:
            raise DomainError("r edges must be >= 0")
        shape = (self.r_edges.size - 1, self.theta_edges.size - 1)
        if self.counts is None:
            self.counts = np.zeros(shape, dtype=np.int64)

    def with_measure(self, ctx: EvalContext) -> "HistogramGrid":
        # int sinh^(2n-1) cosh dr = sinh^(2n)/(2n)
        n = ctx.n
        c = 2.0 * math.pi**n / math.factorial(n - 1) / (2 * n)
        radial = np.diff(c * np.sinh(self.r_edges) ** (2 * n))
        self.mu_mass = radial[:, None] * np.diff(self.theta_edges)[None, :]
        return self


def default_grid(ctx: EvalContext, t: float, bins=(30, 24)) -> HistogramGrid:
    cutoff = 16.0
    rmax = r_max(ctx.n, t, cutoff)
    if ctx.compact:
        te = np.linspace(-math.pi, math.pi, bins[1] + 1)
    else:
        tm = theta_max(t, cutoff)
        te = np.linspace(-tm, tm, bins[1] + 1)
    return HistogramGrid(np.linspace(0.0, rmax, bins[0] + 1), te).with_measure(ctx)


@dataclass
class McReport:
    expected: np.ndarray
    counts: np.ndarray
    z: np.ndarray
    qualifying: int
    within: int
    fraction_within: float
    predicted_total: float
    samples: int
    aborted: int
    outside: int
    info: dict = field(default_factory=dict)


def bin_masses(ctx: EvalContext, t: float, grid: HistogramGrid, spec: QuadSpec | None = None,
               order: int = 6) -> np.ndarray:
    """Predicted probability of each bin: integral of p over the bin against the measure."""
    x, w = np.polynomial.legendre.leggauss(order)
    re, te = grid.r_edges, grid.theta_edges
    rh, rm = 0.5 * np.diff(re), 0.5 * (re[1:] + re[:-1])
    th, tm = 0.5 * np.diff(te), 0.5 * (te[1:] + te[:-1])
    rr = rm[:, None] + rh[:, None] * x            # (bins_r, order)
    tt = tm[:, None] + th[:, None] * x            # (bins_t, order)
    dens = measure_density(ctx, rr)
    floor = 1e-14 / np.maximum(dens.ravel(), 1e-300)[:, None]
    p = p_many(ctx, t, rr.ravel()[:, None], tt.ravel()[None, :], spec, abs_floor=floor)
    p = p.reshape(rr.shape[0], order, tt.shape[0], order)
    wr = (rh[:, None] * w) * dens
    wt = th[:, None] * w
    return np.einsum("aibj,ai,bj->ab", p, wr, wt)


def mc_compare(samples: McSamples, ctx: EvalContext, t: float, grid: HistogramGrid,
               spec: QuadSpec | None = None, min_expected: float = 20.0,
               min_coverage: float = 0.999) -> McReport:
    """Histogram the samples and compare with the predicted bin masses."""
    if len(samples) == 0:
        raise DomainError("mc_compare needs a nonempty sample")
    t = check_time(t)
    m = bin_masses(ctx, t, grid, spec)
    total = float(m.sum())
    if total < min_coverage:
        raise DomainError(f"grid covers only {total:.6f} of the predicted mass; widen it")
    counts, _, _ = np.histogram2d(samples.r, samples.theta, bins=[grid.r_edges, grid.theta_edges])
    counts = counts.astype(np.int64)
    grid.counts = counts
    nsamp = len(samples)
    expected = nsamp * m
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (counts - expected) / np.sqrt(expected * (1.0 - m))
    q = expected >= min_expected
    within = int(np.sum(np.abs(z[q]) <= 3.0))
    nq = int(q.sum())
    return McReport(expected, counts, z, nq, within, within / nq if nq else math.nan, total,
                    nsamp, samples.aborted, nsamp - int(counts.sum()))
