"""Command line: ``crhyp <command> [flags]`` or ``python3 -m crhyp``.

Rows go to ``--out`` (or standard output) as CSV or JSON lines; a one-line
JSON summary goes to standard output (standard error when the rows
themselves use standard output).  Exit status: 0 ok, 1 a numeric tolerance
was not met, 2 bad usage.
"""
from __future__ import annotations

import argparse
import json
import math
import io
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .core import ConvergenceError, CylPoint, DomainError, EvalContext, QuadSpec, Space, check_time
from .distance import (
    an_bn_constants, asym_axis, asym_diagonal, asym_general, asym_vertical, sr_distance,
)
from .subelliptic import WrapSpec, log_p_cover, p_compact, p_cover, p_cover_double
from .verification import (
    McConfig, default_grid, mc_compare, mc_simulate, normalization_check, pde_residual,
)

COMMANDS = ("kernel", "distance", "asympt", "verify", "mc", "table")
PDE_TOL = 1e-3
MASS_TOL = 1e-3
MC_MIN_FRACTION = 0.95


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def fmt(x) -> str:
    if isinstance(x, (bool, str)):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def parse_values(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:count`` (inclusive linspace)."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ":" in part:
                a, b, k = part.split(":")
                k = int(k)
                if k < 1 or (k == 1 and float(a) != float(b)):
                    raise ValueError
                out.extend(np.linspace(float(a), float(b), k).tolist())
            else:
                out.append(float(part))
        except ValueError:
            raise UsageError(f"cannot parse value list {text!r}; use a,b,c or start:stop:count") from None
    if not out:
        raise UsageError(f"empty value list {text!r}")
    return out


def _common(p: argparse.ArgumentParser, *, t=True, point=True):
    p.add_argument("--n", type=int, default=1, help="dimension index (space has dimension 2n+1)")
    if t:
        p.add_argument("--t", default="0.5", help="heat time(s): value, list a,b or range start:stop:count")
    if point:
        p.add_argument("--r", default="0", help="radial coordinate(s)")
        p.add_argument("--theta", default="0", help="fiber coordinate(s)")
    p.add_argument("--space", choices=("compact", "cover"), default="cover")
    p.add_argument("--rel-tol", type=float, default=1e-10)
    p.add_argument("--abs-tol", type=float, default=1e-300)
    p.add_argument("--kmax", type=int, default=None, help="periodization cut for the compact space")
    p.add_argument("--seed", type=int, default=20261016)
    p.add_argument("--paths", type=int, default=200_000)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--out", default=None, help="output file (default: standard output)")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--config", default=None, help="file of 'key = value' lines; explicit flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crhyp", description="Subelliptic heat kernel on the CR hyperbolic space.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    p = sub.add_parser("kernel", help="heat kernel at points")
    _common(p)
    p.add_argument("--method", choices=("single", "double"), default="single",
                   help="cover kernel from the single (default) or iterated integral")
    p = sub.add_parser("distance", help="sub-Riemannian distance from the pole")
    _common(p, t=False)
    p = sub.add_parser("asympt", help="small-time asymptotics and their ratio to the kernel")
    _common(p)
    p.add_argument("--regime", choices=("diagonal", "vertical", "axis", "general"), required=True)
    p = sub.add_parser("verify", help="heat equation, total mass or Monte Carlo check")
    _common(p)
    p.add_argument("--check", choices=("pde", "mass", "mc"), required=True)
    p.add_argument("--h", type=float, default=1e-3, help="finite-difference step")
    p = sub.add_parser("mc", help="Monte Carlo samples of the diffusion")
    _common(p, point=False)
    p = sub.add_parser("table", help="kernel, distance and -4t log p over a grid")
    _common(p)
    for sp in sub.choices.values():
        sp.error = parser.error
    return parser


def _read_config(path: str) -> list[str]:
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    tokens = []
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{num}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-").lstrip("-")
        if key == "config":
            raise UsageError(f"{path}:{num}: nested config files are not supported")
        tokens += [f"--{key}", value]
    return tokens


_NEGATIVE = re.compile(r"^-[\d.]")


def _join_negative(argv: list[str]) -> list[str]:
    # argparse takes "-1.1,0.7" for an option; bind it to its flag as "--theta=-1.1,0.7"
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a.startswith("--") and "=" not in a and i + 1 < len(argv) and _NEGATIVE.match(argv[i + 1]):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
        else:
            out.append(a)
            i += 1
    return out


def _with_config(argv: list[str]) -> list[str]:
    # config values go right after the command so that later explicit flags override them
    argv = _join_negative(argv)
    for i, a in enumerate(argv):
        path = None
        if a == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif a.startswith("--config="):
            path = a.split("=", 1)[1]
        if path is not None:
            cmd = next((j for j, x in enumerate(argv) if x in COMMANDS), None)
            if cmd is None:
                return argv
            return argv[:cmd + 1] + _join_negative(_read_config(path)) + argv[cmd + 1:]
    return argv


def _threads() -> int:
    raw = os.environ.get("CRHYP_THREADS")
    if raw is None:
        return 1
    try:
        k = int(raw)
    except ValueError:
        k = 0
    if k < 1:
        raise UsageError(f"CRHYP_THREADS must be a positive integer, got {raw!r}")
    return k


class _Writer:
    """Rows are buffered and only emitted once the command has finished."""

    def __init__(self, stream, fmt_name, columns):
        self.stream, self.fmt, self.columns = stream, fmt_name, columns
        self.rows = 0
        if fmt_name == "csv":
            stream.write(",".join(columns) + "\n")

    def write(self, row):
        if self.fmt == "csv":
            self.stream.write(",".join(fmt(v) for v in row) + "\n")
        else:
            rec = {}
            for c, v in zip(self.columns, row):
                rec[c] = v if isinstance(v, str) else (int(v) if isinstance(v, (int, np.integer)) else float(v))
            self.stream.write(json.dumps(rec) + "\n")
        self.rows += 1


def _flags(res) -> str:
    return "|".join(sorted(f.value for f in res.flags))


def _grid(args, with_t=True):
    ts = parse_values(args.t) if with_t else [None]
    rs = parse_values(args.r)
    ths = parse_values(args.theta)
    return [(t, r, th) for t in ts for r in rs for th in ths]


def _pmap(fn, items):
    k = _threads()
    if k == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=k) as pool:
        return list(pool.map(fn, items))


def _validate(args):
    # reject bad grids before anything is written
    if hasattr(args, "t"):
        for t in parse_values(args.t):
            check_time(t)
    if hasattr(args, "r"):
        for r in parse_values(args.r):
            for th in parse_values(args.theta):
                CylPoint(r, th)
    if args.command in ("mc", "verify"):
        McConfig(paths=args.paths, dt=args.dt, seed=args.seed)
    _threads()


def _kernel(ctx, spec, wrap, t, r, th, method="single"):
    pt = CylPoint(r, th)
    if ctx.compact:
        return p_compact(ctx, t, pt, spec, wrap)
    if method == "double":
        return p_cover_double(ctx, t, pt, spec)
    return p_cover(ctx, t, pt, spec)


def run(argv: list[str], stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(_with_config(list(argv)))
        ctx = EvalContext(args.n, Space.parse(args.space))
        spec = QuadSpec(rel_tol=args.rel_tol, abs_tol=args.abs_tol)
        wrap = WrapSpec(k_max=args.kmax)
        _validate(args)
        out = open(args.out, "w") if args.out else None
    except UsageError as exc:
        print(f"crhyp: error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"crhyp: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"crhyp: error: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
        return 2
    stream = out or stdout
    summary_stream = stdout if out else sys.stderr
    buffer = io.StringIO()
    try:
        summary = COMMAND_TABLE[args.command](args, ctx, spec, wrap, buffer)
        code = summary.pop("exit", 0)
        stream.write(buffer.getvalue())
    except (UsageError, DomainError) as exc:
        print(f"crhyp: error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"crhyp: numeric failure: {exc}", file=sys.stderr)
        return 1
    finally:
        if out:
            out.close()
    summary_stream.write(json.dumps(summary, sort_keys=True) + "\n")
    return code


def cmd_kernel(args, ctx, spec, wrap, stream):
    w = _Writer(stream, args.format, ["n", "t", "r", "theta", "p", "abs_err", "flags"])
    pts = _grid(args)
    res = _pmap(lambda x: _kernel(ctx, spec, wrap, *x, method=args.method), pts)
    for (t, r, th), v in zip(pts, res):
        w.write([ctx.n, t, r, th, v.value, v.abs_err, _flags(v)])
    return {"command": "kernel", "rows": w.rows, "max_rel_err": max(v.rel_err for v in res)}


def cmd_distance(args, ctx, spec, wrap, stream):
    w = _Writer(stream, args.format, ["n", "r", "theta", "d2", "d", "regime"])
    pts = _grid(args, with_t=False)
    for _, r, th in pts:
        d = sr_distance(ctx, CylPoint(r, th))
        w.write([ctx.n, r, th, d.d2, d.d, d.regime.value])
    return {"command": "distance", "rows": w.rows}


def cmd_asympt(args, ctx, spec, wrap, stream):
    w = _Writer(stream, args.format, ["n", "t", "r", "theta", "regime", "asymptotic", "p", "ratio"])
    pts = _grid(args)
    consts = an_bn_constants(ctx.n) if args.regime == "diagonal" else None

    def one(x):
        t, r, th = x
        if args.regime == "diagonal":
            a = asym_diagonal(ctx, t, consts)
        elif args.regime == "vertical":
            a = asym_vertical(ctx, t, th)
        elif args.regime == "axis":
            a = asym_axis(ctx, t, r)
        else:
            a = asym_general(ctx, t, CylPoint(r, th))
        p = _kernel(ctx, spec, wrap, t, r, th).value
        return a.value, p

    res = _pmap(one, pts)
    for (t, r, th), (a, p) in zip(pts, res):
        w.write([ctx.n, t, r, th, args.regime, a, p, p / a if a else math.inf])
    return {"command": "asympt", "rows": w.rows}


def cmd_verify(args, ctx, spec, wrap, stream):
    failed = 0
    if args.check == "pde":
        w = _Writer(stream, args.format, ["n", "t", "r", "theta", "h", "dt_estimate", "Lp_estimate", "rel_residual"])
        worst = 0.0
        for t, r, th in _grid(args):
            rep = pde_residual(ctx, t, CylPoint(r, th), (args.h,) * 3, spec)
            w.write([ctx.n, t, r, th, args.h, rep.dt_estimate, rep.Lp_estimate, rep.rel_residual])
            worst = max(worst, float(rep.rel_residual))
            failed += rep.rel_residual > PDE_TOL
        summary = {"check": "pde", "max_rel_residual": worst, "tolerance": PDE_TOL}
    elif args.check == "mass":
        w = _Writer(stream, args.format, ["n", "t", "space", "mass", "deviation"])
        worst = 0.0
        for t in parse_values(args.t):
            m = normalization_check(ctx, t, spec).value
            w.write([ctx.n, t, ctx.space.value, m, m - 1.0])
            worst = max(worst, abs(m - 1.0))
            failed += abs(m - 1.0) > MASS_TOL
        summary = {"check": "mass", "max_deviation": worst, "tolerance": MASS_TOL}
    else:
        w = _Writer(stream, args.format, ["n", "t", "paths", "dt", "seed", "qualifying", "within",
                                          "fraction_within", "predicted_total", "aborted"])
        worst = 1.0
        for t in parse_values(args.t):
            cfg = McConfig(paths=args.paths, dt=args.dt, seed=args.seed)
            s = mc_simulate(ctx, t, cfg)
            rep = mc_compare(s, ctx, t, default_grid(ctx, t), spec)
            w.write([ctx.n, t, args.paths, args.dt, args.seed, rep.qualifying, rep.within,
                     rep.fraction_within, rep.predicted_total, rep.aborted])
            worst = min(worst, rep.fraction_within)
            failed += not rep.fraction_within >= MC_MIN_FRACTION
        summary = {"check": "mc", "min_fraction_within": worst, "required": MC_MIN_FRACTION}
    summary.update(command="verify", rows=w.rows, failed=int(failed), exit=1 if failed else 0)
    return summary


def cmd_mc(args, ctx, spec, wrap, stream):
    w = _Writer(stream, args.format, ["path", "r", "theta"])
    t = parse_values(args.t)
    if len(t) != 1:
        raise UsageError("mc takes a single --t")
    s = mc_simulate(ctx, t[0], McConfig(paths=args.paths, dt=args.dt, seed=args.seed))
    for i, (r, th) in enumerate(s):
        w.write([i, r, th])
    return {"command": "mc", "rows": w.rows, "aborted": s.aborted, "substeps": s.substeps}


def cmd_table(args, ctx, spec, wrap, stream):
    w = _Writer(stream, args.format, ["n", "t", "r", "theta", "p", "abs_err", "d2", "minus_4t_log_p"])
    pts = _grid(args)

    def one(x):
        t, r, th = x
        v = _kernel(ctx, spec, wrap, t, r, th)
        d2 = sr_distance(ctx, CylPoint(r, th)).d2
        if v.value > 0:
            lp = math.log(v.value)
        elif not ctx.compact:
            lp = log_p_cover(ctx, t, CylPoint(r, th), spec)
        else:
            lp = -math.inf
        return v, d2, -4.0 * t * lp

    res = _pmap(one, pts)
    for (t, r, th), (v, d2, m) in zip(pts, res):
        w.write([ctx.n, t, r, th, v.value, v.abs_err, d2, m])
    return {"command": "table", "rows": w.rows}


COMMAND_TABLE = {
    "kernel": cmd_kernel, "distance": cmd_distance, "asympt": cmd_asympt,
    "verify": cmd_verify, "mc": cmd_mc, "table": cmd_table,
}


def main(argv=None) -> int:
    try:
        return run(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
