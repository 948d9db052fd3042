"""Command-line front end.

Every subcommand writes CSV: a ``#`` header echoing the version and the
configuration, one header row, then rows with 17 significant digits.
Exit codes: 0 success, 2 invalid input, 3 a bound could not be certified.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .asymptotics import ballistic, diffusive, predict_ballistic, predict_near_origin
from .caloric import FiniteFn, convergence_diagnostic, load_z_input, z_diagnostic
from .heat_tree import (
    RadiusRules,
    critical_region,
    heat_tree_quadrature,
    heat_tree_series,
    heat_tree_series_alt,
    region_mass,
)
from .special_fn import log_heat_z_table, rounding_bound
from .spectral import helgason_fourier, spherical_fn, spherical_transform
from .tree_geom import TreeParams, Vertex

EXIT_OK, EXIT_INVALID, EXIT_UNCERTIFIED = 0, 2, 3


class Uncertified(RuntimeError):
    pass


# ------------------------------------------------------------------ helpers


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


class CsvOut:
    def __init__(self, stream, args: argparse.Namespace):
        self.stream = stream
        cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
        stream.write(f"# treeheat {__version__}\n")
        stream.write(f"# config {json.dumps(cfg, sort_keys=True, default=str)}\n")

    def header(self, cols: Sequence[str]):
        self.stream.write(",".join(cols) + "\n")

    def row(self, vals):
        self.stream.write(",".join(_fmt(v) for v in vals) + "\n")


def _threads() -> int:
    raw = os.environ.get("TREEHEAT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"TREEHEAT_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"TREEHEAT_THREADS must be a positive integer, got {raw!r}")
    return n


def _pmap(fn: Callable, items: Sequence) -> list:
    n = min(_threads(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _times(args) -> list[float]:
    if args.t_grid is not None:
        start, factor, count = args.t_grid
        count = int(count)
        if not (start > 0 and factor > 1 and count >= 1):
            raise ValueError("--t-grid needs start > 0, factor > 1, count >= 1")
        ts = [start * factor**k for k in range(count)]
    elif args.t is not None:
        ts = [float(s) for s in args.t.split(",") if s.strip()]
    else:
        raise ValueError("give --t or --t-grid")
    if not ts or any(not (t >= 0 and math.isfinite(t)) for t in ts):
        raise ValueError("times must be finite and non-negative")
    return ts


def _p_value(s: str) -> float:
    return math.inf if s.strip().lower() in ("inf", "infinity") else float(s)


def _complex(s: str) -> complex:
    return complex(s.replace(" ", "").replace("i", "j"))


def _q(args) -> int:
    return TreeParams(args.q).q


# -------------------------------------------------------------- subcommands


def cmd_kernel_z(args, out: CsvOut):
    ts = _times(args)
    out.header(["t", "j", "log_h", "h", "rel_bound"])
    for t in ts:
        tab = log_heat_z_table(args.jmax, t)
        for j, lv in enumerate(tab):
            out.row([t, j, lv, math.exp(lv), rounding_bound(lv)])


def cmd_kernel_tree(args, out: CsvOut):
    q = _q(args)
    ts = _times(args)
    methods = {"series": ["series_ii"], "alt": ["series_i"], "quadrature": ["quadrature"],
               "both": ["series_ii", "quadrature"], "all": ["series_ii", "series_i", "quadrature"]}[args.method]

    def run(t):
        rows, bad = [], []
        for n in range(args.nmax + 1):
            evs = {}
            for m in methods:
                if m == "series_ii":
                    evs[m] = heat_tree_series(n, t, q)
                elif m == "series_i":
                    evs[m] = heat_tree_series_alt(n, t, q)
                else:
                    evs[m] = heat_tree_quadrature(n, t, q)
            for m, ev in evs.items():
                rows.append([n, t, m, ev.value.log_mag if ev.value.sign else -math.inf, ev.rel_bound, ";".join(ev.flags)])
                if m == "quadrature" and "not-converged" in ev.flags:
                    bad.append((n, t, m))
            if "series_ii" in evs and "quadrature" in evs and t > 0:
                a, b = evs["series_ii"], evs["quadrature"]
                if abs(math.expm1(a.log - b.log)) > a.rel_bound + b.rel_bound:
                    bad.append((n, t, "disagree"))
        return rows, bad

    out.header(["n", "t", "method", "log_h", "certified_bound", "flags"])
    bad_all = []
    for rows, bad in _pmap(run, ts):
        for r in rows:
            out.row(r)
        bad_all.extend(bad)
    if bad_all:
        raise Uncertified(f"{len(bad_all)} kernel values outside their bounds, first: {bad_all[0]}")


def cmd_spherical(args, out: CsvOut):
    q = _q(args)
    lam = _complex(args.lam)
    vals = np.asarray(spherical_fn(lam, np.arange(args.nmax + 1), q))
    out.header(["n", "re", "im"])
    for n, v in enumerate(vals):
        out.row([n, float(np.real(v)), float(np.imag(v))])


def cmd_transform(args, out: CsvOut):
    q = _q(args)
    with open(args.f) as fh:
        obj = json.load(fh)
    lams = [_complex(s) for s in args.lam.split(",")]
    out.header(["lambda_re", "lambda_im", "re", "im"])
    if "radial" in obj:
        vals = [float(a) for a in obj["radial"]]
        for lam in lams:
            v = complex(spherical_transform(vals, lam, q))
            out.row([lam.real, lam.imag, v.real, v.imag])
        return
    f = FiniteFn.from_json(obj, q)
    if args.sector is None:
        raise ValueError("non-radial input needs --sector")
    sector = Vertex.parse(args.sector).validate(q)
    for lam in lams:
        v = complex(helgason_fourier(dict(f.entries), lam, sector, q))
        out.row([lam.real, lam.imag, v.real, v.imag])


def cmd_asymptotics(args, out: CsvOut):
    q = _q(args)
    ts = _times(args)

    def run(t):
        if args.regime == "ballistic":
            n = int(math.floor(args.c0 * t))
            pred = predict_ballistic(n, t, ballistic(args.c0), q)
        elif args.regime == "diffusive":
            n = int(math.floor(t**args.exponent))
            pred = predict_ballistic(n, t, diffusive(), q)
        else:
            n = args.n
            pred = predict_near_origin(n, t, q)
        ev = heat_tree_series(n, t, q)
        return [t, n, ev.log, pred.log, math.exp(ev.log - pred.log), ev.rel_bound]

    out.header(["t", "n", "log_empirical", "log_predicted", "ratio", "rel_bound"])
    for r in _pmap(run, ts):
        out.row(r)


def _rules(args) -> RadiusRules:
    return RadiusRules(args.r_exp, args.r1_exp, args.r2_exp, args.r3_log_power)


def cmd_concentrate(args, out: CsvOut):
    q = _q(args)
    ts = _times(args)
    ps = [_p_value(s) for s in args.p.split(",")]
    rules = _rules(args)
    jobs = [(p, t) for p in ps for t in ts]

    def run(job):
        p, t = job
        reg = critical_region(t, p, q, rules)
        m = region_mass(t, p, q, reg)
        return [t, p, reg.inner, reg.outer, m.inside, m.complement, m.tail]

    out.header(["t", "p", "inner", "outer", "region_mass", "complement", "tail_bound"])
    for r in _pmap(run, jobs):
        out.row(r)


def cmd_converge(args, out: CsvOut):
    q = _q(args)
    ts = _times(args)
    p = _p_value(args.p)
    f = FiniteFn.load(args.f, q)
    rows = convergence_diagnostic(
        f, p, ts, variant=args.mass_variant, mass=args.constant_mass, rules=_rules(args), workers=_threads()
    )
    out.header(["t", "E", "E_critical", "E_complement", "mass_sup", "tail_bound"])
    for r in rows:
        out.row([r.t, r.E, r.E_critical, r.E_complement, r.mass_sup, r.tail_bound])
    bad = [r.t for r in rows if not r.certified]
    if bad:
        raise Uncertified(f"tail not certified at t = {bad}")


def cmd_converge_z(args, out: CsvOut):
    ts = _times(args)
    p = _p_value(args.p)
    with open(args.f) as fh:
        f = load_z_input(json.load(fh))
    rows = z_diagnostic(f, p, ts)
    out.header(["t", "E", "u_norm", "tail_bound"])
    for r in rows:
        out.row([r.t, r.E, r.u_norm, r.tail_bound])
    bad = [r.t for r in rows if not r.certified]
    if bad:
        raise Uncertified(f"tail not certified at t = {bad}")


def cmd_selftest(args, out: CsvOut):
    from .selftest import run_checks

    out.header(["check", "passed", "detail"])
    failed = 0
    for name, ok, detail in run_checks(seed=args.seed):
        out.row([name, bool(ok), detail])
        failed += not ok
    if failed:
        raise Uncertified(f"{failed} self-test checks failed")


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="treeheat", description="Heat kernels on homogeneous trees.")
    ap.add_argument("--version", action="version", version=f"treeheat {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, times=True):
        sp.add_argument("--q", type=int, default=2, help="branching number (degree q+1)")
        sp.add_argument("--out", default="-", help="output file, '-' for stdout")
        sp.add_argument("--seed", type=int, default=0)
        if times:
            sp.add_argument("--t", help="comma separated times")
            sp.add_argument("--t-grid", nargs=3, type=float, metavar=("START", "FACTOR", "COUNT"))

    def radii(sp):
        sp.add_argument("--r-exp", type=float, default=0.75)
        sp.add_argument("--r1-exp", type=float, default=0.25)
        sp.add_argument("--r2-exp", type=float, default=0.75)
        sp.add_argument("--r3-log-power", type=float, default=2.0)

    sp = sub.add_parser("kernel-z", help="integer-lattice heat kernel")
    common(sp)
    sp.add_argument("--jmax", type=int, required=True)
    sp.set_defaults(func=cmd_kernel_z)

    sp = sub.add_parser("kernel-tree", help="tree heat kernel by series and/or quadrature")
    common(sp)
    sp.add_argument("--nmax", type=int, required=True)
    sp.add_argument("--method", choices=["series", "alt", "quadrature", "both", "all"], default="series")
    sp.set_defaults(func=cmd_kernel_tree)

    sp = sub.add_parser("spherical", help="spherical function phi_lambda(n)")
    common(sp, times=False)
    sp.add_argument("--lambda", dest="lam", required=True, help="complex, e.g. 0.3+0.1j")
    sp.add_argument("--nmax", type=int, required=True)
    sp.set_defaults(func=cmd_spherical)

    sp = sub.add_parser("transform", help="spherical / Helgason-Fourier transform of JSON input")
    common(sp, times=False)
    sp.add_argument("--f", required=True)
    sp.add_argument("--lambda", dest="lam", required=True, help="comma separated complex values")
    sp.add_argument("--sector", help="sector vertex for non-radial input")
    sp.set_defaults(func=cmd_transform)

    sp = sub.add_parser("asymptotics", help="kernel against its asymptotic formula along a path")
    common(sp)
    sp.add_argument("--regime", choices=["ballistic", "diffusive", "near-origin"], required=True)
    sp.add_argument("--c0", type=float, default=0.3, help="speed of the ballistic path n = c0 t")
    sp.add_argument("--exponent", type=float, default=0.7, help="diffusive path n = t^exponent")
    sp.add_argument("--n", type=int, default=0, help="radius for the near-origin law")
    sp.set_defaults(func=cmd_asymptotics)

    sp = sub.add_parser("concentrate", help="l^p mass of the critical regions")
    common(sp)
    sp.add_argument("--p", required=True, help="comma separated exponents, 'inf' allowed")
    radii(sp)
    sp.set_defaults(func=cmd_concentrate)

    sp = sub.add_parser("converge", help="caloric convergence diagnostic on the tree")
    common(sp)
    sp.add_argument("--p", required=True)
    sp.add_argument("--f", required=True, help="JSON initial datum")
    sp.add_argument("--mass-variant", choices=["boundary", "phi0"])
    sp.add_argument("--constant-mass", type=float, help="replace M_p(f) by a constant (control run)")
    radii(sp)
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("converge-z", help="caloric convergence diagnostic on the integers")
    common(sp)
    sp.add_argument("--p", required=True)
    sp.add_argument("--f", required=True, help="JSON initial datum on Z")
    sp.set_defaults(func=cmd_converge_z)

    sp = sub.add_parser("selftest", help="quick invariant suite")
    common(sp, times=False)
    sp.set_defaults(func=cmd_selftest)
    return ap


def run(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INVALID
    stream = sys.stdout if args.out == "-" else None
    try:
        if stream is None:
            stream = open(args.out, "w", newline="")
        try:
            args.func(args, CsvOut(stream, args))
        finally:
            if stream is not sys.stdout:
                stream.close()
            else:
                stream.flush()
    except Uncertified as e:
        print(f"treeheat: certification failure: {e}", file=sys.stderr)
        return EXIT_UNCERTIFIED
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as e:
        print(f"treeheat: invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
