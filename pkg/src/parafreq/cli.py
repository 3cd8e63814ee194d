"""Command-line front end: ``parafreq {simulate,barenblatt,spectral,verify,sweep}``."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import experiments as ex
from .core import ParameterError
from .diagnostics import SeriesError


def _floats(text: str) -> list:
    return [float(v) for v in text.replace(",", " ").split()]


def cmd_simulate(args) -> int:
    cfg = ex.ExperimentConfig.load(args.config)
    if args.series:
        cfg.series_path = args.series
    if args.report:
        cfg.report_path = args.report
    rep = ex.run_simulate(cfg)
    sys.stdout.write(rep.to_text())
    if rep.error:
        print(f"parafreq: {rep.error}", file=sys.stderr)
    return rep.exit_code


def cmd_barenblatt(args) -> int:
    ts = [t for group in args.t for t in group]
    rows = ex.run_barenblatt(args.n, args.p, args.q, args.C, ts, cells=args.cells, r_max=args.r_max)
    text = ex.rows_to_csv(ex.BARENBLATT_COLUMNS, rows)
    _emit(text, args.output)
    return ex.EXIT_PASS


def cmd_spectral(args) -> int:
    amps = [a for group in args.modes for a in group]
    lo, hi = args.t_range
    if not lo < hi < 0:
        raise ParameterError("--t-range needs lo < hi < 0")
    rows, growth = ex.run_spectral(args.L, amps, lo, hi, args.samples)
    text = ex.rows_to_csv(ex.SPECTRAL_COLUMNS, rows)
    _emit(text, args.output)
    print(f"growth = {growth}", file=sys.stderr if args.output is None else sys.stdout)
    return ex.EXIT_PASS


def cmd_verify(args) -> int:
    series = ex.read_series(args.series, args.p, args.q, order=args.order, dt=args.dt)
    if args.C is not None:
        series.bound = np.full(len(series), args.C)
    checks = [c for group in args.checks for c in group.split(",") if c]
    bad = [c for c in checks if c not in ex.KNOWN_CHECKS]
    if bad:
        raise ex.ConfigError(f"unknown check names: {', '.join(bad)}")
    tols = {}
    if args.slack is not None:
        tols["slack"] = args.slack
    if args.atol is not None:
        tols["atol"] = args.atol
    verdicts = ex.run_checks(checks, series, tols)
    rep = ex.VerdictReport({"series": args.series, "p": ex.fmt(args.p), "q": ex.fmt(args.q)}, verdicts, None)
    sys.stdout.write(rep.to_text())
    return rep.exit_code


def cmd_sweep(args) -> int:
    template = ex.load_kv(args.template)
    axes = [ex.parse_axis(a) for a in args.axis]
    text, code = ex.run_sweep(template, axes, args.out, workers=args.workers, delta_nonneg=args.delta_nonneg)
    sys.stdout.write(text)
    return code


def _emit(text: str, path) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="parafreq", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one configured simulation and its checks")
    s.add_argument("config")
    s.add_argument("--series", help="override output.series")
    s.add_argument("--report", help="override output.report")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("barenblatt", help="closed-form Barenblatt table")
    b.add_argument("--n", type=int, default=1)
    b.add_argument("--p", type=float, required=True)
    b.add_argument("--q", type=float, required=True)
    b.add_argument("--C", type=float, default=1.0)
    b.add_argument("--t", type=_floats, nargs="+", required=True, help="times (space or comma separated)")
    b.add_argument("--cells", type=int, default=None, help="sampling cells (default: sized to the profile core)")
    b.add_argument("--r-max", type=float, default=None)
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_barenblatt)

    sp = sub.add_parser("spectral", help="ancient heat-equation solutions on an interval")
    sp.add_argument("--L", type=float, default=np.pi)
    sp.add_argument("--modes", type=_floats, nargs="+", required=True, help="amplitudes a_1, a_2, ...")
    sp.add_argument("--t-range", type=float, nargs=2, required=True, metavar=("LO", "HI"))
    sp.add_argument("--samples", type=int, default=50)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_spectral)

    v = sub.add_parser("verify", help="run checks on an existing series CSV")
    v.add_argument("series")
    v.add_argument("--checks", nargs="+", required=True)
    v.add_argument("--p", type=float, required=True)
    v.add_argument("--q", type=float, required=True)
    v.add_argument("--order", type=int, default=4, help="integrator order used for default tolerances")
    v.add_argument("--dt", type=float, default=None, help="step size (default: largest record spacing)")
    v.add_argument("--C", type=float, default=None, help="constant perturbation bound")
    v.add_argument("--slack", type=float, default=None)
    v.add_argument("--atol", type=float, default=None)
    v.set_defaults(func=cmd_verify)

    w = sub.add_parser("sweep", help="run a config template over axis grids")
    w.add_argument("template")
    w.add_argument("--axis", action="append", required=True, help="key=v1,v2 or key=lo..hi")
    w.add_argument("--out", default="sweep_out")
    w.add_argument("--workers", type=int, default=None, help="default: PARAFREQ_THREADS or CPU count")
    w.add_argument("--delta-nonneg", action="store_true", help="skip cells with q(p-1)-1 < 0")
    w.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ex.ConfigError, ParameterError, SeriesError, RuntimeError, OSError) as exc:
        print(f"parafreq: error: {exc}", file=sys.stderr)
        return ex.EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
