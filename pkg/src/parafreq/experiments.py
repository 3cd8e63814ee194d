"""Batch runs: flat key-value configs, series CSV files and verdict reports."""

from __future__ import annotations

import csv
import io
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from . import initial
from .barenblatt import (barenblatt_A, barenblatt_I, barenblatt_N, barenblatt_eval, barenblatt_params,
                         core_width, pde_residual, truncation_radius)
from .core import DomainSpec, ParameterError, ProblemParams, WeightSpec, make_grid
from .diagnostics import (FrequencySeries, SeriesError, Verdict, check_convexity, check_identity_I_prime,
                          check_monotonicity, check_perturbed_energy_bound, energy_I, extinction_lower_bound,
                          lower_bound_I, vanishing_order, almost_monotonicity_check, make_record)
from .evolution import NewtonConfig, PerturbationSpec, SchemeConfig, evolve
from .spectral import SpectralSolution, growth_classify, spectral_I, spectral_N

SERIES_COLUMNS = ("t", "I", "D", "N", "N_G", "extinct_flag")
UNDEFINED = "undefined"

EXIT_PASS = 0
EXIT_VERDICT = 1
EXIT_ERROR = 2


class ConfigError(ValueError):
    pass


def fmt(x) -> str:
    """17 significant digits, enough to round-trip a double."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


# ---------------------------------------------------------------------------
# configuration


def parse_kv(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment. Later keys win."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def load_kv(path: str) -> dict:
    with open(path) as fh:
        return parse_kv(fh.read())


KNOWN_CHECKS = (
    "identity_I_prime",
    "monotonicity",
    "convexity",
    "lower_bound_I",
    "extinction_bound",
    "vanishing_order",
    "almost_monotonicity",
    "perturbed_energy_bound",
    "oracle_N",
)

_DEFAULTS = {
    "p": "2",
    "q": "1",
    "domain.kind": "interval",
    "domain.left": "0",
    "domain.right": "1",
    "domain.radius": "1",
    "domain.n": "1",
    "domain.cells": "64",
    "weight.kind": "zero",
    "weight.a": "0",
    "scheme.kind": "rk4",
    "scheme.dt": "adaptive",
    "scheme.cfl_safety": "0.9",
    "scheme.dt_max": "inf",
    "initial.kind": "random",
    "initial.t0": "1",
    "initial.C": "1",
    "initial.k": "1",
    "initial.smoothness": "3",
    "initial.amplitude": "1",
    "initial.center": "0.5",
    "initial.width": "0.1",
    "t_span": "0, 0.05",
    "record_every": "100",
    "checks": "",
    "seed": "0",
    "output.series": "series.csv",
    "output.report": "report.txt",
    "report.timing": "false",
}
_KNOWN_KEYS = set(_DEFAULTS) | {
    "initial.table", "initial.seed", "perturbation.c", "perturbation.C", "newton.max_iter", "newton.abs_tol",
    "newton.rel_tol", "newton.damping_min", "scheme.eps_reg", "checks.atol", "checks.ctol", "checks.slack",
    "checks.vanishing_a", "checks.oracle_tol", "extinction_floor",
}


def _float(d, key) -> float:
    raw = d[key]
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: not a number: {raw!r}") from None


def _int(d, key) -> int:
    v = _float(d, key)
    if v != int(v):
        raise ConfigError(f"{key}: not an integer: {d[key]!r}")
    return int(v)


def _bool(d, key) -> bool:
    v = d[key].lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: not a boolean: {d[key]!r}")


@dataclass
class ExperimentConfig:
    params: ProblemParams
    scheme: SchemeConfig
    initial: dict
    t_span: tuple
    record_every: int
    checks: tuple
    seed: int
    series_path: Optional[str]
    report_path: Optional[str]
    perturbation: Optional[tuple] = None
    tolerances: dict = field(default_factory=dict)
    timing: bool = False
    extinction_floor: float = 1e-12
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict, base_dir: str = ".") -> "ExperimentConfig":
        unknown = sorted(set(d) - _KNOWN_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        full = dict(_DEFAULTS)
        full.update(d)
        try:
            kind = full["domain.kind"]
            cells = _int(full, "domain.cells")
            if kind == "interval":
                dom = DomainSpec.interval(_float(full, "domain.left"), _float(full, "domain.right"), cells)
            else:
                dom = DomainSpec(kind, cells, radius=_float(full, "domain.radius"), n=_int(full, "domain.n"))
            wk = full["weight.kind"]
            if wk == "zero":
                weight = WeightSpec.zero()
            elif wk == "quadratic":
                weight = WeightSpec.quadratic(_float(full, "weight.a"))
            else:
                raise ConfigError(f"weight.kind: unsupported {wk!r} (zero or quadratic)")
            params = ProblemParams(_float(full, "p"), _float(full, "q"), dom, weight)
            dt = None if full["scheme.dt"] == "adaptive" else _float(full, "scheme.dt")
            newton = NewtonConfig(**{k.split(".", 1)[1]: (_int(full, k) if k == "newton.max_iter" else _float(full, k))
                                     for k in full if k.startswith("newton.")})
            scheme = SchemeConfig(full["scheme.kind"], dt=dt, cfl_safety=_float(full, "scheme.cfl_safety"),
                                  dt_max=_float(full, "scheme.dt_max"),
                                  eps_reg=_float(full, "scheme.eps_reg") if "scheme.eps_reg" in full else 0.0,
                                  newton=newton)
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None
        span = [s for s in full["t_span"].replace(",", " ").split()]
        if len(span) != 2:
            raise ConfigError("t_span: expected 'a, b'")
        t_span = (float(span[0]), float(span[1]))
        if not t_span[1] > t_span[0]:
            raise ConfigError("t_span: need a < b")
        checks = tuple(c.strip() for c in full["checks"].split(",") if c.strip())
        bad = [c for c in checks if c not in KNOWN_CHECKS]
        if bad:
            raise ConfigError(f"unknown check names: {', '.join(bad)}")
        ik = full["initial.kind"]
        if ik not in ("barenblatt", "eigenmode", "random", "bump", "table", "zero"):
            raise ConfigError(f"initial.kind: unknown {ik!r}")
        if ik == "table" and "initial.table" not in full:
            raise ConfigError("initial.table is required for table data")
        pert = None
        if "perturbation.c" in full or "perturbation.C" in full:
            c = _float(full, "perturbation.c") if "perturbation.c" in full else 0.0
            C = _float(full, "perturbation.C") if "perturbation.C" in full else abs(c)
            if abs(c) > C:
                raise ConfigError("perturbation: |c| exceeds the bound C")
            pert = (c, C)
        tols = {k.split(".", 1)[1]: _float(full, k) for k in ("checks.atol", "checks.ctol", "checks.slack",
                                                              "checks.vanishing_a", "checks.oracle_tol") if k in full}
        record_every = _int(full, "record_every")
        if record_every < 1:
            raise ConfigError("record_every must be >= 1")

        def path(key):
            v = full[key]
            if v.lower() in ("", "none", "-"):
                return None
            return v if os.path.isabs(v) else os.path.join(base_dir, v)

        init = {k.split(".", 1)[1]: v for k, v in full.items() if k.startswith("initial.")}
        if "table" in init and not os.path.isabs(init["table"]):
            init["table"] = os.path.join(base_dir, init["table"])
        return cls(params, scheme, init, t_span, record_every, checks, _int(full, "seed"),
                   path("output.series"), path("output.report"), pert, tols, _bool(full, "report.timing"),
                   _float(full, "extinction_floor") if "extinction_floor" in full else 1e-12, dict(d))

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        return cls.from_dict(load_kv(path), os.path.dirname(os.path.abspath(path)))


def build_initial(cfg: ExperimentConfig, grid) -> np.ndarray:
    ini = cfg.initial
    kind = ini["kind"]
    amp = float(ini["amplitude"])
    if kind == "zero":
        return np.zeros(grid.cells)
    if kind == "eigenmode":
        return initial.eigenmode(grid, int(float(ini["k"])), amp)
    if kind == "bump":
        return initial.bump(grid, float(ini["center"]), float(ini["width"]), amp)
    if kind == "random":
        seed = int(float(ini.get("seed", cfg.seed)))
        return initial.random_sign_changing(grid, seed, float(ini["smoothness"]), amp)
    if kind == "barenblatt":
        return initial.barenblatt(grid, cfg.params.p, cfg.params.q, float(ini["t0"]), float(ini["C"]))
    xs, vals = initial.load_table(ini["table"])
    return initial.from_table(grid, xs, vals)


# ---------------------------------------------------------------------------
# series CSV


def series_to_csv(series: FrequencySeries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SERIES_COLUMNS)
    ext = series.extinction_time
    for r in series.records:
        flag = 1 if (ext is not None and r.t >= ext) else 0
        w.writerow([fmt(r.t), fmt(r.I), fmt(r.D),
                    fmt(r.N) if r.defined else UNDEFINED,
                    fmt(r.N_G) if r.defined else UNDEFINED, flag])
    return buf.getvalue()


def write_series(series: FrequencySeries, path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(series_to_csv(series))


def read_series(path: str, p: float, q: float, order: int = 4, dt: Optional[float] = None) -> FrequencySeries:
    """Read a series CSV back; ``N`` and ``N_G`` are recomputed from ``I`` and ``D``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != SERIES_COLUMNS:
        raise ConfigError(f"{path}: header must be {','.join(SERIES_COLUMNS)}")
    recs, ext = [], None
    for row in rows[1:]:
        t, I, D = float(row[0]), float(row[1]), float(row[2])
        recs.append(make_record(t, I, D, p, q))
        if row[5] == "1" and ext is None:
            ext = t
    ts = np.array([r.t for r in recs])
    if dt is None:
        dt = float(np.max(np.diff(ts))) if ts.size > 1 else 0.0
    return FrequencySeries(recs, p, q, order=order, dt=dt, extinction_time=ext)


# ---------------------------------------------------------------------------
# checks


def run_checks(names, series: FrequencySeries, tolerances: Optional[dict] = None, oracle=None) -> list:
    """Evaluate named checks; checks that cannot apply produce a failing verdict with NaN violation."""
    tolerances = tolerances or {}
    atol = tolerances.get("atol")
    ctol = tolerances.get("ctol")

    def tol(derivative=False):
        if atol is None and ctol is None:
            return None
        return series.tolerance(atol=1e-6 if atol is None else atol, ctol=10.0 if ctol is None else ctol,
                                derivative=derivative)

    out = []
    for name in names:
        try:
            if name == "identity_I_prime":
                out.append(check_identity_I_prime(series, tol(True)))
            elif name == "monotonicity":
                out.extend(check_monotonicity(series, tol=tol()))
            elif name == "convexity":
                out.append(check_convexity(series, tol=tol()))
            elif name == "lower_bound_I":
                out.append(lower_bound_I(series, 0, tolerances.get("slack")))
            elif name == "extinction_bound":
                out.append(extinction_verdict(series))
            elif name == "vanishing_order":
                out.append(vanishing_order(series, tolerances.get("vanishing_a", series.t[0]))[1])
            elif name == "almost_monotonicity":
                out.extend(almost_monotonicity_check(series, tol=tol(True)))
            elif name == "perturbed_energy_bound":
                out.append(check_perturbed_energy_bound(series, tolerances.get("slack", 1e-6)))
            elif name == "oracle_N":
                if oracle is None:
                    raise SeriesError("oracle_N needs Barenblatt initial data")
                out.append(oracle_frequency_verdict(series, oracle, tolerances.get("oracle_tol", 0.02)))
            else:
                raise ConfigError(f"unknown check {name!r}")
        except (SeriesError, ParameterError) as exc:
            out.append(Verdict(f"{name}: {exc}", False, math.nan, math.nan, math.nan))
    return out


def extinction_verdict(series: FrequencySeries) -> Verdict:
    """Measured extinction time must not precede ``b0``; the run end counts as a lower estimate."""
    rec = series.records[0]
    delta = series.delta
    if not delta < 0:
        raise SeriesError("extinction bound applies to delta < 0")
    b = series.t[-1]
    b0 = extinction_lower_bound(rec.N, delta, rec.t, b)
    t_ext = series.extinction_time if series.extinct else b
    span = b0 - rec.t
    return Verdict.judge("extinction_bound", (b0 - t_ext) / span, t_ext, 0.0)


def oracle_frequency_verdict(series: FrequencySeries, bp, rel_tol: float, window: float = 0.2) -> Verdict:
    """Relative deviation of ``N`` from the Barenblatt closed form away from both ends of the run."""
    t = series.t
    a, b = t[0], t[-1]
    m = (t >= a + window * (b - a)) & (t <= b - window * (b - a)) & series.defined
    if not m.any():
        raise SeriesError("no records inside the comparison window")
    exact = -bp.frequency_constant / t[m]
    rel = np.abs(series.N[m] / exact - 1.0)
    k = int(np.argmax(rel))
    return Verdict.judge("oracle_N", float(rel[k]), float(t[m][k]), rel_tol)


# ---------------------------------------------------------------------------
# simulate


@dataclass
class VerdictReport:
    config: dict
    verdicts: list
    series_path: Optional[str]
    trivial: bool = False
    error: Optional[str] = None
    extinction_time: Optional[float] = None
    wall_time: Optional[float] = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(v.passed for v in self.verdicts)

    @property
    def exit_code(self) -> int:
        if self.error is not None:
            return EXIT_ERROR
        return EXIT_PASS if self.passed else EXIT_VERDICT

    def to_text(self) -> str:
        lines = ["# parafreq verdict report"]
        for k in sorted(self.config):
            v = self.config[k]
            # paths are echoed by name so reports do not depend on the output directory
            lines.append(f"config.{k} = {os.path.basename(v) if k.startswith('output.') else v}")
        lines.append(f"trivial = {fmt(self.trivial)}")
        if self.extinction_time is not None:
            lines.append(f"extinction_time = {fmt(self.extinction_time)}")
        if self.series_path:
            lines.append(f"series = {os.path.basename(self.series_path)}")
        for v in self.verdicts:
            key = v.name.split(":", 1)[0]
            lines.append(f"verdict.{key}.passed = {fmt(v.passed)}")
            lines.append(f"verdict.{key}.worst_violation = {fmt(v.worst_violation)}")
            lines.append(f"verdict.{key}.location = {fmt(v.location)}")
            lines.append(f"verdict.{key}.tolerance = {fmt(v.tolerance)}")
            if v.skipped:
                lines.append(f"verdict.{key}.skipped = {v.skipped}")
            if ":" in v.name:
                lines.append(f"verdict.{key}.note = {v.name.split(':', 1)[1].strip()}")
        if self.error is not None:
            lines.append(f"error = {self.error}")
        lines.append(f"version.parafreq = {__version__}")
        lines.append(f"version.numpy = {np.__version__}")
        lines.append(f"version.python = {platform.python_version()}")
        if self.wall_time is not None:
            lines.append(f"wall_time = {self.wall_time:.3f}")
        lines.append(f"result = {'pass' if self.passed else ('error' if self.error else 'fail')}")
        return "\n".join(lines) + "\n"


def simulate(cfg: ExperimentConfig):
    """Run one configured simulation; returns ``(trajectory, series, oracle)``."""
    grid = make_grid(cfg.params.domain, cfg.params.weight)
    u0 = build_initial(cfg, grid)
    pert = PerturbationSpec.constant(*cfg.perturbation) if cfg.perturbation else None
    oracle = None
    if cfg.initial["kind"] == "barenblatt":
        oracle = barenblatt_params(cfg.params.n, cfg.params.p, cfg.params.q, float(cfg.initial["C"]))
    traj, series = evolve(u0, cfg.t_span, cfg.params, grid, cfg.scheme, pert, cfg.record_every,
                          extinction_floor=cfg.extinction_floor)
    return traj, series, oracle


def run_simulate(cfg: ExperimentConfig) -> VerdictReport:
    """Simulate, write the series CSV and report, and return the report."""
    start = time.perf_counter()
    try:
        traj, series, oracle = simulate(cfg)
    except (ParameterError, ConfigError, RuntimeError, FloatingPointError) as exc:
        rep = VerdictReport(cfg.raw, [], None, error=f"{type(exc).__name__}: {exc}")
        _write_report(cfg, rep)
        return rep
    trivial = series.records[0].I == 0.0
    if trivial:
        names = [n for n in cfg.checks if n == "identity_I_prime"]
    else:
        names = list(cfg.checks)
    verdicts = run_checks(names, series, cfg.tolerances, oracle)
    if cfg.series_path:
        write_series(series, cfg.series_path)
    rep = VerdictReport(cfg.raw, verdicts, cfg.series_path, trivial=trivial,
                        extinction_time=series.extinction_time,
                        wall_time=time.perf_counter() - start if cfg.timing else None)
    _write_report(cfg, rep)
    return rep


def _write_report(cfg, rep):
    if cfg.report_path:
        with open(cfg.report_path, "w") as fh:
            fh.write(rep.to_text())


# ---------------------------------------------------------------------------
# barenblatt and spectral tables


BARENBLATT_COLUMNS = ("t", "I_closed", "I_quadrature", "N_closed", "residual_norm")


def run_barenblatt(n: int, p: float, q: float, C: float, t_list, cells: Optional[int] = None,
                   r_max: Optional[float] = None, residual_cells: int = 256) -> list:
    """Rows of closed-form and sampled-profile quantities at each time.

    ``I_quadrature`` integrates the sampled profile on a truncated radial grid
    fine enough to resolve the profile core at the earliest time;
    ``residual_norm`` is the interior max-norm of the discrete PDE residual on a
    coarser grid covering the core.
    """
    bp = barenblatt_params(n, p, q, C)
    ts = [float(t) for t in t_list]
    if not ts or any(t <= 0 for t in ts):
        raise ParameterError("times must be positive")
    A = barenblatt_A(bp)
    R = r_max if r_max is not None else truncation_radius(bp, max(ts), t_min=min(ts))
    if cells is None:
        dx = core_width(bp) * min(ts) ** (1.0 / bp.beta) / 64.0
        cells = int(min(max(4096, math.ceil(R / dx)), 4_000_000))
    fine = make_grid(DomainSpec.whole_space(R, cells, n))
    R_res = R if bp.regime == "slow" else min(R, 20.0 * core_width(bp) * max(ts) ** (1.0 / bp.beta))
    coarse = make_grid(DomainSpec.whole_space(R_res, residual_cells, n))
    rows = []
    for t in ts:
        u = barenblatt_eval(fine.cell_centers, t, bp)
        rows.append((t, barenblatt_I(t, bp, A), energy_I(u, fine, q), barenblatt_N(t, bp),
                     pde_residual(bp, coarse, t, refine=False)[0]))
    return rows


def rows_to_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(x) if not isinstance(x, str) else x for x in row])
    return buf.getvalue()


SPECTRAL_COLUMNS = ("t", "I", "N")


def run_spectral(L: float, amplitudes, t_lo: float, t_hi: float, samples: int = 50):
    sol = SpectralSolution.from_amplitudes(amplitudes, L=L, horizon=abs(t_lo))
    ts = np.linspace(t_lo, t_hi, samples)
    if sol.trivial:
        rows = [(t, 0.0, UNDEFINED) for t in ts]
    else:
        rows = [(t, spectral_I(sol, t), spectral_N(sol, t)) for t in ts]
    return rows, growth_classify(sol)


# ---------------------------------------------------------------------------
# sweeps


def parse_axis(spec: str) -> tuple[str, list]:
    """``key=v1,v2,...`` or ``key=lo..hi`` (inclusive integer range)."""
    if "=" not in spec:
        raise ConfigError(f"axis {spec!r}: expected key=values")
    key, vals = (s.strip() for s in spec.split("=", 1))
    key = {"resolution": "domain.cells", "cells": "domain.cells"}.get(key, key)
    if ".." in vals:
        lo, hi = vals.split("..", 1)
        values = [str(v) for v in range(int(lo), int(hi) + 1)]
    else:
        values = [v.strip() for v in vals.split(",") if v.strip()]
    if not values:
        raise ConfigError(f"axis {key}: no values")
    return key, values


def _cell_label(index: int, overrides: dict) -> str:
    parts = "_".join(f"{k.split('.')[-1]}={v}" for k, v in overrides.items())
    return f"cell{index:04d}_{parts}" if parts else f"cell{index:04d}"


def _run_cell(args):
    index, template, overrides, out_dir = args
    d = dict(template)
    d.update(overrides)
    label = _cell_label(index, overrides)
    d["output.series"] = os.path.join(out_dir, f"{label}.csv")
    d["output.report"] = os.path.join(out_dir, f"{label}.report")
    try:
        cfg = ExperimentConfig.from_dict(d)
    except (ConfigError, ParameterError) as exc:
        return index, label, overrides, None, f"ConfigError: {exc}"
    rep = run_simulate(cfg)
    return index, label, overrides, [(v.name.split(":", 1)[0], v.passed) for v in rep.verdicts], rep.error


def sweep_cells(template: dict, axes, delta_nonneg: bool = False) -> list:
    import itertools

    keys = [k for k, _ in axes]
    cells = []
    for combo in itertools.product(*(vals for _, vals in axes)):
        ov = dict(zip(keys, combo))
        if delta_nonneg:
            merged = dict(_DEFAULTS)
            merged.update(template)
            merged.update(ov)
            if float(merged["q"]) * (float(merged["p"]) - 1.0) - 1.0 < -1e-12:
                continue
        cells.append(ov)
    return cells


def run_sweep(template: dict, axes, out_dir: str, workers: Optional[int] = None,
              delta_nonneg: bool = False) -> tuple[str, int]:
    """Run every axis combination; returns ``(aggregate_csv_text, exit_code)``.

    Cells execute in a process pool sized by ``workers`` (default from
    ``PARAFREQ_THREADS``). Results are assembled in cell order after all finish.
    """
    os.makedirs(out_dir, exist_ok=True)
    cells = sweep_cells(template, axes, delta_nonneg)
    if workers is None:
        workers = int(os.environ.get("PARAFREQ_THREADS", "0") or 0) or (os.cpu_count() or 1)
    jobs = [(i, template, ov, out_dir) for i, ov in enumerate(cells)]
    if workers <= 1 or len(jobs) <= 1:
        results = [_run_cell(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_cell, jobs))
    results.sort(key=lambda r: r[0])

    keys = [k for k, _ in axes]
    check_names = []
    for r in results:
        for name, _ in r[3] or []:
            if name not in check_names:
                check_names.append(name)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cell", *keys, "status", *check_names])
    tallies = {n: [0, 0] for n in check_names}
    any_error = any_fail = False
    for index, label, ov, verdicts, error in results:
        vmap = dict(verdicts or [])
        if error:
            status = "error"
            any_error = True
        elif all(vmap.values()):
            status = "pass"
        else:
            status = "fail"
            any_fail = True
        row = [label, *(ov[k] for k in keys), status]
        for n in check_names:
            if n in vmap:
                tallies[n][1] += 1
                tallies[n][0] += int(vmap[n])
                row.append(fmt(vmap[n]))
            else:
                row.append("")
        w.writerow(row)
    w.writerow([])
    w.writerow(["check", "passed", "total", "pass_rate"])
    for n, (ok, tot) in tallies.items():
        w.writerow([n, ok, tot, fmt(ok / tot if tot else math.nan)])
    text = buf.getvalue()
    with open(os.path.join(out_dir, "aggregate.csv"), "w", newline="") as fh:
        fh.write(text)
    code = EXIT_ERROR if any_error else (EXIT_VERDICT if any_fail else EXIT_PASS)
    return text, code
