"""Weighted energies, parabolic frequencies and inequality verdicts along runs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .core import Grid, ParameterError, as_values, delta_of, signed_power
from .operator import _face_gradient

# default tolerance model: tol = ATOL + CTOL * dt**r
ATOL = 1e-6
CTOL = 10.0


class SeriesError(ValueError):
    """A frequency series cannot support the requested check."""


# ---------------------------------------------------------------------------
# energies


def energy_I(u, grid: Grid, q: float) -> float:
    """``sum |u|^{q+1} w``."""
    u = as_values(u, grid)
    return float(np.dot(np.abs(u) ** (q + 1.0), grid.cell_weights))


def dissipation_D(u, grid: Grid, p: float, q: float) -> float:
    """``-sum |grad(u^q)|^p w_f`` with the operator's own face weights."""
    u = as_values(u, grid)
    g = _face_gradient(signed_power(u, q) if q != 1.0 else u, grid)
    return -float(np.dot(np.abs(g) ** p, grid.face_weights))


@dataclass(frozen=True)
class FrequencyRecord:
    """``(t, I, D, N, N_G)``. ``N`` and ``N_G`` are ``None`` when ``I == 0``."""

    t: float
    I: float
    D: float
    N: Optional[float]
    N_G: Optional[float]

    @property
    def defined(self) -> bool:
        return self.N is not None


def make_record(t: float, I: float, D: float, p: float, q: float) -> FrequencyRecord:
    if I > 0.0:
        return FrequencyRecord(t, I, D, D / I, D / I ** (p * q / (q + 1.0)))
    return FrequencyRecord(t, I, D, None, None)


def frequency(u, grid: Grid, p: float, q: float, t: float = 0.0) -> FrequencyRecord:
    """Frequency record of ``u``; accepts a ProblemParams in place of ``p``."""
    if hasattr(p, "p"):
        p, q = p.p, p.q
    t = getattr(u, "time", t)
    return make_record(t, energy_I(u, grid, q), dissipation_D(u, grid, p, q), p, q)


@dataclass
class FrequencySeries:
    """Time-ordered frequency records of one run.

    ``order`` and ``dt`` describe the integrator that produced the run and feed
    the default tolerances. ``bound`` holds ``C(t)`` per record for perturbed
    runs.
    """

    records: list
    p: float
    q: float
    order: int = 4
    dt: float = 0.0
    bound: Optional[np.ndarray] = None
    extinction_time: Optional[float] = None

    def __post_init__(self):
        ts = [r.t for r in self.records]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise SeriesError("record times must be strictly increasing")
        if self.bound is not None:
            self.bound = np.asarray(self.bound, dtype=float)
            if self.bound.shape != (len(self.records),):
                raise SeriesError("perturbation bound must have one value per record")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def delta(self) -> float:
        return delta_of(self.p, self.q)

    @property
    def extinct(self) -> bool:
        return self.extinction_time is not None

    @property
    def t(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def I(self) -> np.ndarray:
        return np.array([r.I for r in self.records])

    @property
    def D(self) -> np.ndarray:
        return np.array([r.D for r in self.records])

    @property
    def defined(self) -> np.ndarray:
        return np.array([r.defined for r in self.records], dtype=bool)

    @property
    def N(self) -> np.ndarray:
        """Frequency values, NaN where undefined; use :attr:`defined` to mask."""
        return np.array([r.N if r.defined else np.nan for r in self.records])

    @property
    def N_G(self) -> np.ndarray:
        return np.array([r.N_G if r.defined else np.nan for r in self.records])

    @classmethod
    def from_arrays(cls, t, I, D, p, q, **kw) -> "FrequencySeries":
        recs = [make_record(float(a), float(b), float(c), p, q) for a, b, c in zip(t, I, D)]
        return cls(recs, p, q, **kw)

    def tolerance(self, atol: float = ATOL, ctol: float = CTOL, derivative: bool = False) -> float:
        """``atol + ctol * dt**r``; central-difference checks cap ``r`` at 2."""
        r = min(self.order, 2) if derivative else self.order
        return atol + ctol * self.dt**r


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    worst_violation: float
    location: float
    tolerance: float
    skipped: int = 0

    @classmethod
    def judge(cls, name, violation, location, tol, skipped=0) -> "Verdict":
        violation = float(max(violation, 0.0))
        return cls(name, violation <= tol, violation, float(location), float(tol), int(skipped))


# ---------------------------------------------------------------------------
# finite-difference helpers


def central_derivative(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Second-order three-point derivative at ``t[1:-1]`` on a non-uniform grid."""
    h0 = t[1:-1] - t[:-2]
    h1 = t[2:] - t[1:-1]
    return (
        -h1 / (h0 * (h0 + h1)) * y[:-2]
        + (h1 - h0) / (h0 * h1) * y[1:-1]
        + h0 / (h1 * (h0 + h1)) * y[2:]
    )


def five_point_derivative(t: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fourth-order five-point derivative on a non-uniform grid.

    Returns the derivative at ``t[2:-2]`` and the matching indices. Weights
    come from the local Vandermonde system in offsets scaled to unit size.
    """
    idx = np.arange(2, t.size - 2)
    off = np.stack([t[idx + k] - t[idx] for k in range(-2, 3)], axis=1)
    h = np.max(np.abs(off), axis=1, keepdims=True)
    x = off / h
    V = np.stack([x**k for k in range(5)], axis=1)
    e1 = np.zeros((idx.size, 5, 1))
    e1[:, 1, 0] = 1.0
    w = np.linalg.solve(V, e1)[..., 0] / h
    Y = np.stack([y[idx + k] for k in range(-2, 3)], axis=1)
    return np.sum(w * Y, axis=1), idx


def _worst(viol: np.ndarray, t: np.ndarray, scale: float):
    if viol.size == 0:
        return 0.0, float("nan")
    k = int(np.argmax(viol))
    return float(viol[k]) / (scale if scale > 0 else 1.0), float(t[k])


def _longest_defined_run(series: FrequencySeries) -> tuple[np.ndarray, int]:
    mask = series.defined
    idx = np.flatnonzero(mask)
    return idx, int((~mask).sum())


def _need(series: FrequencySeries, count: int) -> None:
    if len(series) < count:
        raise SeriesError(f"need at least {count} records, got {len(series)}")


# ---------------------------------------------------------------------------
# checks


def check_identity_I_prime(series: FrequencySeries, tol: Optional[float] = None, stencil: int = 5) -> Verdict:
    """``dI/dt = (q+1) D`` at interior records, relative to ``max |(q+1) D|``.

    ``stencil`` selects the 3-point (second order) or 5-point (fourth order)
    derivative of the recorded ``I``. The 5-point form keeps the estimator's
    own truncation error below the integrator error on stiff transients.
    """
    if stencil not in (3, 5):
        raise ParameterError("stencil must be 3 or 5")
    _need(series, stencil)
    t, I, D = series.t, series.I, series.D
    if stencil == 3:
        dI, idx = central_derivative(t, I), np.arange(1, t.size - 1)
    else:
        dI, idx = five_point_derivative(t, I)
    target = (series.q + 1.0) * D[idx]
    viol = np.abs(dI - target)
    scale = float(np.max(np.abs((series.q + 1.0) * D)))
    if tol is None:
        tol = series.tolerance(derivative=True)
    if scale == 0.0:
        return Verdict.judge("identity_I_prime", float(viol.max()), t[idx[0]], tol)
    w, loc = _worst(viol, t[idx], scale)
    return Verdict.judge("identity_I_prime", w, loc, tol)


def _derivative_scale(t, N, dN, delta) -> float:
    span = t[-1] - t[0]
    return max(
        float(np.max(np.abs(dN))) if dN.size else 0.0,
        abs(delta) * float(np.max(N**2)),
        float(np.max(np.abs(N))) / span if span > 0 else 0.0,
    )


def check_monotonicity(series: FrequencySeries, delta: Optional[float] = None, tol: Optional[float] = None) -> list:
    """Verdicts for ``N_G`` non-decreasing, ``N' >= delta N^2`` and, if ``delta >= 0``, ``N`` non-decreasing.

    Undefined records (after extinction) are skipped and counted.
    """
    _need(series, 3)
    delta = series.delta if delta is None else delta
    idx, skipped = _longest_defined_run(series)
    if idx.size < 3:
        raise SeriesError("fewer than 3 records with defined frequency")
    t = series.t[idx]
    N = series.N[idx]
    NG = series.N_G[idx]
    tol_step = series.tolerance() if tol is None else tol
    tol_der = series.tolerance(derivative=True) if tol is None else tol

    out = []
    scale = float(np.max(np.abs(NG)))
    w, loc = _worst(NG[:-1] - NG[1:], t[1:], scale or 1.0)
    out.append(Verdict.judge("monotonicity_N_G", w, loc, tol_step, skipped))

    dN = central_derivative(t, N)
    viol = delta * N[1:-1] ** 2 - dN
    w, loc = _worst(viol, t[1:-1], _derivative_scale(t, N, dN, delta) or 1.0)
    out.append(Verdict.judge("N_prime_lower_bound", w, loc, tol_der, skipped))

    if delta >= 0:
        scale = float(np.max(np.abs(N)))
        w, loc = _worst(N[:-1] - N[1:], t[1:], scale or 1.0)
        out.append(Verdict.judge("monotonicity_N", w, loc, tol_step, skipped))
    return out


def convexity_transform(I: np.ndarray, delta: float, q: float) -> np.ndarray:
    """``log I`` when ``delta == 0``, else ``-I^{-delta/(q+1)} / delta``."""
    if abs(delta) < 1e-12:
        return np.log(I)
    return -(I ** (-delta / (q + 1.0))) / delta


def check_convexity(series: FrequencySeries, delta: Optional[float] = None, tol: Optional[float] = None) -> Verdict:
    """Slopes of the transformed energy must be non-decreasing."""
    _need(series, 3)
    delta = series.delta if delta is None else delta
    mask = series.I > 0
    skipped = int((~mask).sum())
    t = series.t[mask]
    if t.size < 3:
        raise SeriesError("fewer than 3 records with positive energy")
    h = convexity_transform(series.I[mask], delta, series.q)
    slope = np.diff(h) / np.diff(t)
    scale = float(np.max(np.abs(slope)))
    if tol is None:
        tol = series.tolerance()
    name = "convexity_log_I" if abs(delta) < 1e-12 else "convexity_power_I"
    w, loc = _worst(slope[:-1] - slope[1:], t[1:-1], scale or 1.0)
    return Verdict.judge(name, w, loc, tol, skipped)


def extinction_lower_bound(N_a: float, delta: float, a: float, b: float) -> float:
    """``min(1/(N(a) delta) + a, b)``: no extinction can happen before this time."""
    if not N_a < 0:
        raise ParameterError(f"N(a) must be negative, got {N_a}")
    if not delta < 0:
        raise ParameterError(f"delta must be negative, got {delta}")
    return min(1.0 / (N_a * delta) + a, b)


def energy_lower_bound(t, I_a: float, N_a: float, a: float, delta: float, q: float) -> np.ndarray:
    """Lower bound on ``I(t)`` implied by the frequency at time ``a``.

    ``I_a exp((q+1) N_a (t-a))`` for ``delta >= 0``; for ``delta < 0`` the
    algebraic bound, set to 0 from the extinction bound onwards.
    """
    t = np.asarray(t, dtype=float)
    if delta >= 0:
        return I_a * np.exp((q + 1.0) * N_a * (t - a))
    base = 1.0 - delta * (t - a) * N_a
    out = np.zeros_like(t)
    ok = base > 0
    out[ok] = I_a * base[ok] ** (-(q + 1.0) / delta)
    return out


def lower_bound_I(series: FrequencySeries, a_index: int = 0, slack: Optional[float] = None) -> Verdict:
    """Compare ``I(t)`` with the frequency lower bound started at record ``a_index``.

    Violation is ``max(1 - I/bound)``; it passes when at most ``slack``. For
    ``delta < 0`` points at or past ``b0`` are excluded and counted as skipped.
    """
    rec = series.records[a_index]
    if not rec.I > 0:
        raise SeriesError("I(a) must be positive")
    delta = series.delta
    t = series.t[a_index:]
    I = series.I[a_index:]
    a = rec.t
    keep = np.ones(t.size, dtype=bool)
    if delta < 0 and rec.N < 0:
        b0 = extinction_lower_bound(rec.N, delta, a, t[-1])
        keep = t < b0
    bound = energy_lower_bound(t[keep], rec.I, rec.N, a, delta, series.q)
    ratio = np.ones_like(bound)
    pos = bound > 0
    ratio[pos] = I[keep][pos] / bound[pos]
    if slack is None:
        slack = series.tolerance()
    w, loc = _worst(1.0 - ratio, t[keep], 1.0)
    return Verdict.judge("lower_bound_I", w, loc, slack, int((~keep).sum()))


def _as_tI(series_or_t, I=None):
    if isinstance(series_or_t, FrequencySeries):
        return series_or_t.t, series_or_t.I
    return np.asarray(series_or_t, dtype=float), np.asarray(I, dtype=float)


def vanishing_order(series, a: float, q: Optional[float] = None, delta: Optional[float] = None,
                    I=None, tol: float = 1e-9) -> tuple[float, Verdict]:
    """Estimate the decay exponent ``k`` in ``I(t) ~ (t-a+1)^{-k}``.

    Least-squares slope of ``log I`` against ``log(t-a+1)`` over the last
    decade of ``t-a+1``. The verdict asserts ``k <= (q+1)/delta``. A bare
    ``(t, I)`` pair may be given instead of a series, with ``q`` and ``delta``.
    """
    if isinstance(series, FrequencySeries):
        q = series.q if q is None else q
        delta = series.delta if delta is None else delta
    if q is None or delta is None:
        raise ParameterError("q and delta are required")
    if not delta > 0:
        raise ParameterError(f"vanishing order needs delta > 0, got {delta}")
    t, I = _as_tI(series, I)
    x = t - a + 1.0
    ok = (x > 0) & (I > 0)
    t, x, I = t[ok], x[ok], I[ok]
    if x.size < 3 or x.max() / x.min() < 10.0:
        raise SeriesError("vanishing order needs at least one decade of horizon")
    win = x >= x.max() / 10.0
    if win.sum() < 3:
        raise SeriesError("too few records in the final decade")
    slope = np.polyfit(np.log(x[win]), np.log(I[win]), 1)[0]
    k_hat = -float(slope)
    bound = (q + 1.0) / delta
    return k_hat, Verdict.judge("vanishing_order", k_hat - bound, t[-1], tol)


def almost_monotonicity_check(series: FrequencySeries, C_of_t=None, tol: Optional[float] = None) -> list:
    """Verdicts for the perturbed-equation inequalities.

    ``d/dt log I >= (q+1+C) N - (2q+3/2) C`` and
    ``N' >= pq/(q+1) C^2 (N - q - 1/2)``. ``C`` comes from the series unless
    ``C_of_t`` (callable or array) is given.
    """
    _need(series, 3)
    if C_of_t is None:
        if series.bound is None:
            raise SeriesError("series carries no perturbation bound")
        C = series.bound
    elif callable(C_of_t):
        C = np.array([C_of_t(r.t) for r in series.records], dtype=float)
    else:
        C = np.asarray(C_of_t, dtype=float)
    p, q = series.p, series.q
    idx, skipped = _longest_defined_run(series)
    t = series.t[idx]
    N = series.N[idx]
    I = series.I[idx]
    C = C[idx]
    if tol is None:
        tol = series.tolerance(derivative=True)

    dlogI = central_derivative(t, np.log(I))
    rhs = (q + 1.0 + C[1:-1]) * N[1:-1] - (2.0 * q + 1.5) * C[1:-1]
    scale = max(float(np.max(np.abs(dlogI))), float(np.max(np.abs(rhs))))
    w1, l1 = _worst(rhs - dlogI, t[1:-1], scale or 1.0)

    dN = central_derivative(t, N)
    rhs2 = p * q / (q + 1.0) * C[1:-1] ** 2 * (N[1:-1] - q - 0.5)
    scale2 = max(_derivative_scale(t, N, dN, 0.0), float(np.max(np.abs(rhs2))))
    w2, l2 = _worst(rhs2 - dN, t[1:-1], scale2 or 1.0)
    return [
        Verdict.judge("almost_monotonicity_log_I", w1, l1, tol, skipped),
        Verdict.judge("almost_monotonicity_N", w2, l2, tol, skipped),
    ]


def perturbed_energy_bound(series: FrequencySeries, C=None) -> float:
    """Lower bound on ``I(b)`` for a perturbed run over ``[a, b]`` (first to last record)."""
    C = series.bound if C is None else np.asarray(C, dtype=float)
    if C is None:
        raise SeriesError("series carries no perturbation bound")
    p, q = series.p, series.q
    t = series.t
    a, b = t[0], t[-1]
    rec = series.records[0]
    integral = float(np.trapezoid(p * q / (q + 1.0) * C**2, t))
    inner = math.exp(integral) * (rec.N - q - 0.5) - q - 1.0
    return rec.I * math.exp((b - a) * (q + 1.0 + float(np.max(C))) * inner)


def check_perturbed_energy_bound(series: FrequencySeries, slack: float = 1e-6) -> Verdict:
    bound = perturbed_energy_bound(series)
    I_b = series.records[-1].I
    viol = 1.0 - I_b / bound if bound > 0 else 0.0
    return Verdict.judge("perturbed_energy_bound", viol, series.records[-1].t, slack)


def all_passed(verdicts: Iterable[Verdict]) -> bool:
    return all(v.passed for v in verdicts)
