"""Ancient solutions of the Dirichlet heat equation on an interval (p=2, q=1).

``u(x, t) = sum_k a_k exp(-lambda_k t) phi_k(x)`` for ``t < 0`` with
``phi_k = sqrt(2/L) sin(k pi x / L)`` and ``lambda_k = (k pi / L)^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .core import ParameterError


@dataclass(frozen=True)
class SpectralMode:
    k: int
    amplitude: float
    L: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ParameterError(f"mode index must be >= 1, got {self.k}")
        if not self.L > 0:
            raise ParameterError("interval length must be positive")

    @property
    def eigenvalue(self) -> float:
        return (self.k * math.pi / self.L) ** 2

    def eigenfunction(self, x):
        return math.sqrt(2.0 / self.L) * np.sin(self.k * math.pi * np.asarray(x, dtype=float) / self.L)


@dataclass(frozen=True)
class SpectralSolution:
    modes: tuple
    horizon: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if len({m.L for m in self.modes}) > 1:
            raise ParameterError("all modes must share the interval length")
        if not self.horizon > 0:
            raise ParameterError("horizon must be positive")

    @classmethod
    def from_amplitudes(cls, amplitudes: Sequence[float], L: float = math.pi, horizon: float = 100.0,
                        ks: Optional[Sequence[int]] = None) -> "SpectralSolution":
        ks = range(1, len(amplitudes) + 1) if ks is None else ks
        return cls(tuple(SpectralMode(int(k), float(a), float(L)) for k, a in zip(ks, amplitudes)), horizon)

    @property
    def L(self) -> float:
        return self.modes[0].L if self.modes else math.pi

    @property
    def trivial(self) -> bool:
        return all(m.amplitude == 0.0 for m in self.modes)

    def _active(self):
        return [m for m in self.modes if m.amplitude != 0.0]


def _check_ancient(t):
    t = np.asarray(t, dtype=float)
    if np.any(t >= 0):
        raise ParameterError("ancient solutions are evaluated at t < 0 only")
    return t


def spectral_eval(sol: SpectralSolution, x, t: float):
    _check_ancient(t)
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for m in sol._active():
        out = out + m.amplitude * math.exp(-m.eigenvalue * t) * m.eigenfunction(x)
    return out if out.ndim else float(out)


def spectral_log_I(sol: SpectralSolution, t) -> np.ndarray:
    """``log sum a_k^2 exp(2 lambda_k |t|)`` evaluated without overflow; ``-inf`` if trivial."""
    t = _check_ancient(t)
    act = sol._active()
    if not act:
        return np.full(t.shape, -np.inf) if t.ndim else -math.inf
    lam = np.array([m.eigenvalue for m in act])
    la2 = 2.0 * np.log(np.abs(np.array([m.amplitude for m in act])))
    expo = la2[:, None] + 2.0 * lam[:, None] * np.abs(np.atleast_1d(t))[None, :]
    out = logsumexp(expo, axis=0)
    return out if t.ndim else float(out[0])


def spectral_I(sol: SpectralSolution, t):
    """``sum a_k^2 exp(2 lambda_k |t|)``."""
    out = np.exp(spectral_log_I(sol, t))
    return out if np.ndim(out) else float(out)


def spectral_N(sol: SpectralSolution, t):
    """``-sum a_k^2 lambda_k e^{2 lambda_k |t|} / sum a_k^2 e^{2 lambda_k |t|}``."""
    t = _check_ancient(t)
    act = sol._active()
    if not act:
        raise ParameterError("frequency is undefined for the zero solution")
    lam = np.array([m.eigenvalue for m in act])
    la2 = 2.0 * np.log(np.abs(np.array([m.amplitude for m in act])))
    expo = la2[:, None] + 2.0 * lam[:, None] * np.abs(np.atleast_1d(t))[None, :]
    wts = np.exp(expo - expo.max(axis=0))
    out = -(lam[:, None] * wts).sum(axis=0) / wts.sum(axis=0)
    return out if t.ndim else float(out[0])


def spectral_field(sol: SpectralSolution, grid, t: float) -> np.ndarray:
    """Cell samples on an interval grid ``[left, left + L]``."""
    x = grid.cell_centers - grid.domain.left
    return spectral_eval(sol, x, t)


# ---------------------------------------------------------------------------
# growth classification


@dataclass(frozen=True)
class GrowthClass:
    kind: str
    degree: Optional[float] = None
    rss_polynomial: float = math.nan
    rss_exponential: float = math.nan

    def __str__(self) -> str:
        if self.kind == "polynomial":
            return f"polynomial({self.degree:g})"
        return self.kind


def _fit_rss(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    A = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    return float(coef[1]), float(r @ r)


def _elasticity(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of ``y`` against ``log x``."""
    return _fit_rss(np.log(x), y)[0]


def growth_classify(obj, d_max: float = 10.0, I=None, samples: int = 200, factor: float = math.sqrt(10.0)) -> GrowthClass:
    """Polynomial versus exponential growth of ``I(t)`` as ``t -> -infinity``.

    ``obj`` is a SpectralSolution (sampled over its horizon) or an array of
    negative times with ``I`` given. On the final decade of ``s = |t|`` the
    elasticity ``E = d log I / d log s`` is measured near both ends. It tends
    to the degree for polynomial growth and grows like ``s`` for exponential
    growth, so a rise by at least ``factor`` across the decade means
    exponential. The reported degree is the slope of ``log I`` against
    ``log(1 + s)``.
    """
    if isinstance(obj, SpectralSolution):
        if obj.trivial:
            return GrowthClass("polynomial", 0.0, 0.0, 0.0)
        t = -obj.horizon * np.logspace(-2.0, 0.0, samples)
        logI = spectral_log_I(obj, t)
    else:
        t = np.asarray(obj, dtype=float)
        if I is None:
            raise ParameterError("I values are required with a time array")
        if np.any(t >= 0):
            raise ParameterError("growth classification needs an ancient (t < 0) series")
        I = np.asarray(I, dtype=float)
        if np.all(I == 0):
            return GrowthClass("polynomial", 0.0, 0.0, 0.0)
        if np.any(I <= 0):
            return GrowthClass("undetermined")
        logI = np.log(I)
    s = np.abs(t)
    if s.max() / s.min() < 100.0:
        return GrowthClass("undetermined")
    win = s >= s.max() / 10.0
    x, y = s[win], logI[win]
    if x.size < 6:
        return GrowthClass("undetermined")
    spread = float(np.max(np.abs(y - y.mean())))
    if spread <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        return GrowthClass("polynomial", 0.0, 0.0, 0.0)
    deg, rss_poly = _fit_rss(np.log1p(x), y)
    _, rss_exp = _fit_rss(x, y)
    lx = np.log(x)
    lo = lx <= lx.min() + 0.2 * (lx.max() - lx.min())
    hi = lx >= lx.max() - 0.2 * (lx.max() - lx.min())
    e_lo, e_hi = _elasticity(x[lo], y[lo]), _elasticity(x[hi], y[hi])
    if e_hi > 0 and e_hi >= factor * max(e_lo, 0.0) and e_hi > 1.0:
        return GrowthClass("exponential", None, rss_poly, rss_exp)
    if 0 <= deg <= d_max:
        return GrowthClass("polynomial", deg, rss_poly, rss_exp)
    return GrowthClass("undetermined", None, rss_poly, rss_exp)
