"""Initial data builders."""

from __future__ import annotations

import math

import numpy as np

from .barenblatt import barenblatt_field, barenblatt_params
from .core import Grid, ParameterError


def _unit_coordinate(grid: Grid) -> np.ndarray:
    lo, hi = grid.domain.bounds
    return (grid.cell_centers - lo) / (hi - lo)


def envelope(grid: Grid) -> np.ndarray:
    """Positive profile vanishing at every Dirichlet boundary of ``grid``."""
    s = _unit_coordinate(grid)
    if grid.domain.radial:
        return np.cos(0.5 * math.pi * s)
    return np.sin(math.pi * s)


def eigenmode(grid: Grid, k: int = 1, amplitude: float = 1.0) -> np.ndarray:
    """``sin(k pi x / L)`` on an interval (the k-th Dirichlet mode)."""
    if grid.domain.radial:
        raise ParameterError("eigenmode data is defined on interval grids")
    return amplitude * np.sin(k * math.pi * _unit_coordinate(grid))


def bump(grid: Grid, center: float = 0.5, width: float = 0.1, amplitude: float = 1.0) -> np.ndarray:
    """Gaussian bump (centre and width in units of the domain length) times the envelope."""
    s = _unit_coordinate(grid)
    return amplitude * np.exp(-(((s - center) / width) ** 2)) * envelope(grid)


def random_sign_changing(grid: Grid, seed: int, smoothness: float = 3.0, amplitude: float = 1.0,
                         modes: int = 16) -> np.ndarray:
    """Seeded low-pass noise with zero weighted mean, shaped to vanish on the boundary.

    Cosine coefficients are drawn from ``N(0, 1)`` and damped by
    ``exp(-(k/smoothness)^2)``. The weighted mean is removed (so the noise takes
    both signs) before multiplying by :func:`envelope`; the result is scaled to
    ``max |u| = amplitude``.
    """
    if not smoothness > 0:
        raise ParameterError("smoothness must be positive")
    rng = np.random.default_rng(seed)
    k = np.arange(1, modes + 1)
    coef = rng.standard_normal(modes) * np.exp(-((k / smoothness) ** 2))
    s = _unit_coordinate(grid)
    noise = np.cos(np.pi * np.outer(s, k)) @ coef
    noise -= np.dot(noise, grid.cell_weights) / grid.cell_weights.sum()
    u = noise * envelope(grid)
    peak = float(np.max(np.abs(u)))
    if peak == 0.0:
        raise ParameterError("degenerate random data")
    return amplitude * u / peak


def barenblatt(grid: Grid, p: float, q: float, t0: float = 1.0, C: float = 1.0) -> np.ndarray:
    return barenblatt_field(grid, t0, barenblatt_params(grid.domain.n, p, q, C))


def from_table(grid: Grid, xs, values) -> np.ndarray:
    """Linear interpolation of tabulated data onto cell centres."""
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    if xs.shape != values.shape or xs.size < 2:
        raise ParameterError("table needs matching x and value columns")
    return np.interp(grid.cell_centers, xs, values, left=0.0, right=0.0)


def load_table(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Two-column text table (``x value``), comma or whitespace separated."""
    with open(path) as fh:
        text = fh.read().replace(",", " ")
    data = np.loadtxt(text.splitlines(), ndmin=2)
    if data.shape[1] != 2:
        raise ParameterError(f"{path}: expected two columns")
    return data[:, 0], data[:, 1]
