"""Summation-by-parts discretisation of ``exp(phi) div(exp(-phi) |grad v|^{p-2} grad v)``.

For any two cell fields ``a`` and ``b`` with homogeneous Dirichlet data the
assembled operator satisfies, to rounding,

    sum_i a_i (L b)_i w_i = - sum_f grad(a)_f * flux(grad(b)_f) * w_f

so the energy identities of the continuous equation carry over to the
semi-discrete system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Grid, ParameterError, as_values


@dataclass(frozen=True)
class OperatorConfig:
    p: float
    eps_reg: float = 0.0

    def __post_init__(self):
        if not self.p > 1:
            raise ParameterError(f"p must be > 1, got {self.p}")
        if not self.eps_reg >= 0:
            raise ParameterError("eps_reg must be non-negative")


@dataclass(frozen=True, eq=False)
class FaceField:
    """Values on all ``cells + 1`` faces of ``grid`` (boundary faces included)."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.cells + 1,):
            raise ParameterError("face field does not match grid")
        if not np.all(np.isfinite(vals)):
            raise ParameterError("face field contains NaN or Inf")


def _face_gradient(v: np.ndarray, grid: Grid) -> np.ndarray:
    g = np.empty(v.size + 1)
    g[1:-1] = np.diff(v) / grid.dx
    # boundary value 0 sits on the face, half a cell from the last centre
    g[-1] = -v[-1] / grid.face_spacing[-1]
    g[0] = 0.0 if grid.left_symmetric else v[0] / grid.face_spacing[0]
    return g


def face_gradient(v, grid: Grid) -> FaceField:
    """Difference quotients of ``v`` across every face.

    Interior faces use ``(v[i+1] - v[i]) / dx``. Dirichlet faces difference
    against the boundary value 0 over half a cell; the radial origin face
    carries zero gradient.
    """
    return FaceField(_face_gradient(as_values(v, grid), grid), grid)


def _flux(g: np.ndarray, p: float, eps: float) -> np.ndarray:
    if p == 2.0:
        return g.copy()
    if eps == 0.0:
        out = np.abs(g) ** (p - 1.0) * np.sign(g)
    else:
        out = (g * g + eps * eps) ** ((p - 2.0) / 2.0) * g
    return out


def flux(g, cfg: OperatorConfig):
    """``(g**2 + eps**2)**((p-2)/2) * g``; with ``eps = 0`` this is ``|g|^{p-2} g``."""
    if isinstance(g, FaceField):
        return FaceField(_flux(g.values, cfg.p, cfg.eps_reg), g.grid)
    arr = np.asarray(g, dtype=float)
    out = _flux(np.atleast_1d(arr), cfg.p, cfg.eps_reg)
    return out if arr.ndim else float(out[0])


def flux_derivative(g: np.ndarray, p: float, eps: float) -> np.ndarray:
    """d flux / d g. Infinite at ``g = 0`` for ``p < 2`` unless ``eps > 0``."""
    if p == 2.0:
        return np.ones_like(g)
    g2 = g * g
    if eps == 0.0:
        with np.errstate(divide="ignore"):
            return (p - 1.0) * np.abs(g) ** (p - 2.0)
    e2 = eps * eps
    return (g2 + e2) ** ((p - 4.0) / 2.0) * ((p - 1.0) * g2 + e2)


def divergence(face_flux: np.ndarray, grid: Grid) -> np.ndarray:
    """Weighted discrete divergence of face fluxes, per unit cell measure."""
    cf = grid.face_conductance * face_flux
    return (cf[1:] - cf[:-1]) / grid.cell_weights


def apply_values(v: np.ndarray, grid: Grid, p: float, eps: float = 0.0) -> np.ndarray:
    """Array-level operator used in the time-stepping hot loop."""
    return divergence(_flux(_face_gradient(v, grid), p, eps), grid)


def apply_operator(v, grid: Grid, cfg: OperatorConfig) -> np.ndarray:
    """Discrete ``L_{p,phi} v`` at cell centres."""
    return apply_values(as_values(v, grid), grid, cfg.p, cfg.eps_reg)


def duality_defect(a, b, grid: Grid, cfg: OperatorConfig) -> tuple[float, float]:
    """Return ``(defect, scale)`` of the summation-by-parts identity.

    ``defect = sum a (L b) w + sum grad(a) flux(grad b) w_f`` and ``scale`` is the
    sum of absolute values of the terms entering it.
    """
    a = as_values(a, grid)
    b = as_values(b, grid)
    lb = apply_operator(b, grid, cfg)
    ga = _face_gradient(a, grid)
    fb = _flux(_face_gradient(b, grid), cfg.p, cfg.eps_reg)
    t1 = a * lb * grid.cell_weights
    t2 = ga * fb * grid.face_weights
    scale = float(np.abs(t1).sum() + np.abs(t2).sum())
    return float(t1.sum() + t2.sum()), scale


def operator_jacobian_banded(v: np.ndarray, grid: Grid, p: float, eps: float) -> np.ndarray:
    """Jacobian of :func:`apply_values` in ``scipy.linalg.solve_banded`` (1, 1) layout.

    Row 0 holds the super-diagonal, row 1 the diagonal, row 2 the sub-diagonal.
    """
    g = _face_gradient(v, grid)
    s = grid.face_conductance * flux_derivative(g, p, eps) / grid.face_spacing
    if grid.left_symmetric:
        s[0] = 0.0
    w = grid.cell_weights
    ab = np.zeros((3, v.size))
    ab[1] = -(s[:-1] + s[1:]) / w
    ab[0, 1:] = s[1:-1] / w[:-1]
    ab[2, :-1] = s[1:-1] / w[1:]
    return ab


def operator_matrix(grid: Grid, p: float = 2.0, v=None, eps: float = 0.0) -> np.ndarray:
    """Dense Jacobian (the operator itself when ``p = 2``); for small grids and tests."""
    v = np.zeros(grid.cells) if v is None else as_values(v, grid)
    ab = operator_jacobian_banded(v, grid, p, eps)
    a = np.diag(ab[1])
    a += np.diag(ab[0, 1:], 1)
    a += np.diag(ab[2, :-1], -1)
    return a
