"""Equation parameters, weighted grids, fields and signed-power algebra."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class ParameterError(ValueError):
    """Raised when an equation or grid parameter is out of range."""


def signed_power(x, s):
    """Return ``|x|**(s-1) * x`` elementwise.

    This is the odd power ``x^s`` used throughout, so ``signed_power(-8, 1/3)``
    is ``-2``. At ``x == 0`` the limit value 0 is returned for every ``s > 0``.
    """
    if not s > 0:
        raise ParameterError(f"signed power exponent must be positive, got {s}")
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * np.abs(x) ** s
    return out if out.ndim else float(out)


def abs_power(x, s):
    """``|x|**s`` with ``s >= 0``; ``0**0`` is taken as 1."""
    if not s >= 0:
        raise ParameterError(f"absolute power exponent must be >= 0, got {s}")
    out = np.abs(np.asarray(x, dtype=float)) ** s
    return out if out.ndim else float(out)


def _check_pq(p: float, q: float) -> None:
    if not (np.isfinite(p) and p > 1):
        raise ParameterError(f"p must be > 1, got {p}")
    if not (np.isfinite(q) and q > 0):
        raise ParameterError(f"q must be > 0, got {q}")


def delta_of(p: float, q: float) -> float:
    """Regime parameter ``q(p-1) - 1``: >0 slow, =0 critical, <0 fast diffusion."""
    _check_pq(p, q)
    return q * (p - 1.0) - 1.0


def sphere_area(n: int) -> float:
    """Area of the unit sphere in R^n (2 for n=1, 2*pi for n=2, 4*pi for n=3)."""
    if n < 1:
        raise ParameterError(f"dimension must be >= 1, got {n}")
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


# ---------------------------------------------------------------------------
# domain and weight descriptions


INTERVAL = "interval"
BALL = "ball"
WHOLE_SPACE = "whole-space"
_DOMAIN_KINDS = (INTERVAL, BALL, WHOLE_SPACE)


@dataclass(frozen=True)
class DomainSpec:
    """Interval ``[left, right]`` or radial ``[0, radius]`` with Dirichlet data.

    ``whole-space`` is a radial ball of radius ``R_max`` standing in for R^n;
    the truncation radius has to be chosen large enough by the caller.
    """

    kind: str
    cells: int
    left: float = 0.0
    right: float = 1.0
    radius: float = 1.0
    n: int = 1

    def __post_init__(self):
        if self.kind not in _DOMAIN_KINDS:
            raise ParameterError(f"unknown domain kind {self.kind!r}")
        if int(self.cells) != self.cells or self.cells < 8:
            raise ParameterError(f"need at least 8 cells, got {self.cells}")
        if self.kind == INTERVAL:
            if not self.left < self.right:
                raise ParameterError("interval bounds must satisfy left < right")
        else:
            if not self.radius > 0:
                raise ParameterError("radius must be positive")
            if int(self.n) != self.n or self.n < 1:
                raise ParameterError(f"radial dimension must be a positive integer, got {self.n}")

    @classmethod
    def interval(cls, left: float, right: float, cells: int) -> "DomainSpec":
        return cls(INTERVAL, cells, left=left, right=right)

    @classmethod
    def ball(cls, radius: float, cells: int, n: int = 1) -> "DomainSpec":
        return cls(BALL, cells, radius=radius, n=n)

    @classmethod
    def whole_space(cls, r_max: float, cells: int, n: int = 1) -> "DomainSpec":
        return cls(WHOLE_SPACE, cells, radius=r_max, n=n)

    @property
    def radial(self) -> bool:
        return self.kind != INTERVAL

    @property
    def bounds(self) -> tuple[float, float]:
        return (0.0, self.radius) if self.radial else (self.left, self.right)


@dataclass(frozen=True)
class WeightSpec:
    """Weight ``phi`` of the measure ``exp(-phi) dV``.

    ``kind`` is ``zero``, ``quadratic`` (``a * x**2``), ``tabulated`` (linear
    interpolation of ``table = (xs, phis)``) or ``callable`` (``func``).
    """

    kind: str = "zero"
    a: float = 0.0
    table: Optional[tuple] = None
    func: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("zero", "quadratic", "tabulated", "callable"):
            raise ParameterError(f"unknown weight kind {self.kind!r}")
        if self.kind == "tabulated" and self.table is None:
            raise ParameterError("tabulated weight needs a table")
        if self.kind == "callable" and self.func is None:
            raise ParameterError("callable weight needs func")

    @classmethod
    def zero(cls) -> "WeightSpec":
        return cls()

    @classmethod
    def quadratic(cls, a: float) -> "WeightSpec":
        return cls("quadratic", a=float(a))

    @classmethod
    def tabulated(cls, xs: Sequence[float], phis: Sequence[float]) -> "WeightSpec":
        xs = tuple(float(v) for v in xs)
        phis = tuple(float(v) for v in phis)
        if len(xs) != len(phis) or len(xs) < 2:
            raise ParameterError("tabulated weight needs matching xs/phis of length >= 2")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ParameterError("tabulated weight abscissae must increase")
        return cls("tabulated", table=(xs, phis))

    @classmethod
    def from_callable(cls, func: Callable) -> "WeightSpec":
        return cls("callable", func=func)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            out = np.zeros_like(x)
        elif self.kind == "quadratic":
            out = self.a * x**2
        elif self.kind == "tabulated":
            xs, phis = self.table
            out = np.interp(x, xs, phis)
        else:
            out = np.asarray(self.func(x), dtype=float) * np.ones_like(x)
        if not np.all(np.isfinite(out)):
            raise ParameterError("weight phi is not finite on the grid")
        return out


@dataclass(frozen=True)
class ProblemParams:
    """One instance of the doubly nonlinear equation ``u_t = L_{p,phi} u^q``."""

    p: float
    q: float
    domain: DomainSpec
    weight: WeightSpec = WeightSpec()

    def __post_init__(self):
        _check_pq(self.p, self.q)

    @property
    def delta(self) -> float:
        return delta_of(self.p, self.q)

    @property
    def n(self) -> int:
        return self.domain.n if self.domain.radial else 1


# ---------------------------------------------------------------------------
# grid


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform cell-centred grid carrying the weighted measure.

    ``cell_weights[i]`` is the measure of cell ``i``: ``exp(-phi)`` at the
    centre times the cell length, or times the exact shell volume on radial
    grids.
    ``face_weights[f]`` is the density at face ``f`` times the length
    ``face_spacing[f]`` of the dual cell across the face (``dx`` inside,
    ``dx/2`` at the two boundary faces). With this pairing the discrete
    divergence is exactly minus the adjoint of ``face_gradient``.

    The left face is a Dirichlet face for intervals and a symmetry face (zero
    gradient) at the origin of radial grids.
    """

    domain: DomainSpec
    weight: WeightSpec
    dx: float
    cell_centers: np.ndarray
    faces: np.ndarray
    cell_weights: np.ndarray
    face_weights: np.ndarray
    face_spacing: np.ndarray
    phi_cells: np.ndarray
    phi_faces: np.ndarray

    @property
    def cells(self) -> int:
        return self.cell_centers.size

    @property
    def left_symmetric(self) -> bool:
        return self.domain.radial

    @property
    def face_conductance(self) -> np.ndarray:
        """``face_weights / face_spacing``: the density at each face."""
        return self.face_weights / self.face_spacing

    def total_measure(self) -> float:
        return float(self.cell_weights.sum())


def make_grid(domain: DomainSpec, weight: Optional[WeightSpec] = None) -> Grid:
    weight = WeightSpec() if weight is None else weight
    lo, hi = domain.bounds
    m = domain.cells
    dx = (hi - lo) / m
    faces = lo + dx * np.arange(m + 1)
    centers = lo + dx * (np.arange(m) + 0.5)
    phi_c = weight(centers)
    phi_f = weight(faces)
    if domain.radial:
        n = domain.n
        area = sphere_area(n)
        # exact shell volumes keep the divergence consistent at the origin for n >= 3
        shell = area * (faces[1:] ** n - faces[:-1] ** n) / n
        cw = shell * np.exp(-phi_c)
        dens_f = area * faces ** (n - 1) * np.exp(-phi_f)
    else:
        cw = np.exp(-phi_c) * dx
        dens_f = np.exp(-phi_f)
    spacing = np.full(m + 1, dx)
    spacing[0] = spacing[-1] = 0.5 * dx
    fw = dens_f * spacing
    for arr in (cw, fw):
        arr.setflags(write=False)
    for arr in (centers, faces, spacing, phi_c, phi_f):
        arr.setflags(write=False)
    if np.any(cw <= 0) or np.any(fw < 0):
        raise ParameterError("grid weights must be positive")
    return Grid(domain, weight, dx, centers, faces, cw, fw, spacing, phi_c, phi_f)


# ---------------------------------------------------------------------------
# fields


@dataclass(frozen=True, eq=False)
class Field:
    """Cell values of a solution at time ``time``."""

    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1:
            raise ParameterError("field values must be one-dimensional")
        if not np.all(np.isfinite(vals)):
            raise ParameterError("field contains NaN or Inf")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size

    def __neg__(self) -> "Field":
        return Field(-self.values, self.time)


def as_values(f, grid: Optional[Grid] = None) -> np.ndarray:
    """Cell values of a Field or array-like, checked against ``grid``."""
    vals = f.values if isinstance(f, Field) else np.asarray(f, dtype=float)
    if grid is not None and vals.shape != (grid.cells,):
        raise ParameterError(f"field of shape {vals.shape} does not match grid with {grid.cells} cells")
    return vals


def integrate(f, grid: Grid) -> float:
    """Weighted quadrature ``sum_i f_i w_i``."""
    return float(np.dot(as_values(f, grid), grid.cell_weights))
