"""Closed-form self-similar (Barenblatt) solutions in the slow, critical and fast regimes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import special

from .core import DomainSpec, Grid, ParameterError, delta_of, make_grid, signed_power, sphere_area
from .operator import apply_values

SLOW = "slow"
CRITICAL = "critical"
FAST = "fast"

_CRITICAL_TOL = 1e-12


class RegimeError(ParameterError):
    """Parameters outside the window where I and D are finite."""


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# adaptive Gauss-Legendre quadrature

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(15)


def _gauss(f, a, b):
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return half * float(np.dot(_GL_WEIGHTS, f(mid + half * _GL_NODES)))


def adaptive_gauss(f: Callable, a: float, b: float, rtol: float = 1e-10, atol: float = 0.0,
                   max_panels: int = 20000) -> float:
    """Integrate a vectorised ``f`` over ``[a, b]`` by panel bisection.

    A panel is accepted when its 15-point value agrees with the sum over its two
    halves to within its share of the tolerance; the refined value is kept.
    """
    whole = _gauss(f, a, b)
    stack = [(a, b, whole)]
    total = 0.0
    panels = 0
    scale = abs(whole)
    while stack:
        lo, hi, val = stack.pop()
        mid = 0.5 * (lo + hi)
        left = _gauss(f, lo, mid)
        right = _gauss(f, mid, hi)
        refined = left + right
        panels += 1
        share = (hi - lo) / (b - a)
        scale = max(scale, abs(total) + abs(refined))
        if abs(refined - val) <= max(atol, rtol * scale) * share or (hi - lo) < 1e-14 * (b - a):
            total += refined
            continue
        if panels > max_panels:
            raise QuadratureError(f"no convergence on [{a}, {b}] after {max_panels} panels")
        stack.append((lo, mid, left))
        stack.append((mid, hi, right))
    return total


def _integrate_to_infinity(f: Callable, rtol: float) -> float:
    """Geometric panels [0,1], [1,2], [2,4], ... until the tail is negligible."""
    total = adaptive_gauss(f, 0.0, 1.0, rtol=rtol * 0.1)
    lo = 1.0
    for _ in range(200):
        piece = adaptive_gauss(f, lo, 2.0 * lo, rtol=rtol * 0.1, atol=1e-300)
        total += piece
        if abs(piece) <= 1e-3 * rtol * abs(total) and lo >= 8.0:
            return total
        lo *= 2.0
    raise QuadratureError("integrand does not decay fast enough")


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class BarenblattParams:
    """Constants of one Barenblatt family.

    ``gamma``/``kappa`` are ``None`` in the critical regime, ``zeta`` is
    ``None`` outside it. ``omega_n`` is the unit-sphere area, so that
    ``I(t) = omega_n * A * t^{-nq/beta}`` equals the integral over R^n.
    """

    n: int
    p: float
    q: float
    C: float
    delta: float
    beta: float
    regime: str
    gamma: Optional[float]
    kappa: Optional[float]
    zeta: Optional[float]
    omega_n: float

    @property
    def s(self) -> float:
        """Profile exponent ``p/(p-1)``."""
        return self.p / (self.p - 1.0)

    @property
    def support_radius(self) -> float:
        """``xi_0 = (C/kappa)^{(p-1)/p}`` in similarity variables; infinite unless slow."""
        if self.regime != SLOW:
            return math.inf
        return (self.C / self.kappa) ** ((self.p - 1.0) / self.p)

    @property
    def decay_rate(self) -> float:
        """``nq/beta``: ``I(t)`` is proportional to ``t^{-nq/beta}``."""
        return self.n * self.q / self.beta

    @property
    def frequency_constant(self) -> float:
        """``k`` with ``N(t) = -k/t``: ``nq / ((q+1)(p + n delta))``."""
        return self.n * self.q / ((self.q + 1.0) * (self.p + self.n * self.delta))

    @property
    def A(self) -> float:
        return barenblatt_A(self)


def barenblatt_params(n: int, p: float, q: float, C: float = 1.0) -> BarenblattParams:
    if int(n) != n or n < 1:
        raise ParameterError(f"dimension must be a positive integer, got {n}")
    delta = delta_of(p, q)
    if abs(delta) < _CRITICAL_TOL:
        delta = 0.0
    if delta <= -p / n:
        raise RegimeError(f"delta={delta} must exceed -p/n={-p / n}: energies diverge")
    if not C > 0:
        raise ParameterError("profile constant C must be positive")
    beta = p + n * delta
    omega = sphere_area(n)
    if delta == 0.0:
        zeta = (p - 1.0) ** 2 * p ** (-p / (p - 1.0))
        return BarenblattParams(n, p, q, C, 0.0, beta, CRITICAL, None, None, zeta, omega)
    gamma = (p - 1.0) / delta
    kappa = delta / (p * q) * beta ** (-1.0 / (p - 1.0))
    regime = SLOW if delta > 0 else FAST
    return BarenblattParams(n, p, q, C, delta, beta, regime, gamma, kappa, None, omega)


# ---------------------------------------------------------------------------
# profile


def _profile(xi, bp: BarenblattParams):
    """Self-similar profile ``F(xi)`` so that ``u = t^{-n/beta} F(|x| t^{-1/beta})``."""
    xi = np.abs(np.asarray(xi, dtype=float))
    if bp.regime == CRITICAL:
        return np.exp(-bp.zeta * xi**bp.s)
    if bp.regime == SLOW:
        base = np.maximum(bp.C - bp.kappa * xi**bp.s, 0.0)
        return base**bp.gamma
    return (bp.C + abs(bp.kappa) * xi**bp.s) ** bp.gamma


def barenblatt_eval(x, t: float, bp: BarenblattParams):
    """``u(x, t)``; ``x`` is the radius (or signed coordinate when ``n = 1``)."""
    if not t > 0:
        raise ParameterError(f"time must be positive, got {t}")
    x = np.asarray(x, dtype=float)
    out = t ** (-bp.n / bp.beta) * _profile(np.abs(x) * t ** (-1.0 / bp.beta), bp)
    return out if out.ndim else float(out)


def support_radius_at(t: float, bp: BarenblattParams) -> float:
    return bp.support_radius * t ** (1.0 / bp.beta)


# ---------------------------------------------------------------------------
# profile integral A


def barenblatt_A(bp: BarenblattParams, rtol: float = 1e-10) -> float:
    """``A = int_0^inf F(xi)^{q+1} xi^{n-1} d xi`` by adaptive quadrature.

    In the slow regime the value is cross-checked against the Beta-function
    closed form and a disagreement beyond ``1e-8`` raises.
    """
    m = bp.q + 1.0
    n = bp.n

    def integrand(xi):
        return _profile(xi, bp) ** m * xi ** (n - 1)

    if bp.regime == SLOW:
        val = adaptive_gauss(integrand, 0.0, bp.support_radius, rtol=rtol)
        ref = barenblatt_A_closed(bp)
        if abs(val - ref) > 1e-8 * abs(ref):
            raise QuadratureError(f"quadrature A={val!r} disagrees with Beta form {ref!r}")
        return val
    # the profile varies on the scale of the Gaussian-like core
    width = core_width(bp)
    return width * _integrate_to_infinity(lambda y: integrand(width * y), rtol)


def core_width(bp: BarenblattParams) -> float:
    if bp.regime == CRITICAL:
        return (1.0 / bp.zeta) ** (1.0 / bp.s)
    return (bp.C / abs(bp.kappa)) ** (1.0 / bp.s)


def barenblatt_A_closed(bp: BarenblattParams) -> float:
    """Beta/Gamma-function expression of ``A`` (independent of the quadrature)."""
    s, n = bp.s, bp.n
    if bp.regime == CRITICAL:
        a = bp.zeta * (bp.q + 1.0)
        return math.gamma(n / s) / (s * a ** (n / s))
    m = bp.gamma * (bp.q + 1.0)
    if bp.regime == SLOW:
        return bp.C**m * (bp.C / bp.kappa) ** (n / s) * special.beta(n / s, m + 1.0) / s
    b = -m - n / s
    if not b > 0:
        raise RegimeError("profile integral diverges")
    return bp.C**m * (bp.C / abs(bp.kappa)) ** (n / s) * special.beta(n / s, b) / s


def barenblatt_I(t: float, bp: BarenblattParams, A: Optional[float] = None) -> float:
    """``omega_n A t^{-nq/beta}``."""
    if not t > 0:
        raise ParameterError(f"time must be positive, got {t}")
    A = barenblatt_A(bp) if A is None else A
    with np.errstate(over="ignore", under="ignore"):
        return float(bp.omega_n * A * np.float64(t) ** (-bp.decay_rate))


def barenblatt_N(t: float, bp: BarenblattParams) -> float:
    """``-nq / ((q+1)(p + n delta)) / t``."""
    if not t > 0:
        raise ParameterError(f"time must be positive, got {t}")
    return -bp.frequency_constant / t


def barenblatt_field(grid: Grid, t: float, bp: BarenblattParams) -> np.ndarray:
    """Cell samples of ``u(., t)`` on a radial grid."""
    if not grid.domain.radial or grid.domain.n != bp.n:
        raise ParameterError("Barenblatt data needs a radial grid of matching dimension")
    return barenblatt_eval(grid.cell_centers, t, bp)


def truncation_radius(bp: BarenblattParams, t_max: float, tail: float = 1e-10, t_min: Optional[float] = None) -> float:
    """Radius beyond which the contribution to ``I`` is below ``tail`` times ``I`` for ``t <= t_max``.

    Slow regime: the support radius at ``t_max`` (times 1.05). Otherwise the
    radius is found by doubling with the tail estimated by quadrature.
    """
    if bp.regime == SLOW:
        return 1.05 * support_radius_at(t_max, bp)
    times = [t_max] if t_min is None else [t_min, t_max]
    r = 1.0
    for _ in range(200):
        ok = True
        for t in times:
            total = barenblatt_I(t, bp)
            f = lambda x: bp.omega_n * np.abs(barenblatt_eval(x, t, bp)) ** (bp.q + 1.0) * x ** (bp.n - 1)
            tail_val = _tail_integral(f, r)
            if tail_val > tail * total:
                ok = False
                break
        if ok:
            return r
        r *= 1.25
    raise QuadratureError("could not find a truncation radius")


def _tail_integral(f, r0: float) -> float:
    total = 0.0
    lo = r0
    for _ in range(200):
        piece = adaptive_gauss(f, lo, 2.0 * lo, rtol=1e-8, atol=1e-300)
        total += piece
        if piece <= 1e-6 * total or piece == 0.0:
            break
        lo *= 2.0
    return total


# ---------------------------------------------------------------------------
# residual of the discrete operator applied to the exact solution


def pde_residual(bp: BarenblattParams, grid: Grid, t: float, margin: int = 3,
                 refine: bool = True) -> tuple[float, float]:
    """Max-norm of ``du/dt - L_h u^q`` on interior cells and its refinement order.

    ``du/dt`` is taken by a central difference with step ``1e-4 t``. Cells
    within ``margin`` of the free boundary (slow regime) or of the truncation
    boundary are excluded. The order is ``log2`` of the ratio against the same
    norm on a grid with twice as many cells; with ``refine=False`` it is NaN.
    """
    if not t > 0:
        raise ParameterError("time must be positive")
    norm = _residual_norm(bp, grid, t, margin)
    if not refine:
        return norm, math.nan
    fine = make_grid(DomainSpec(grid.domain.kind, 2 * grid.cells, radius=grid.domain.radius, n=grid.domain.n),
                     grid.weight)
    norm_fine = _residual_norm(bp, fine, t, 2 * margin)
    order = math.log2(norm / norm_fine) if norm_fine > 0 and norm > 0 else math.nan
    return norm, order


def _residual_norm(bp: BarenblattParams, grid: Grid, t: float, margin: int) -> float:
    r = grid.cell_centers
    h = 1e-4 * t
    ut = (barenblatt_eval(r, t + h, bp) - barenblatt_eval(r, t - h, bp)) / (2.0 * h)
    u = barenblatt_eval(r, t, bp)
    lu = apply_values(signed_power(u, bp.q), grid, bp.p)
    res = np.abs(ut - lu)
    keep = np.ones(r.size, dtype=bool)
    keep[-margin:] = False
    if bp.regime == SLOW:
        edge = support_radius_at(t, bp)
        keep &= np.abs(r - edge) > margin * grid.dx
    return float(np.max(res[keep]))
