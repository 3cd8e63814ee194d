"""Method-of-lines time integration of ``du/dt = L_h(u^q) + f``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from .core import Field, Grid, ParameterError, ProblemParams, as_values, signed_power
from .diagnostics import FrequencySeries, make_record
from .operator import _face_gradient, apply_values, operator_jacobian_banded

U_FLOOR = 1e-12
EXTINCTION_FLOOR = 1e-12

_KIND_ALIASES = {
    "rk4": "rk4",
    "explicit-rk4": "rk4",
    "euler": "euler",
    "explicit-euler": "euler",
    "implicit-euler": "implicit-euler",
    "implicit": "implicit-euler",
    "backward-euler": "implicit-euler",
}
_ORDER = {"rk4": 4, "euler": 1, "implicit-euler": 1}


class StabilityError(RuntimeError):
    """The explicit update produced non-finite values."""

    def __init__(self, t: float, msg: str = ""):
        super().__init__(msg or f"non-finite values after step at t={t:.17g}")
        self.t = t


class NewtonError(RuntimeError):
    """Implicit solve did not converge even after step halving."""

    def __init__(self, residual: float, dt: float, t: float):
        super().__init__(f"Newton failed at t={t:.17g}: residual {residual:.3e} with dt={dt:.3e}")
        self.residual = residual
        self.dt = dt
        self.t = t


class PerturbationBoundError(RuntimeError):
    pass


@dataclass(frozen=True)
class NewtonConfig:
    max_iter: int = 50
    abs_tol: float = 1e-13
    rel_tol: float = 1e-11
    damping_min: float = 1.0 / 64.0
    max_halvings: int = 10

    def __post_init__(self):
        if self.max_iter < 1 or self.abs_tol <= 0 or self.rel_tol <= 0 or not 0 < self.damping_min <= 1:
            raise ParameterError("invalid Newton configuration")


@dataclass(frozen=True)
class SchemeConfig:
    """Time integrator. ``dt=None`` selects adaptive explicit steps of size
    ``cfl_safety`` times the frozen-coefficient stability limit, capped by
    ``dt_max``."""

    kind: str = "rk4"
    dt: Optional[float] = None
    cfl_safety: float = 0.9
    dt_max: float = math.inf
    g_floor: float = 1e-6
    eps_reg: float = 0.0
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    def __post_init__(self):
        kind = _KIND_ALIASES.get(str(self.kind).lower())
        if kind is None:
            raise ParameterError(f"unknown scheme kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if self.dt is not None and not self.dt > 0:
            raise ParameterError("dt must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise ParameterError("cfl_safety must lie in (0, 1]")
        if kind == "implicit-euler" and self.dt is None and not math.isfinite(self.dt_max):
            raise ParameterError("implicit-euler needs dt or a finite dt_max")

    @property
    def order(self) -> int:
        return _ORDER[self.kind]

    @property
    def explicit(self) -> bool:
        return self.kind != "implicit-euler"


@dataclass(frozen=True)
class PerturbationSpec:
    """Lower-order term ``f = c(t) u`` with a declared bound ``|c(t)| <= C(t)``."""

    c: Callable[[float], float]
    bound: Callable[[float], float]

    @classmethod
    def constant(cls, c: float, C: Optional[float] = None) -> "PerturbationSpec":
        C = abs(c) if C is None else C
        return cls(lambda t: c, lambda t: C)

    def term(self, t: float, u: np.ndarray) -> np.ndarray:
        return self.c(t) * u


def perturbation_bound_violation(u: np.ndarray, f: np.ndarray, C: float, grid: Grid, p: float, q: float) -> float:
    """``max(|f_i| - C (|u_i| + ...))`` with the gradient part taken at the adjacent faces."""
    v = signed_power(u, q)
    g = np.abs(_face_gradient(v, grid))
    gmax = np.maximum(g[:-1], g[1:])
    if q >= 1:
        allowed = C * (np.abs(u) + gmax ** (p / (q + 1.0)))
    else:
        allowed = C * (np.abs(u) + np.abs(u) ** 0.5 * gmax ** (p / (2.0 * q + 2.0)))
    return float(np.max(np.abs(f) - allowed))


# ---------------------------------------------------------------------------
# right-hand side and step-size control


def rhs(u: np.ndarray, t: float, p: float, q: float, grid: Grid, eps: float = 0.0,
        pert: Optional[PerturbationSpec] = None) -> np.ndarray:
    v = u if q == 1.0 else signed_power(u, q)
    out = apply_values(v, grid, p, eps)
    if pert is not None:
        out = out + pert.term(t, u)
    return out


def _gershgorin_rows(grid: Grid, s: np.ndarray) -> np.ndarray:
    """Row sums |diag| + |off-diag| of the weighted stiffness with face coefficients ``s``."""
    cs = grid.face_conductance * s / grid.face_spacing
    if grid.left_symmetric:
        cs[0] = 0.0
    diag = cs[:-1] + cs[1:]
    off = np.zeros_like(diag)
    off[:-1] += cs[1:-1]
    off[1:] += cs[1:-1]
    return (diag + off) / grid.cell_weights


def stable_dt(u, params: ProblemParams, grid: Grid, cfg: Optional[SchemeConfig] = None,
              pert: Optional[PerturbationSpec] = None, t: float = 0.0) -> float:
    """Explicit-Euler stability limit of the frozen-coefficient linearisation.

    The linearised operator is ``L'(v) diag(q |u|^{q-1})`` with face coefficients
    ``(p-1) |g|^{p-2}``. Its spectral radius is bounded by Gershgorin row sums;
    ``|u|`` and ``|g|`` are floored so the estimate stays finite. For ``p=2, q=1``
    on an interval this gives ``cfl_safety * dx**2 / 2``.
    """
    cfg = SchemeConfig() if cfg is None else cfg
    u = as_values(u, grid)
    p, q = params.p, params.q
    v = u if q == 1.0 else signed_power(u, q)
    g = np.abs(_face_gradient(v, grid))
    if p == 2.0:
        s = np.ones_like(g)
    else:
        gmax = float(g.max())
        floor = max(cfg.g_floor * gmax, 1e-300) if p < 2 else 0.0
        s = (p - 1.0) * np.maximum(g, floor) ** (p - 2.0)
    rows = _gershgorin_rows(grid, s)
    if q == 1.0:
        qcoef = np.ones_like(u)
    else:
        qcoef = q * np.maximum(np.abs(u), U_FLOOR) ** (q - 1.0)
    qn = qcoef.copy()
    qn[1:] = np.maximum(qn[1:], qcoef[:-1])
    qn[:-1] = np.maximum(qn[:-1], qcoef[1:])
    lam = float(np.max(rows * qn))
    if pert is not None:
        lam += abs(pert.c(t))
    dt = cfg.cfl_safety * 2.0 / lam if lam > 0 else math.inf
    return min(dt, cfg.dt_max)


# ---------------------------------------------------------------------------
# steppers


def _explicit(u: np.ndarray, t: float, dt: float, p, q, grid, kind, eps, pert) -> np.ndarray:
    # overflow surfaces as StabilityError below
    with np.errstate(over="ignore", invalid="ignore"):
        if kind == "euler":
            out = u + dt * rhs(u, t, p, q, grid, eps, pert)
        else:
            k1 = rhs(u, t, p, q, grid, eps, pert)
            k2 = rhs(u + 0.5 * dt * k1, t + 0.5 * dt, p, q, grid, eps, pert)
            k3 = rhs(u + 0.5 * dt * k2, t + 0.5 * dt, p, q, grid, eps, pert)
            k4 = rhs(u + dt * k3, t + dt, p, q, grid, eps, pert)
            out = u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise StabilityError(t + dt)
    return out


def step_explicit(u, dt: float, params: ProblemParams, grid: Grid, cfg: Optional[SchemeConfig] = None,
                  pert: Optional[PerturbationSpec] = None) -> Field:
    """One explicit Euler or classical RK4 step."""
    cfg = SchemeConfig() if cfg is None else cfg
    t = getattr(u, "time", 0.0)
    kind = cfg.kind if cfg.explicit else "rk4"
    out = _explicit(as_values(u, grid), t, dt, params.p, params.q, grid, kind, cfg.eps_reg, pert)
    return Field(out, t + dt)


def _jacobian_eps(g: np.ndarray, p: float, eps: float) -> float:
    if p == 2.0:
        return 0.0
    scale = float(np.max(np.abs(g))) if g.size else 0.0
    return max(eps, 1e-8 * scale, 1e-150)


def _newton_solve(u_old: np.ndarray, dt: float, p: float, q: float, grid: Grid, eps: float,
                  source: np.ndarray, newton: NewtonConfig) -> tuple[Optional[np.ndarray], float]:
    """Solve ``u - dt L_h(u^q) = source``. Returns ``(u, residual)``; ``u`` is None on failure.

    For ``q >= 1`` the unknown is ``u``; for ``q < 1`` it is ``v = u^q`` so that
    the Jacobian stays bounded where ``u`` vanishes.
    """
    in_v = q < 1.0
    x = signed_power(u_old, q) if in_v else u_old.copy()

    def residual(x):
        if in_v:
            u = signed_power(x, 1.0 / q)
            return u - dt * apply_values(x, grid, p, eps) - source
        v = x if q == 1.0 else signed_power(x, q)
        return x - dt * apply_values(v, grid, p, eps) - source

    target = newton.abs_tol + newton.rel_tol * float(np.max(np.abs(source)))
    r = residual(x)
    rn = float(np.max(np.abs(r)))
    for _ in range(newton.max_iter):
        if rn <= target:
            return (signed_power(x, 1.0 / q) if in_v else x), rn
        if in_v:
            v = x
            ab = -dt * operator_jacobian_banded(v, grid, p, _jacobian_eps(_face_gradient(v, grid), p, eps))
            ab[1] += (1.0 / q) * np.abs(x) ** (1.0 / q - 1.0)
        else:
            v = x if q == 1.0 else signed_power(x, q)
            ab = operator_jacobian_banded(v, grid, p, _jacobian_eps(_face_gradient(v, grid), p, eps))
            if q != 1.0:
                ab = ab * (q * np.abs(x) ** (q - 1.0))[None, :]
            ab = -dt * ab
            ab[1] += 1.0
        try:
            step = solve_banded((1, 1), ab, -r)
        except (np.linalg.LinAlgError, ValueError):
            return None, rn
        if not np.all(np.isfinite(step)):
            return None, rn
        lam = 1.0
        while True:
            xn = x + lam * step
            rnew = residual(xn)
            rnn = float(np.max(np.abs(rnew)))
            if np.isfinite(rnn) and rnn < (1.0 - 1e-4 * lam) * rn:
                break
            lam *= 0.5
            if lam < newton.damping_min:
                # accept tiny stagnating steps only when already converged to rounding
                return None, rn
        x, r, rn = xn, rnew, rnn
    if rn <= target:
        return (signed_power(x, 1.0 / q) if in_v else x), rn
    return None, rn


def _implicit(u: np.ndarray, t: float, dt: float, p, q, grid, eps, pert, newton: NewtonConfig) -> np.ndarray:
    last = math.inf
    for level in range(newton.max_halvings + 1):
        sub = 2**level
        h = dt / sub
        cur = u
        ok = True
        for j in range(sub):
            tj = t + j * h
            source = cur + h * pert.term(tj, cur) if pert is not None else cur
            nxt, last = _newton_solve(cur, h, p, q, grid, eps, source, newton)
            if nxt is None:
                ok = False
                break
            cur = nxt
        if ok:
            return cur
    raise NewtonError(last, dt / 2**newton.max_halvings, t)


def step_implicit(u, dt: float, params: ProblemParams, grid: Grid, cfg: Optional[SchemeConfig] = None,
                  pert: Optional[PerturbationSpec] = None) -> Field:
    """Backward Euler: solve ``u+ - dt L_h((u+)^q) = u + dt f(u)`` by damped Newton.

    On Newton failure the step is retried as 2, 4, ... substeps, up to
    ``newton.max_halvings`` halvings.
    """
    cfg = SchemeConfig(kind="implicit-euler", dt=dt) if cfg is None else cfg
    t = getattr(u, "time", 0.0)
    out = _implicit(as_values(u, grid), t, dt, params.p, params.q, grid, cfg.eps_reg, pert, cfg.newton)
    return Field(out, t + dt)


# ---------------------------------------------------------------------------
# driver


@dataclass
class Trajectory:
    snapshots: list
    params: ProblemParams
    grid: Grid
    extinction_time: Optional[float] = None

    @property
    def times(self) -> np.ndarray:
        return np.array([f.time for f in self.snapshots])

    @property
    def final(self) -> Field:
        return self.snapshots[-1]


def evolve(u0, t_span: tuple, params: ProblemParams, grid: Grid, scheme: Optional[SchemeConfig] = None,
           pert: Optional[PerturbationSpec] = None, record_every: int = 1,
           extinction_floor: float = EXTINCTION_FLOOR, check_bound: bool = True,
           max_steps: int = 10_000_000) -> tuple[Trajectory, FrequencySeries]:
    """Integrate from ``t_span[0]`` to ``t_span[1]``.

    A frequency record is taken after every accepted step; a snapshot every
    ``record_every`` steps and at the end. The run stops early once ``I`` falls
    below ``extinction_floor * I(a)`` and the extinction time is flagged on
    both returned objects.
    """
    scheme = SchemeConfig() if scheme is None else scheme
    if record_every < 1:
        raise ParameterError("record_every must be >= 1")
    a, b = map(float, t_span)
    if not b > a:
        raise ParameterError("t_span must be increasing")
    p, q = params.p, params.q
    u = as_values(u0, grid).copy()
    if not np.all(np.isfinite(u)):
        raise ParameterError("initial data is not finite")
    eps = scheme.eps_reg
    cw, fw = grid.cell_weights, grid.face_weights

    def record(t, u):
        v = u if q == 1.0 else signed_power(u, q)
        with np.errstate(over="ignore"):
            I = float(np.dot(np.abs(u) ** (q + 1.0), cw))
            D = -float(np.dot(np.abs(_face_gradient(v, grid)) ** p, fw))
        if not (math.isfinite(I) and math.isfinite(D)):
            raise StabilityError(t, "energy overflow")
        return make_record(t, I, D, p, q)

    def check_pert(t, u):
        if pert is None or not check_bound:
            return
        f = pert.term(t, u)
        C = pert.bound(t)
        scale = float(np.max(np.abs(u))) if u.size else 0.0
        if perturbation_bound_violation(u, f, C, grid, p, q) > 1e-12 * max(scale, 1e-300):
            raise PerturbationBoundError(f"perturbation exceeds its declared bound at t={t:.17g}")

    t = a
    records = [record(t, u)]
    bounds = [pert.bound(t)] if pert is not None else None
    snapshots = [Field(u, t)]
    I_a = records[0].I
    extinct_at = None

    fixed_n = None
    if scheme.dt is not None:
        fixed_n = max(1, math.ceil((b - a) / scheme.dt - 1e-9))
        fixed_h = (b - a) / fixed_n
    dt_used = 0.0
    step = 0
    while t < b:
        if step >= max_steps:
            raise RuntimeError(f"exceeded max_steps={max_steps} at t={t:.17g}")
        check_pert(t, u)
        if fixed_n is not None:
            h = fixed_h
            t_next = b if step + 1 == fixed_n else a + (step + 1) * fixed_h
        else:
            h = stable_dt(u, params, grid, scheme, pert, t) if scheme.explicit else scheme.dt_max
            if not math.isfinite(h):
                h = b - t
            if t + h >= b or b - (t + h) < 1e-12 * (b - a):
                h = b - t
            t_next = t + h if h < b - t else b
        if scheme.explicit:
            u = _explicit(u, t, h, p, q, grid, scheme.kind, eps, pert)
        else:
            u = _implicit(u, t, h, p, q, grid, eps, pert, scheme.newton)
        t = t_next
        step += 1
        dt_used = max(dt_used, h)
        rec = record(t, u)
        records.append(rec)
        if bounds is not None:
            bounds.append(pert.bound(t))
        if step % record_every == 0 or t >= b:
            snapshots.append(Field(u, t))
        if I_a > 0 and rec.I < extinction_floor * I_a:
            extinct_at = t
            if snapshots[-1].time != t:
                snapshots.append(Field(u, t))
            break

    traj = Trajectory(snapshots, params, grid, extinct_at)
    series = FrequencySeries(records, p, q, order=scheme.order, dt=dt_used,
                             bound=np.array(bounds) if bounds is not None else None,
                             extinction_time=extinct_at)
    return traj, series
