"""Parabolic frequency diagnostics for the doubly nonlinear equation ``u_t = L_{p,phi} u^q``.

Finite-volume discretisation of the weighted p-Laplacian, explicit and
implicit time stepping, energy and frequency diagnostics with pass/fail
verdicts, Barenblatt and spectral closed-form oracles, and a batch CLI.
"""

__version__ = "0.1.0"

from .core import (DomainSpec, Field, Grid, ParameterError, ProblemParams, WeightSpec, delta_of, integrate,
                   make_grid, signed_power)
from .operator import OperatorConfig, apply_operator, duality_defect, face_gradient, flux
from .diagnostics import (FrequencyRecord, FrequencySeries, Verdict, check_convexity, check_identity_I_prime,
                          check_monotonicity, dissipation_D, energy_I, frequency, lower_bound_I, vanishing_order)
from .evolution import PerturbationSpec, SchemeConfig, evolve, stable_dt, step_explicit, step_implicit
from .barenblatt import (BarenblattParams, barenblatt_A, barenblatt_eval, barenblatt_I, barenblatt_N,
                         barenblatt_params, pde_residual)
from .spectral import SpectralSolution, growth_classify, spectral_I, spectral_N

__all__ = [
    "DomainSpec", "Field", "Grid", "ParameterError", "ProblemParams", "WeightSpec", "delta_of", "integrate",
    "make_grid", "signed_power", "OperatorConfig", "apply_operator", "duality_defect", "face_gradient", "flux",
    "FrequencyRecord", "FrequencySeries", "Verdict", "check_convexity", "check_identity_I_prime",
    "check_monotonicity", "dissipation_D", "energy_I", "frequency", "lower_bound_I", "vanishing_order",
    "PerturbationSpec", "SchemeConfig", "evolve", "stable_dt", "step_explicit", "step_implicit",
    "BarenblattParams", "barenblatt_A", "barenblatt_eval", "barenblatt_I", "barenblatt_N", "barenblatt_params",
    "pde_residual", "SpectralSolution", "growth_classify", "spectral_I", "spectral_N",
]
