"""Equilibrium of the norm game: fixed-point solver and uniqueness diagnostics."""

from peergeo.equilibrium.contraction import (
    aggregator_lipschitz,
    ces_lipschitz,
    certifying_shift,
    contraction_bound,
    equilibrium_envelope,
)
from peergeo.equilibrium.logit import logit_fixed_point
from peergeo.equilibrium.params import SolveReport, StructuralParams
from peergeo.equilibrium.shocks import draw_shocks
from peergeo.equilibrium.solver import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    iterate_fixed_point,
    relative_change,
    solve_equilibrium,
    structural_base,
)

__all__ = [
    "DEFAULT_MAX_ITER",
    "DEFAULT_TOL",
    "SolveReport",
    "StructuralParams",
    "aggregator_lipschitz",
    "ces_lipschitz",
    "certifying_shift",
    "contraction_bound",
    "draw_shocks",
    "equilibrium_envelope",
    "iterate_fixed_point",
    "logit_fixed_point",
    "relative_change",
    "solve_equilibrium",
    "structural_base",
]
