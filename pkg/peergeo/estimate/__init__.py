"""2SLS / GMM estimation of (γ, λ), first-stage diagnostics and the θ profile search."""

from peergeo.estimate.gmm import GmmOptions, default_grid, gmm, profile_iv
from peergeo.estimate.linear import (
    LinearGmmFit,
    first_stage_diagnostics,
    hansen_j,
    linear_gmm,
    partial_out,
    select_instruments,
    two_sls,
    two_step_objective,
)
from peergeo.estimate.results import EstimationResult, FirstStage, ProfileTrace

__all__ = [
    "EstimationResult",
    "FirstStage",
    "GmmOptions",
    "LinearGmmFit",
    "ProfileTrace",
    "default_grid",
    "first_stage_diagnostics",
    "gmm",
    "hansen_j",
    "linear_gmm",
    "partial_out",
    "profile_iv",
    "select_instruments",
    "two_sls",
    "two_step_objective",
]
