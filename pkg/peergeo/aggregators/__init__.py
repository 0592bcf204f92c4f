"""Peer aggregators: exposure maps, Jacobians and θ-derivatives."""

from peergeo.aggregators.derivatives import DEFAULT_STEP, ThetaDerivative, dtheta_exposure, theta_step
from peergeo.aggregators.jacobian import jacobian, quantile_influence
from peergeo.aggregators.norms import (
    ExposureVector,
    check_loss,
    default_shift,
    exposure,
    panel_exposure,
    quasi_arithmetic_mean,
    weighted_quantile,
)
from peergeo.aggregators.spec import SMOOTH_FAMILIES, THETA_FAMILIES, AggregatorSpec, Family, theta_in_domain

__all__ = [
    "DEFAULT_STEP",
    "SMOOTH_FAMILIES",
    "THETA_FAMILIES",
    "AggregatorSpec",
    "ExposureVector",
    "Family",
    "ThetaDerivative",
    "check_loss",
    "default_shift",
    "dtheta_exposure",
    "exposure",
    "jacobian",
    "panel_exposure",
    "quantile_influence",
    "quasi_arithmetic_mean",
    "theta_in_domain",
    "theta_step",
    "weighted_quantile",
]
