"""
Numerical derivatives of exposure in the preference parameter θ.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from peergeo.aggregators.norms import ExposureVector, exposure
from peergeo.aggregators.spec import AggregatorSpec, Family, theta_in_domain
from peergeo.errors import FiniteDifferenceWarning, UnsupportedOperationError
from peergeo.netcore.network import Network

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-4  # relative to max(1, |θ|)


@dataclass(frozen=True, eq=False)
class ThetaDerivative(ExposureVector):
    one_sided: bool = False
    step: float = DEFAULT_STEP


def theta_step(theta: float, step: float = DEFAULT_STEP) -> float:
    return step * max(1.0, abs(theta))


def dtheta_exposure(
    net: Network,
    actions: np.ndarray,
    spec: AggregatorSpec,
    step: float = DEFAULT_STEP,
    allow_quantile: bool = False,
) -> ThetaDerivative:
    """∂θΦ by central difference with h = step·max(1, |θ|).

    When θ−h or θ+h leaves the family's domain the difference falls back to
    the one-sided quotient on the valid side, with a FiniteDifferenceWarning.
    The Quantile family (∂q) is only served when ``allow_quantile`` is set.
    """
    if spec.family is Family.LIM:
        raise UnsupportedOperationError("LIM has no preference parameter to differentiate")
    if spec.family is Family.QUANTILE and not allow_quantile:
        raise UnsupportedOperationError("∂q of the quantile norm is off by default; pass allow_quantile=True")

    theta = spec.theta
    h = theta_step(theta, step)
    lo_ok = theta_in_domain(spec.family, theta - h) and _same_sign(spec.family, theta, theta - h)
    hi_ok = theta_in_domain(spec.family, theta + h) and _same_sign(spec.family, theta, theta + h)

    def phi(t: float) -> np.ndarray:
        return exposure(net, actions, spec.with_theta(t)).values

    if lo_ok and hi_ok:
        values = (phi(theta + h) - phi(theta - h)) / (2.0 * h)
        one_sided = False
    else:
        msg = f"{spec.label()}: θ ± {h:.3g} leaves the domain, using a one-sided difference"
        logger.warning(msg)
        warnings.warn(msg, FiniteDifferenceWarning, stacklevel=2)
        base = phi(theta)
        values = (phi(theta + h) - base) / h if hi_ok else (base - phi(theta - h)) / h
        one_sided = True

    live = ~net.isolate_mask
    return ThetaDerivative(values=np.where(live, values, np.nan), defined_mask=live.copy(), one_sided=one_sided, step=h)


def _same_sign(family: Family, a: float, b: float) -> bool:
    # CES is defined on both sides of zero but the difference must not straddle it
    return family is not Family.CES or (a > 0.0) == (b > 0.0)
