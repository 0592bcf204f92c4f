"""
Transport operator P(θ; ŷ): the aggregator's marginal influence at an
exogenous predictor, row-normalized into a propagation kernel.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from peergeo.aggregators.jacobian import jacobian, quantile_influence
from peergeo.aggregators.norms import as_actions
from peergeo.aggregators.spec import AggregatorSpec, Family
from peergeo.errors import DegenerateRowError
from peergeo.netcore.network import Network

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TransportOperator:
    P: np.ndarray
    theta: Optional[float]
    eval_point: np.ndarray
    source: Family
    isolate_mask: np.ndarray
    group_id: int = 0

    @property
    def n(self) -> int:
        return self.P.shape[0]


def influence_weights(net: Network, yhat: np.ndarray, spec: AggregatorSpec) -> np.ndarray:
    """Unnormalized influence w_ij: the Jacobian, or the quantile selection."""
    if spec.family is Family.QUANTILE:
        return quantile_influence(net, yhat, spec.theta)
    return jacobian(net, yhat, spec)


def transport(net: Network, yhat: np.ndarray, spec: AggregatorSpec) -> TransportOperator:
    """P_ij = w_ij / Σ_m w_im at ŷ; LIM returns G itself. Isolate rows stay zero."""
    yhat = as_actions(net, yhat)
    live = ~net.isolate_mask
    if spec.family is Family.LIM:
        P = np.array(net.weights, copy=True)
    else:
        W = influence_weights(net, yhat, spec)
        sums = W.sum(axis=1)
        dead = live & ~(sums > 0.0)
        if dead.any():
            node = int(np.flatnonzero(dead)[0])
            raise DegenerateRowError("influence weights of a non-isolate row sum to zero", node=node, group=net.group_id)
        # rows already summing to one keep their bits
        scale = np.where(live & (sums != 1.0), sums, 1.0)
        P = W / scale[:, None]
        P[~live] = 0.0
    P.setflags(write=False)
    return TransportOperator(
        P=P,
        theta=spec.theta,
        eval_point=yhat.copy(),
        source=spec.family,
        isolate_mask=net.isolate_mask.copy(),
        group_id=net.group_id,
    )
