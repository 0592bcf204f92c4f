"""
Marginal influence W_ij = ∂Φ_i/∂a_j.

LIM returns G itself. SmoothMax rows are softmax probabilities. CES uses
W_ij = g_ij (A_j / Φ̃_i)^{β−1} with A = a + c and Φ̃ the shifted aggregate.
Quantile exposure is not differentiable; ``quantile_influence`` gives the
one-hot subgradient selection instead.
"""

import numpy as np
from scipy.special import softmax

from peergeo.aggregators.norms import as_actions, exposure, shifted_log_actions, weighted_quantile
from peergeo.aggregators.spec import AggregatorSpec, Family
from peergeo.errors import DomainError, UnsupportedOperationError
from peergeo.netcore.network import Network

QUANTILE_TIE_TOL = 1e-12


def jacobian(net: Network, actions: np.ndarray, spec: AggregatorSpec) -> np.ndarray:
    a = as_actions(net, actions)
    if spec.family is Family.QUANTILE:
        raise UnsupportedOperationError("quantile exposure has no Jacobian; use quantile_influence")
    if spec.family is Family.LIM:
        return np.array(net.weights, copy=True)

    live = ~net.isolate_mask
    W = np.zeros((net.n, net.n))
    if not live.any():
        return W
    g = net.weights[live]

    if spec.family is Family.SMOOTHMAX:
        with np.errstate(divide="ignore"):
            logits = np.log(g) + spec.theta * a[None, :]
        W[live] = softmax(logits, axis=1)
        return W

    beta = spec.theta
    log_a = shifted_log_actions(net, a, spec.shift)
    log_phi = np.log(exposure(net, a, spec).values[live] + spec.shift)
    W[live] = np.where(g > 0.0, g * np.exp((beta - 1.0) * (log_a[None, :] - log_phi[:, None])), 0.0)
    return W


def quantile_influence(net: Network, actions: np.ndarray, q: float) -> np.ndarray:
    """Row i splits weight one equally among the peers whose action attains the weighted q-quantile."""
    if not (0.0 < q < 1.0):
        raise DomainError(f"quantile level must lie in (0, 1), got {q!r}")
    a = as_actions(net, actions)
    W = np.zeros((net.n, net.n))
    for i in np.flatnonzero(~net.isolate_mask):
        peers = net.peers(i)
        t = weighted_quantile(a[peers], net.weights[i, peers], q)
        hit = peers[np.isclose(a[peers], t, rtol=0.0, atol=QUANTILE_TIE_TOL)]
        W[i, hit] = 1.0 / len(hit)
    return W
