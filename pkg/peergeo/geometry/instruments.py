"""
Geometry-induced instrument blocks built from a transport operator:
multi-step propagation, effective-distance shells, torsion, and the hop
distance shells on the raw network.
"""

import logging
import warnings
from typing import Dict, Optional

import numpy as np
from scipy.sparse import csgraph

from peergeo.aggregators.derivatives import DEFAULT_STEP, theta_step
from peergeo.aggregators.spec import AggregatorSpec, THETA_FAMILIES, theta_in_domain
from peergeo.errors import DomainError, FiniteDifferenceWarning, UnsupportedOperationError
from peergeo.geometry.transport import TransportOperator, transport
from peergeo.netcore.network import Network

logger = logging.getLogger(__name__)

# -----------------------------
# CONFIG
# -----------------------------
DEFAULT_K = 3
DEFAULT_H = 4
DEFAULT_EPSILON0 = 1e-8


def _as_matrix(X: np.ndarray, n: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != n:
        raise DomainError(f"covariates have {X.shape[0]} rows for {n} nodes")
    return X


def multistep_instruments(op: TransportOperator, X: np.ndarray, K: int = DEFAULT_K) -> Dict[int, np.ndarray]:
    """{k: P^k X} for k = 2..K by repeated products with P (P^k is never formed)."""
    if K < 2:
        raise DomainError(f"multi-step depth K must be at least 2, got {K}")
    M = _as_matrix(X, op.n)
    out: Dict[int, np.ndarray] = {}
    for k in range(1, K + 1):
        M = op.P @ M
        if k >= 2:
            out[k] = M
    return out


def friction_lengths(P: np.ndarray, epsilon0: float = DEFAULT_EPSILON0) -> np.ndarray:
    """ℓ_ij = max(0, −log(P_ij + ε₀)) on edges P_ij > 0, +inf elsewhere."""
    L = np.full(P.shape, np.inf)
    edge = P > 0.0
    L[edge] = np.maximum(0.0, -np.log(P[edge] + epsilon0))
    return L


def effective_distances(
    op: TransportOperator,
    epsilon0: float = DEFAULT_EPSILON0,
    cutoff: Optional[float] = None,
) -> np.ndarray:
    """Shortest-path friction d(i, j) from every source (Dijkstra); unreachable is +inf.

    ``cutoff`` stops each search at that distance; farther nodes read +inf.
    """
    if not epsilon0 > 0.0:
        raise DomainError(f"friction floor epsilon0 must be positive, got {epsilon0}")
    L = friction_lengths(op.P, epsilon0)
    # null_value=inf keeps clamped zero-length links as edges
    graph = csgraph.csgraph_from_dense(L, null_value=np.inf)
    return csgraph.dijkstra(graph, directed=True, limit=np.inf if cutoff is None else cutoff)


def shell_instruments(distances: np.ndarray, X: np.ndarray, H: int = DEFAULT_H) -> Dict[int, np.ndarray]:
    """{h: Σ_{j: d(i,j) ∈ (h−1, h]} x_j} for h = 2..H."""
    if H < 2:
        raise DomainError(f"shell depth H must be at least 2, got {H}")
    D = np.asarray(distances, dtype=float)
    X = _as_matrix(X, D.shape[0])
    return {h: ((D > h - 1) & (D <= h)).astype(float) @ X for h in range(2, H + 1)}


def torsion_instrument(op: TransportOperator, X: np.ndarray) -> np.ndarray:
    """Z^τ_i = Σ_{j,k} P_ij P_jk |P_ik − P_ij P_jk| x_k over wedges with P_ij, P_jk > 0."""
    X = _as_matrix(X, op.n)
    P = op.P
    Z = np.zeros((op.n, X.shape[1]))
    for i in range(op.n):
        js = np.flatnonzero(P[i] > 0.0)
        if js.size == 0:
            continue
        two_step = P[i, js][:, None] * P[js]
        tau = np.abs(P[i][None, :] - two_step)
        Z[i] = (two_step * tau).sum(axis=0) @ X
    return Z


def hop_distances(net: Network) -> np.ndarray:
    """Directed hop counts on the support of G; unreachable is +inf."""
    graph = csgraph.csgraph_from_dense((net.weights > 0.0).astype(float), null_value=0.0)
    return csgraph.dijkstra(graph, directed=True, unweighted=True)


def hop_shell_instruments(net: Network, X: np.ndarray, h: int = 2, normalize: bool = True) -> np.ndarray:
    """Σ over nodes at exact hop distance h of x_j, or their mean when ``normalize``."""
    if h < 1:
        raise DomainError(f"hop distance must be at least 1, got {h}")
    X = _as_matrix(X, net.n)
    S = (hop_distances(net) == h).astype(float)
    if normalize:
        counts = S.sum(axis=1)
        S = np.divide(S, counts[:, None], out=np.zeros_like(S), where=counts[:, None] > 0)
    return S @ X


def dtheta_multistep(
    net: Network,
    yhat: np.ndarray,
    X: np.ndarray,
    spec: AggregatorSpec,
    step: float = DEFAULT_STEP,
    k: int = 2,
) -> np.ndarray:
    """∂θ(P^k X) by central difference in θ (one-sided at the domain edge)."""
    if spec.family not in THETA_FAMILIES:
        raise UnsupportedOperationError(f"{spec.family.value} has no θ-derivative of transport")
    theta = spec.theta
    h = theta_step(theta, step)

    def pkx(t: float) -> np.ndarray:
        return multistep_instruments(transport(net, yhat, spec.with_theta(t)), X, K=k)[k]

    def ok(t: float) -> bool:
        return theta_in_domain(spec.family, t) and (t > 0.0) == (theta > 0.0)

    if ok(theta - h) and ok(theta + h):
        return (pkx(theta + h) - pkx(theta - h)) / (2.0 * h)
    msg = f"{spec.label()}: one-sided difference for P^{k}X"
    logger.warning(msg)
    warnings.warn(msg, FiniteDifferenceWarning, stacklevel=2)
    if ok(theta + h):
        return (pkx(theta + h) - pkx(theta)) / h
    return (pkx(theta) - pkx(theta - h)) / h
