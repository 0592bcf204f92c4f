"""
Peer exposure maps N_i = Φ_i(a_{-i}; G, θ).

All families are weighted means of peers' actions: each lies between the
smallest and largest action among i's peers and returns a when every peer
plays a. Isolates have no exposure (NaN, ``defined_mask`` false).
"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from peergeo.aggregators.spec import AggregatorSpec, Family
from peergeo.errors import DomainError
from peergeo.netcore.network import Network

logger = logging.getLogger(__name__)

QUANTILE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ExposureVector:
    values: np.ndarray
    defined_mask: np.ndarray

    def filled(self, fill: float = 0.0) -> np.ndarray:
        """Values with isolates replaced by ``fill`` (0 in the structural equation)."""
        return np.where(self.defined_mask, self.values, fill)


def as_actions(net: Network, actions: np.ndarray) -> np.ndarray:
    a = np.asarray(actions, dtype=float).reshape(-1)
    if a.shape[0] != net.n:
        raise DomainError(f"expected {net.n} actions, got {a.shape[0]}", group=net.group_id)
    if not np.all(np.isfinite(a)):
        node = int(np.flatnonzero(~np.isfinite(a))[0])
        raise DomainError("non-finite action", node=node, group=net.group_id)
    return a


def referenced_nodes(net: Network) -> np.ndarray:
    """Nodes that appear as a peer of at least one node."""
    return (net.weights > 0.0).any(axis=0)


def shifted_log_actions(net: Network, actions: np.ndarray, shift: float) -> np.ndarray:
    """log(a_j + c) on referenced peers, 0 elsewhere. Raises if a referenced peer leaves the CES domain."""
    shifted = actions + shift
    ref = referenced_nodes(net)
    bad = ref & (shifted <= 0.0)
    if bad.any():
        node = int(np.flatnonzero(bad)[0])
        raise DomainError(
            f"CES needs a_j + c > 0 on peers; got a_j + c = {shifted[node]:.6g} (c = {shift:g})",
            node=node,
            group=net.group_id,
        )
    out = np.zeros_like(shifted)
    out[ref] = np.log(shifted[ref])
    return out


# -----------------------------
# Families
# -----------------------------

def _lim(net: Network, a: np.ndarray, live: np.ndarray) -> np.ndarray:
    return net.weights[live] @ a


def _ces(net: Network, a: np.ndarray, live: np.ndarray, beta: float, shift: float) -> np.ndarray:
    log_a = shifted_log_actions(net, a, shift)
    g = net.weights[live]
    # (Σ g_ij A_j^β)^{1/β} in log space: exp(logsumexp(β log A_j; b=g_ij) / β)
    lse = logsumexp(np.broadcast_to(beta * log_a, g.shape), b=g, axis=1)
    return np.exp(lse / beta) - shift


def _smoothmax(net: Network, a: np.ndarray, live: np.ndarray, kappa: float) -> np.ndarray:
    g = net.weights[live]
    return logsumexp(np.broadcast_to(kappa * a, g.shape), b=g, axis=1) / kappa


def weighted_quantile(values: np.ndarray, weights: np.ndarray, q: float) -> float:
    """Smallest t with cumulative weight share ≥ q (left-continuous)."""
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    cum = np.cumsum(w) / w.sum()
    k = int(np.searchsorted(cum, q - QUANTILE_TOL, side="left"))
    return float(v[min(k, len(v) - 1)])


def _quantile(net: Network, a: np.ndarray, live: np.ndarray, q: float) -> np.ndarray:
    out = np.empty(int(live.sum()))
    for r, i in enumerate(np.flatnonzero(live)):
        peers = net.peers(i)
        out[r] = weighted_quantile(a[peers], net.weights[i, peers], q)
    return out


# -----------------------------
# Public surface
# -----------------------------

def exposure(net: Network, actions: np.ndarray, spec: AggregatorSpec) -> ExposureVector:
    """Peer exposure of every node of ``net`` at ``actions``."""
    a = as_actions(net, actions)
    live = ~net.isolate_mask
    values = np.full(net.n, np.nan)
    if live.any():
        if spec.family is Family.LIM:
            values[live] = _lim(net, a, live)
        elif spec.family is Family.CES:
            values[live] = _ces(net, a, live, spec.theta, spec.shift)
        elif spec.family is Family.SMOOTHMAX:
            values[live] = _smoothmax(net, a, live, spec.theta)
        else:
            values[live] = _quantile(net, a, live, spec.theta)
    return ExposureVector(values=values, defined_mask=live.copy())


def quasi_arithmetic_mean(
    net: Network,
    actions: np.ndarray,
    generator: Callable[[np.ndarray], np.ndarray],
    inverse: Callable[[np.ndarray], np.ndarray],
) -> ExposureVector:
    """Kolmogorov-Nagumo mean φ⁻¹(Σ_j g_ij φ(a_j)) for a strictly monotone generator φ.

    LIM is φ(a) = a and CES is φ(a) = a^β.
    """
    a = as_actions(net, actions)
    live = ~net.isolate_mask
    ref = referenced_nodes(net)
    phi = np.zeros_like(a)
    phi[ref] = generator(a[ref])
    values = np.full(net.n, np.nan)
    if live.any():
        values[live] = inverse(net.weights[live] @ phi)
    return ExposureVector(values=values, defined_mask=live.copy())


def check_loss(u: np.ndarray, q: float) -> np.ndarray:
    """ρ_q(u) = u (q − 1{u < 0})."""
    u = np.asarray(u, dtype=float)
    return u * (q - (u < 0.0))


def default_shift(actions: np.ndarray) -> float:
    """max(0, 1 − min a): the smallest shift putting every action at or above one."""
    a = np.asarray(actions, dtype=float)
    a = a[np.isfinite(a)]
    if a.size == 0:
        return 0.0
    return float(max(0.0, 1.0 - a.min()))


def panel_exposure(panel, actions: np.ndarray, spec: AggregatorSpec) -> np.ndarray:
    """Exposure for every node of a Panel; isolates carry 0."""
    a = np.asarray(actions, dtype=float).reshape(-1)
    out = np.zeros(panel.n)
    for net, sl in panel.iter_groups():
        out[sl] = exposure(net, a[sl], spec).filled(0.0)
    return out
