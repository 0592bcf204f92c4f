"""
Simulation designs: the dispersion-bridge group and the two-star fixture.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional

import numpy as np

from peergeo.aggregators.derivatives import dtheta_exposure
from peergeo.aggregators.norms import exposure
from peergeo.aggregators.spec import AggregatorSpec, Family
from peergeo.errors import DesignError, DomainError
from peergeo.geometry.instruments import effective_distances, hop_shell_instruments, shell_instruments
from peergeo.geometry.transport import transport
from peergeo.montecarlo.config import MAX_DESIGN_ATTEMPTS, BridgeParams
from peergeo.netcore.network import Network, row_normalize
from peergeo.netcore.panel import INTERCEPT_NAME

logger = logging.getLogger(__name__)

# -----------------------------
# CONFIG
# -----------------------------
COVARIATE_NAMES = (INTERCEPT_NAME, "x1")
TWO_STAR_BETA = 1.2
PERIPHERAL_STEP = 0.1  # peripheral covariates 1 + 0.1·k keep hub rows close to uniform
COLLAPSE_TOL = 1e-10
NORM_SPREAD_TOL = 1e-12


class GroupDraw(NamedTuple):
    network: Network
    X: np.ndarray
    block: np.ndarray
    anchor: np.ndarray


# -----------------------------
# Dispersion bridge
# -----------------------------

def _block_graph(rng: np.random.Generator, size: int, p: float) -> np.ndarray:
    upper = np.triu(rng.random((size, size)) < p, k=1)
    return (upper | upper.T).astype(float)


def _wire_block(rng: np.random.Generator, adj: np.ndarray, start: int, size: int, params: BridgeParams) -> bool:
    """Tie each leaf of one block to a random anchor; False when some anchor draws no leaf."""
    hubs = np.arange(start, start + params.hubs)
    leaves = np.arange(start + params.hubs, start + size)
    owner = hubs[rng.integers(params.hubs, size=leaves.size)]
    if np.unique(owner).size < params.hubs:
        return False
    adj[leaves, owner] = adj[owner, leaves] = 1.0
    adj[hubs[:-1], hubs[1:]] = adj[hubs[1:], hubs[:-1]] = 1.0
    if params.d_in > 0.0 and leaves.size > 1:
        extra = _block_graph(rng, leaves.size, min(1.0, params.d_in / (leaves.size - 1)))
        sub = np.ix_(leaves, leaves)
        adj[sub] = np.maximum(adj[sub], extra)
    return True


def dispersion_bridge(
    n: int,
    seed: int,
    params: BridgeParams = BridgeParams(),
    group_id: int = 0,
) -> GroupDraw:
    """Two equal blocks of anchored stars joined by ``bridges`` anchor-to-anchor edges.

    Block nodes are ``params.hubs`` anchors (x = 0, chained when more than
    one) followed by leaves, each tied to one anchor drawn uniformly, plus
    Erdős–Rényi leaf-leaf ties of expected degree ``d_in``. Leaves draw
    x ~ N(0, σ_A²) in block A and N(0, σ_B²) in block B. A draw that leaves
    an anchor without leaves is redrawn from the next sub-seed; DesignError
    after MAX_DESIGN_ATTEMPTS tries.
    """
    if n < 8:
        raise DomainError(f"dispersion-bridge groups need at least 8 nodes, got {n}")
    half = n // 2
    sizes = (half, n - half)
    if half < 2 * params.hubs:
        raise DomainError(f"blocks of {half} nodes cannot give {params.hubs} anchors a leaf each")
    block = np.repeat([0, 1], sizes)
    anchor = np.zeros(n, dtype=bool)
    anchor[:params.hubs] = anchor[half:half + params.hubs] = True

    for attempt in range(MAX_DESIGN_ATTEMPTS):
        rng = np.random.default_rng([seed, attempt])
        adj = np.zeros((n, n))
        if not all(_wire_block(rng, adj, start, m, params) for start, m in zip((0, half), sizes)):
            logger.debug("bridge design seed %d attempt %d: anchor without leaves, redrawing", seed, attempt)
            continue
        if params.bridges:
            pairs = rng.choice(params.hubs * params.hubs, size=params.bridges, replace=False)
            a, b = np.divmod(pairs, params.hubs)
            adj[a, half + b] = adj[half + b, a] = 1.0
        x = rng.normal(0.0, 1.0, size=n) * np.where(block == 0, params.sigma_a, params.sigma_b)
        x[anchor] = 0.0
        X = np.column_stack([np.ones(n), x])
        return GroupDraw(row_normalize(adj, group_id=group_id), X, block, anchor)

    raise DesignError(f"no dispersion-bridge draw with every anchor tied for seed {seed} in {MAX_DESIGN_ATTEMPTS} attempts")


# -----------------------------
# Two stars
# -----------------------------

def two_star(m_a: int, m_b: int, equal_hub_covariates: bool = True) -> GroupDraw:
    """Two disconnected stars: peripherals put weight 1 on their hub, hubs 1/m on each peripheral.

    Node order: hub a, its m_a peripherals, hub b, its m_b peripherals.
    Covariates are [1, x] with x = 1 on hubs (hub b gets 2 unless
    ``equal_hub_covariates``) and x = 1 + 0.1·k on the k-th peripheral.
    """
    if m_a < 2 or m_b < 2:
        raise DomainError(f"each star needs at least 2 peripherals, got {m_a} and {m_b}")
    n = m_a + m_b + 2
    W = np.zeros((n, n))
    x = np.empty(n)
    block = np.empty(n, dtype=int)
    anchor = np.zeros(n, dtype=bool)
    start = 0
    for star, m in enumerate((m_a, m_b)):
        hub, leaves = start, np.arange(start + 1, start + 1 + m)
        W[leaves, hub] = 1.0
        anchor[hub] = True
        W[hub, leaves] = 1.0 / m
        x[hub] = 1.0 if (equal_hub_covariates or star == 0) else 2.0
        x[leaves] = 1.0 + PERIPHERAL_STEP * np.arange(1, m + 1)
        block[start:start + m + 1] = star
        start += m + 1
    return GroupDraw(Network(group_id=0, weights=W, row_normalized=True), np.column_stack([np.ones(n), x]), block, anchor)


@dataclass(frozen=True)
class TwoStarReport:
    m_a: int
    m_b: int
    beta: float
    equal_hub_covariates: bool
    peripheral_dtheta_max: float
    peripheral_norm_spread: float
    peripheral_norms: Dict[str, float]
    shell2_max_error: float
    hop_shell2_max_error: float

    def failed_checks(self) -> List[str]:
        failed = []
        if self.peripheral_dtheta_max > COLLAPSE_TOL:
            failed.append("peripheral d/dbeta Phi is not zero")
        if self.peripheral_norm_spread > NORM_SPREAD_TOL:
            failed.append("predicted norms differ across hubs")
        if self.shell2_max_error > COLLAPSE_TOL:
            failed.append("effective-distance shell 2 misses the sibling sums")
        if self.hop_shell2_max_error > COLLAPSE_TOL:
            failed.append("hop shell 2 misses the sibling sums")
        return failed

    @property
    def collapse(self) -> bool:
        """No excluded first-stage variation across peripherals and both shell-2 blocks equal the sibling sums."""
        return not self.failed_checks()

    @property
    def shells_match(self) -> bool:
        return self.shell2_max_error <= COLLAPSE_TOL and self.hop_shell2_max_error <= COLLAPSE_TOL

    @property
    def shell2_in_range(self) -> bool:
        """Sibling friction is about log m, inside shell 2 only for 3 ≤ m ≤ 7 peripherals."""
        return all(1.0 < np.log(m) <= 2.0 for m in (self.m_a, self.m_b))

    def to_dict(self) -> dict:
        return {
            "m_a": self.m_a,
            "m_b": self.m_b,
            "beta": self.beta,
            "equal_hub_covariates": self.equal_hub_covariates,
            "peripheral_dtheta_max": self.peripheral_dtheta_max,
            "peripheral_norm_spread": self.peripheral_norm_spread,
            "peripheral_norms": self.peripheral_norms,
            "shell2_max_error": self.shell2_max_error,
            "hop_shell2_max_error": self.hop_shell2_max_error,
            "shell2_in_range": self.shell2_in_range,
            "collapse": self.collapse,
            "failed_checks": self.failed_checks(),
        }


def sibling_sums(draw: GroupDraw) -> np.ndarray:
    """Σ x_j over the other peripherals of the same hub; zero rows for hubs."""
    W = draw.network.weights
    out = np.zeros_like(draw.X)
    for i in range(draw.network.n):
        hubs = np.flatnonzero(W[i])
        if hubs.size != 1:
            continue
        siblings = np.flatnonzero(W[hubs[0]] > 0.0)
        siblings = siblings[siblings != i]
        out[i] = draw.X[siblings].sum(axis=0)
    return out


def two_star_diagnostics(
    m_a: int = 5,
    m_b: int = 5,
    equal_hub_covariates: bool = True,
    beta: float = TWO_STAR_BETA,
    shift: float = 0.0,
    gamma: Optional[np.ndarray] = None,
) -> TwoStarReport:
    """Collapse checks for the two-star fixture at the oracle predictor ŷ = Xγ (γ = (0, 1)).

    The hop shell equals the sibling sums for every star size; the
    effective-distance shell only while log m ∈ (1, 2], so sizes outside
    3..7 report no collapse.
    """
    draw = two_star(m_a, m_b, equal_hub_covariates)
    net, X = draw.network, draw.X
    gamma = np.array([0.0, 1.0]) if gamma is None else np.asarray(gamma, dtype=float)
    yhat = X @ gamma
    spec = AggregatorSpec(Family.CES, beta, shift)

    peripheral = ~draw.anchor

    phi = exposure(net, yhat, spec).filled(0.0)
    dphi = dtheta_exposure(net, yhat, spec).filled(0.0)

    op = transport(net, yhat, spec)
    shells = shell_instruments(effective_distances(op), X, H=2)[2]
    hop = hop_shell_instruments(net, X, h=2, normalize=False)
    target = sibling_sums(draw)

    return TwoStarReport(
        m_a=m_a,
        m_b=m_b,
        beta=beta,
        equal_hub_covariates=equal_hub_covariates,
        peripheral_dtheta_max=float(np.abs(dphi[peripheral]).max()),
        peripheral_norm_spread=float(np.ptp(phi[peripheral])),
        peripheral_norms={"a": float(phi[1]), "b": float(phi[m_a + 2])},
        shell2_max_error=float(np.abs(shells[peripheral] - target[peripheral]).max()),
        hop_shell2_max_error=float(np.abs(hop[peripheral] - target[peripheral]).max()),
    )
