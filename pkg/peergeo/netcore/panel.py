"""
Grouped network data: the per-group Networks stacked with node covariates,
outcomes and cluster labels.

Nodes are stored group by group, in group order, so group s occupies the
contiguous slice ``panel.group_slices()[s]`` of every per-node array. That
position is the stable global node index.
"""

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from peergeo.errors import DomainError, IsolateWarning, RankError
from peergeo.netcore.network import Network, row_normalize

logger = logging.getLogger(__name__)

INTERCEPT_NAME = "const"


@dataclass(frozen=True, eq=False)
class Panel:
    groups: Tuple[Network, ...]
    X: np.ndarray
    y: Optional[np.ndarray] = None
    cluster_id: Optional[np.ndarray] = None
    x_names: Tuple[str, ...] = ()
    node_labels: Tuple[str, ...] = ()
    dropped_groups: Tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        groups = tuple(self.groups)
        object.__setattr__(self, "groups", groups)
        sizes = [g.n for g in groups]
        n_total = int(sum(sizes))

        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != n_total:
            raise DomainError(f"X has {X.shape[0]} rows but the groups hold {n_total} nodes")
        object.__setattr__(self, "X", X)

        if self.y is not None:
            y = np.asarray(self.y, dtype=float).reshape(-1)
            if y.shape[0] != n_total:
                raise DomainError(f"y has {y.shape[0]} entries but the groups hold {n_total} nodes")
            object.__setattr__(self, "y", y)

        group_index = np.repeat(np.arange(len(groups)), sizes)
        object.__setattr__(self, "_group_index", group_index)
        if self.cluster_id is None:
            object.__setattr__(self, "cluster_id", np.array([g.group_id for g in groups for _ in range(g.n)], dtype=int))
        else:
            cl = np.asarray(self.cluster_id).reshape(-1)
            if cl.shape[0] != n_total:
                raise DomainError("cluster_id length does not match the node count")
            object.__setattr__(self, "cluster_id", cl)

        if not self.x_names:
            object.__setattr__(self, "x_names", tuple(f"x{k}" for k in range(X.shape[1])))
        elif len(self.x_names) != X.shape[1]:
            raise DomainError("x_names length does not match the covariate count")
        if not self.node_labels:
            object.__setattr__(self, "node_labels", tuple(str(i) for i in range(n_total)))

    # -----------------------------
    # Shape helpers
    # -----------------------------

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def group_index(self) -> np.ndarray:
        """Position of each node's group in ``groups``."""
        return self._group_index

    def group_slices(self) -> List[slice]:
        out, start = [], 0
        for g in self.groups:
            out.append(slice(start, start + g.n))
            start += g.n
        return out

    def iter_groups(self) -> Iterator[Tuple[Network, slice]]:
        return zip(self.groups, self.group_slices())

    @property
    def isolate_mask(self) -> np.ndarray:
        if not self.groups:
            return np.zeros(0, dtype=bool)
        return np.concatenate([g.isolate_mask for g in self.groups])

    def estimation_mask(self) -> np.ndarray:
        """Nodes that enter exposure construction and estimation (non-isolates)."""
        return ~self.isolate_mask

    def with_outcome(self, y: np.ndarray) -> "Panel":
        return replace(self, y=np.asarray(y, dtype=float))

    def require_outcome(self) -> np.ndarray:
        if self.y is None:
            raise DomainError("panel has no outcome column y")
        return self.y


def require_full_rank(X: np.ndarray, label: str = "estimation sample", names: Sequence[str] = ()) -> None:
    """Raise RankError unless ``X`` has full column rank."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] < X.shape[1]:
        raise RankError(f"{X.shape[0]} rows for {X.shape[1]} columns", columns=names, split=label)
    rank = np.linalg.matrix_rank(X)
    if rank < X.shape[1]:
        bad = dependent_columns(X, names)
        raise RankError(f"covariate matrix has rank {rank} < {X.shape[1]}", columns=bad, split=label)


def dependent_columns(X: np.ndarray, names: Sequence[str]) -> List[str]:
    """Columns that add nothing to the span of the columns before them."""
    names = list(names) if names else [f"col{k}" for k in range(X.shape[1])]
    bad, kept = [], []
    for k in range(X.shape[1]):
        trial = X[:, kept + [k]]
        if np.linalg.matrix_rank(trial) <= len(kept):
            bad.append(names[k])
        else:
            kept.append(k)
    return bad


# -----------------------------
# Isolate handling
# -----------------------------

def drop_isolates(panel: Panel, renormalize: bool = True) -> Panel:
    """Restrict ``panel`` to non-isolates.

    With ``renormalize`` the surviving rows are re-normalized over surviving
    peers and the pass repeats until no isolate is left (losing a peer can
    turn a node into an isolate). Without it, surviving weights are kept as
    they are, so rows that pointed at a removed node sum below one.
    Groups left empty are removed with an IsolateWarning.
    """
    keep_rows: List[np.ndarray] = []
    groups: List[Network] = []
    dropped = list(panel.dropped_groups)

    for net, sl in panel.iter_groups():
        idx = np.arange(net.n)
        w = net.weights
        alive = ~net.isolate_mask
        while True:
            sub = w[np.ix_(alive, alive)]
            if not renormalize:
                break
            new_iso = sub.sum(axis=1) == 0.0
            if not new_iso.any():
                break
            pos = np.flatnonzero(alive)
            alive[pos[new_iso]] = False
        if not alive.any():
            msg = f"group {net.name} has no non-isolate nodes; group dropped"
            logger.warning(msg)
            warnings.warn(msg, IsolateWarning, stacklevel=2)
            dropped.append(net.name)
            continue
        sub = w[np.ix_(alive, alive)]
        if renormalize:
            new_net = row_normalize(sub, group_id=net.group_id, label=net.label)
        else:
            new_net = Network(group_id=net.group_id, weights=sub, row_normalized=False, label=net.label)
        groups.append(new_net)
        keep_rows.append(idx[alive] + sl.start)

    rows = np.concatenate(keep_rows) if keep_rows else np.zeros(0, dtype=int)
    return Panel(
        groups=tuple(groups),
        X=panel.X[rows],
        y=None if panel.y is None else panel.y[rows],
        cluster_id=panel.cluster_id[rows],
        x_names=panel.x_names,
        node_labels=tuple(panel.node_labels[i] for i in rows),
        dropped_groups=tuple(dropped),
    )
