"""
Per-group interaction networks.

A Network holds one group's n×n interaction weights g_ij (zero diagonal,
nonnegative) together with its isolate bookkeeping. Weights are stored dense:
groups are small (tens to a few hundred nodes) and every downstream operation
(Jacobians, transport powers, wedge sums) is dense linear algebra anyway.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from peergeo.errors import DomainError

logger = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Network:
    group_id: int
    weights: np.ndarray
    row_normalized: bool
    isolate_mask: np.ndarray = field(default=None)
    label: Optional[str] = None

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        _check_square_nonnegative(w)
        if np.any(np.diag(w) != 0.0):
            node = int(np.flatnonzero(np.diag(w) != 0.0)[0])
            raise DomainError("self-loop weight on the diagonal", node=node, group=self.group_id)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        mask = self.isolate_mask
        if mask is None:
            mask = w.sum(axis=1) == 0.0
        mask = np.asarray(mask, dtype=bool)
        mask.setflags(write=False)
        object.__setattr__(self, "isolate_mask", mask)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def name(self) -> str:
        return self.label if self.label is not None else str(self.group_id)

    def peers(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.weights[i] > 0.0)


def _check_square_nonnegative(w: np.ndarray) -> None:
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise DomainError(f"weights must be a square matrix, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise DomainError("weights contain non-finite entries")
    if np.any(w < 0.0):
        i, j = np.argwhere(w < 0.0)[0]
        raise DomainError(f"negative weight g[{i},{j}] = {w[i, j]}", node=int(i))


def row_normalize(raw_weights: np.ndarray, group_id: int = 0, label: Optional[str] = None) -> Network:
    """Scale every non-isolate row of ``raw_weights`` to sum to one.

    All-zero rows are left untouched and flagged as isolates.
    """
    w = np.array(raw_weights, dtype=float, copy=True)
    _check_square_nonnegative(w)
    if np.any(np.diag(w) != 0.0):
        node = int(np.flatnonzero(np.diag(w) != 0.0)[0])
        raise DomainError("self-loop weight on the diagonal", node=node, group=group_id)

    sums = w.sum(axis=1)
    isolates = sums == 0.0
    live = ~isolates
    # rows already summing to exactly one are left bit-for-bit unchanged
    scale = np.where(live & (sums != 1.0), sums, 1.0)
    w = w / scale[:, None]
    return Network(group_id=group_id, weights=w, row_normalized=True, isolate_mask=isolates, label=label)


def max_row_sum_error(net: Network) -> float:
    live = ~net.isolate_mask
    if not live.any():
        return 0.0
    return float(np.max(np.abs(net.weights[live].sum(axis=1) - 1.0)))
