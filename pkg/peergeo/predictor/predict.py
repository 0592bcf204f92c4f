"""
Exogenous predictor ŷ = m(X) used to evaluate influence objects.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from peergeo.errors import DomainError
from peergeo.netcore.panel import Panel, require_full_rank

logger = logging.getLogger(__name__)

DEFAULT_FOLDS = 5


class PredictorKind(str, Enum):
    ORACLE = "oracle"
    OLS = "ols"
    CROSSFIT = "crossfit"

    @classmethod
    def parse(cls, value: Union[str, "PredictorKind"]) -> "PredictorKind":
        if isinstance(value, PredictorKind):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        try:
            return cls(key)
        except ValueError:
            raise DomainError(f"unknown predictor {value!r}; expected oracle, ols or crossfit") from None


@dataclass(frozen=True, eq=False)
class PredictorSpec:
    kind: PredictorKind = PredictorKind.CROSSFIT
    folds: int = DEFAULT_FOLDS
    include_group_effects: bool = False
    oracle_gamma: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        kind = PredictorKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is PredictorKind.CROSSFIT and int(self.folds) < 2:
            raise DomainError(f"cross-fitting needs at least 2 folds, got {self.folds}")
        object.__setattr__(self, "folds", int(self.folds))
        if kind is PredictorKind.ORACLE:
            if self.oracle_gamma is None:
                raise DomainError("the oracle predictor needs oracle_gamma")
            object.__setattr__(self, "oracle_gamma", np.asarray(self.oracle_gamma, dtype=float).reshape(-1))


def predictor_design(panel: Panel, include_group_effects: bool) -> np.ndarray:
    """X, plus dummies for every group but the first when requested."""
    if not include_group_effects or len(panel.groups) < 2:
        return panel.X
    dummies = (panel.group_index[:, None] == np.arange(1, len(panel.groups))[None, :]).astype(float)
    return np.hstack([panel.X, dummies])


def _design_names(panel: Panel, include_group_effects: bool):
    names = list(panel.x_names)
    if include_group_effects and len(panel.groups) >= 2:
        names += [f"group_{net.name}" for net in panel.groups[1:]]
    return names


def assign_folds(panel: Panel, folds: int, seed: int) -> np.ndarray:
    """Fold label per node: shuffled within each group, then dealt round-robin."""
    rng = np.random.default_rng(seed)
    out = np.empty(panel.n, dtype=int)
    for _, sl in panel.iter_groups():
        size = sl.stop - sl.start
        perm = rng.permutation(size)
        labels = np.empty(size, dtype=int)
        labels[perm] = np.arange(size) % folds
        out[sl] = labels
    return out


def _fit(D: np.ndarray, y: np.ndarray, split: str, names) -> np.ndarray:
    require_full_rank(D, label=split, names=names)
    coef, *_ = np.linalg.lstsq(D, y, rcond=None)
    return coef


def predict(panel: Panel, spec: PredictorSpec, seed: int = 0) -> np.ndarray:
    """ŷ per node.

    Oracle returns Xγ₀. OLS fits y on X in-sample. CrossFit predicts each
    fold from a model fit on the other folds, so y_i never enters ŷ_i.
    """
    if spec.kind is PredictorKind.ORACLE:
        if spec.oracle_gamma.shape[0] != panel.p:
            raise DomainError(f"oracle_gamma has {spec.oracle_gamma.shape[0]} entries for {panel.p} covariates")
        return panel.X @ spec.oracle_gamma

    y = panel.require_outcome()
    D = predictor_design(panel, spec.include_group_effects)
    names = _design_names(panel, spec.include_group_effects)

    if spec.kind is PredictorKind.OLS:
        return D @ _fit(D, y, "full sample", names)

    folds = assign_folds(panel, spec.folds, seed)
    yhat = np.empty(panel.n)
    for f in range(spec.folds):
        test = folds == f
        if not test.any():
            continue
        coef = _fit(D[~test], y[~test], f"training split for fold {f}", names)
        yhat[test] = D[test] @ coef
    logger.debug("cross-fitted predictor over %d folds (seed %d)", spec.folds, seed)
    return yhat
