"""
Estimation result containers and their JSON / flat-row serializations.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np


def _num(v: Optional[float]) -> Optional[float]:
    if v is None:
        return None
    v = float(v)
    return v if np.isfinite(v) else None


@dataclass(frozen=True)
class FirstStage:
    partial_r2: float
    f_stat: float
    f_stat_robust: float
    excluded_count: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "partial_r2": _num(self.partial_r2),
            "f_stat": _num(self.f_stat),
            "f_stat_robust": _num(self.f_stat_robust),
            "excluded_count": self.excluded_count,
        }


@dataclass(frozen=True, eq=False)
class EstimationResult:
    gamma_hat: np.ndarray
    lambda_hat: float
    vcov: np.ndarray
    se_lambda: float
    first_stage: Optional[FirstStage]
    j_stat: Optional[float]
    theta_used: Optional[float]
    n_used: int
    j_pvalue: Optional[float] = None
    j_df: int = 0
    n_clusters: int = 0
    cov_type: str = "cluster"
    param_names: Tuple[str, ...] = ()
    instruments: Tuple[str, ...] = ()
    dropped_instruments: Tuple[str, ...] = ()
    converged: bool = True
    criterion: Optional[float] = None
    notes: Tuple[str, ...] = field(default=())

    @property
    def params(self) -> np.ndarray:
        return np.append(self.gamma_hat, self.lambda_hat)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.vcov), 0.0, None))

    def to_dict(self) -> Dict[str, Any]:
        names = list(self.param_names) or [f"gamma{k}" for k in range(len(self.gamma_hat))] + ["lambda"]
        se = self.se
        return {
            "theta": _num(self.theta_used),
            "lambda_hat": _num(self.lambda_hat),
            "se_lambda": _num(self.se_lambda),
            "params": {n: _num(v) for n, v in zip(names, self.params)},
            "se": {n: _num(v) for n, v in zip(names, se)},
            "first_stage": None if self.first_stage is None else self.first_stage.to_dict(),
            "j_stat": _num(self.j_stat),
            "j_pvalue": _num(self.j_pvalue),
            "j_df": self.j_df,
            "n_used": self.n_used,
            "n_clusters": self.n_clusters,
            "cov_type": self.cov_type,
            "instruments": list(self.instruments),
            "dropped_instruments": list(self.dropped_instruments),
            "converged": self.converged,
            "criterion": _num(self.criterion),
            "notes": list(self.notes),
        }

    def to_row(self) -> Dict[str, Any]:
        fs = self.first_stage
        return {
            "theta": self.theta_used,
            "lambda_hat": self.lambda_hat,
            "se_lambda": self.se_lambda,
            "partial_r2": None if fs is None else fs.partial_r2,
            "f_stat": None if fs is None else fs.f_stat,
            "j_stat": self.j_stat,
        }


@dataclass(frozen=True, eq=False)
class ProfileTrace:
    grid: Tuple[Optional[float], ...]
    criterion: np.ndarray
    lambda_path: np.ndarray
    argmin: Optional[float]
    flat: bool = False
    failures: Dict[Any, str] = field(default_factory=dict)
    results: Tuple[Optional[EstimationResult], ...] = ()

    def to_rows(self) -> List[Dict[str, Any]]:
        rows = []
        for k, theta in enumerate(self.grid):
            res = self.results[k] if k < len(self.results) else None
            row = res.to_row() if res is not None else {
                "theta": theta, "lambda_hat": None, "se_lambda": None, "partial_r2": None, "f_stat": None, "j_stat": None,
            }
            row["criterion"] = None if not np.isfinite(self.criterion[k]) else float(self.criterion[k])
            row["error"] = self.failures.get(theta, "")
            rows.append(row)
        return rows

    def to_dict(self) -> Dict[str, Any]:
        return {
            "grid": [None if t is None else float(t) for t in self.grid],
            "criterion": [_num(c) for c in self.criterion],
            "lambda_path": [_num(v) for v in self.lambda_path],
            "argmin": _num(self.argmin),
            "flat": self.flat,
            "failures": {str(k): v for k, v in self.failures.items()},
        }


def param_names(x_names: Sequence[str], k: int) -> Tuple[str, ...]:
    names = list(x_names) if x_names else [f"x{j}" for j in range(k)]
    return tuple(names) + ("lambda",)
