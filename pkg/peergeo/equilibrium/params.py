"""
Structural parameters of the norm game and the solver's report.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from peergeo.aggregators.spec import AggregatorSpec
from peergeo.errors import DomainError


@dataclass(frozen=True, eq=False)
class StructuralParams:
    """y_is = x_is'γ + λ Φ_i(y) + ζ_s + ε_is.

    ``lam`` is the composite peer coefficient. ``group_effects`` holds one ζ_s
    per group (in panel group order); None means all zero.
    """

    gamma: np.ndarray
    lam: float
    aggregator: AggregatorSpec
    group_effects: Optional[np.ndarray] = None
    sigma_eps: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=float).reshape(-1))
        if self.group_effects is not None:
            object.__setattr__(self, "group_effects", np.asarray(self.group_effects, dtype=float).reshape(-1))
        if not np.isfinite(self.lam):
            raise DomainError(f"peer coefficient must be finite, got {self.lam!r}")
        if not (self.sigma_eps >= 0.0):
            raise DomainError(f"sigma_eps must be nonnegative, got {self.sigma_eps!r}")


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_residual: float
    converged: bool
    contraction_bound: Optional[float] = None
    damped: bool = False
    group_iterations: Tuple[int, ...] = field(default=())

    @property
    def unique(self) -> bool:
        """True when the contraction bound certifies a unique fixed point."""
        return self.contraction_bound is not None and self.contraction_bound < 1.0

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "converged": self.converged,
            "contraction_bound": self.contraction_bound,
            "damped": self.damped,
        }
