"""
Aggregator families and their preference parameter.
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Union

import numpy as np

from peergeo.errors import DomainError


class Family(str, Enum):
    LIM = "lim"
    CES = "ces"
    SMOOTHMAX = "smoothmax"
    QUANTILE = "quantile"

    @classmethod
    def parse(cls, value: Union[str, "Family"]) -> "Family":
        if isinstance(value, Family):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        aliases = {"linearinmeans": "lim", "power": "ces", "powermean": "ces", "softmax": "smoothmax", "median": "quantile"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise DomainError(f"unknown aggregator family {value!r}; expected one of lim, ces, smoothmax, quantile") from None

    @property
    def theta_name(self) -> Optional[str]:
        return {Family.CES: "beta", Family.SMOOTHMAX: "kappa", Family.QUANTILE: "q"}.get(self)


# Families whose exposure is differentiable in peers' actions.
SMOOTH_FAMILIES = frozenset({Family.LIM, Family.CES, Family.SMOOTHMAX})
# Families with a preference parameter that BRUZ-style derivatives vary.
THETA_FAMILIES = frozenset({Family.CES, Family.SMOOTHMAX})


def theta_in_domain(family: Family, theta: Optional[float]) -> bool:
    if family is Family.LIM:
        return True
    if theta is None or not np.isfinite(theta):
        return False
    if family is Family.CES:
        return theta != 0.0
    if family is Family.SMOOTHMAX:
        return theta > 0.0
    return 0.0 < theta < 1.0


@dataclass(frozen=True)
class AggregatorSpec:
    """Which peer norm to use.

    ``theta`` is β for CES, κ for SmoothMax, q for Quantile and unused for LIM.
    ``shift`` is the positivity shift c added to actions inside CES and
    subtracted from the result, so exposure stays in outcome units.
    """

    family: Family
    theta: Optional[float] = None
    shift: float = 0.0

    def __post_init__(self) -> None:
        family = Family.parse(self.family)
        object.__setattr__(self, "family", family)
        if family is Family.LIM:
            object.__setattr__(self, "theta", None)
        else:
            theta = None if self.theta is None else float(self.theta)
            if not theta_in_domain(family, theta):
                raise DomainError(f"{family.value}: invalid {family.theta_name} = {self.theta!r}")
            object.__setattr__(self, "theta", theta)
        shift = float(self.shift)
        if not np.isfinite(shift) or shift < 0.0:
            raise DomainError(f"positivity shift must be finite and nonnegative, got {self.shift!r}")
        object.__setattr__(self, "shift", shift)

    @property
    def smooth(self) -> bool:
        return self.family in SMOOTH_FAMILIES

    @property
    def has_theta(self) -> bool:
        return self.family is not Family.LIM

    def with_theta(self, theta: Optional[float]) -> "AggregatorSpec":
        return replace(self, theta=theta)

    def with_shift(self, shift: float) -> "AggregatorSpec":
        return replace(self, shift=shift)

    def label(self) -> str:
        if self.family is Family.LIM:
            return "lim"
        return f"{self.family.value}({self.family.theta_name}={self.theta:g})"
