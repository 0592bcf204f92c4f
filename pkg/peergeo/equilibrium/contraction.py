"""
Lipschitz constants and the contraction certificate |λ|·L_Φ < 1.
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from peergeo.aggregators.spec import Family
from peergeo.equilibrium.params import StructuralParams
from peergeo.errors import DomainError


def ces_lipschitz(lower: float, upper: float, beta: float) -> float:
    """C(a̲, ā, β) = (ā/a̲)^{|β−1|}, the sup of (A_j/Φ_i)^{β−1} with A_j and Φ_i in [a̲, ā].

    The factor is monotone in the ratio, so the sup sits at a corner of the box.
    """
    if not (np.isfinite(lower) and np.isfinite(upper)) or lower <= 0.0 or lower > upper:
        raise DomainError(f"CES Lipschitz constant needs 0 < lower <= upper, got [{lower}, {upper}]")
    return float((upper / lower) ** abs(beta - 1.0))


def aggregator_lipschitz(params: StructuralParams, action_bounds: Optional[Sequence[float]] = None) -> float:
    """L_Φ in the sup norm.

    LIM, SmoothMax and Quantile are monotone and commute with adding a constant,
    so L_Φ = 1. CES needs a box; its bounds are on actions and the positivity
    shift is added before evaluating the constant.
    """
    spec = params.aggregator
    if spec.family is not Family.CES:
        return 1.0
    if action_bounds is None:
        raise DomainError("CES contraction bound needs action bounds (lower, upper)")
    lower, upper = (float(v) + spec.shift for v in action_bounds)
    return ces_lipschitz(lower, upper, spec.theta)


def contraction_bound(params: StructuralParams, action_bounds: Optional[Sequence[float]] = None) -> float:
    return abs(params.lam) * aggregator_lipschitz(params, action_bounds)


def equilibrium_envelope(
    base: np.ndarray,
    lam: float,
    start: Optional[np.ndarray] = None,
) -> Optional[Tuple[float, float]]:
    """A box [L, U] that contains the start and every later iterate.

    Holds for any Φ that stays between the smallest and largest peer action
    (all four families) and isolates whose exposure is 0. None when |λ| ≥ 1.
    """
    b = np.asarray(base, dtype=float).reshape(-1)
    y0 = b if start is None else np.asarray(start, dtype=float).reshape(-1)
    if abs(lam) >= 1.0 or b.size == 0:
        return None
    if lam >= 0.0:
        lower = min(b.min() / (1.0 - lam), b.min(), y0.min())
        upper = max(b.max() / (1.0 - lam), b.max(), y0.max())
        return float(lower), float(upper)
    radius = max(np.abs(b).max() / (1.0 - abs(lam)), np.abs(y0).max())
    return -float(radius), float(radius)


def certifying_shift(lower: float, upper: float, beta: float, lam: float, target: float) -> float:
    """Smallest c ≥ 0 with |λ|·C(lower + c, upper + c, β) ≤ target.

    (upper + c)/(lower + c) falls toward one as c grows, so the bound reaches
    any target above |λ|. Returns 0 when no shift is needed, and +inf when
    |λ| ≥ target (no shift can certify).
    """
    if not 0.0 < target < 1.0:
        raise DomainError(f"contraction target must lie in (0, 1), got {target}")
    if lower > upper:
        raise DomainError(f"action box needs lower <= upper, got [{lower}, {upper}]")
    lam = abs(lam)
    if lam == 0.0 or beta == 1.0:
        return 0.0
    if lam >= target:
        return float("inf")
    r = (target / lam) ** (1.0 / abs(beta - 1.0))
    return float(max(0.0, (upper - r * lower) / (r - 1.0)))
