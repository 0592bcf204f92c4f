"""
Shock draws for simulated equilibria.
"""

import numpy as np

from peergeo.errors import DomainError
from peergeo.netcore.panel import Panel

DEFAULT_GROUP_SHARE = 0.5


def draw_shocks(
    panel: Panel,
    sigma_eps: float,
    rng: np.random.Generator,
    correlated: bool = False,
    group_share: float = DEFAULT_GROUP_SHARE,
) -> np.ndarray:
    """ε_is ~ N(0, σ²) i.i.d., or ε_is = u_s + ν_is with Var(u_s) = share·σ² when ``correlated``.

    The total variance is σ² in both cases.
    """
    if sigma_eps < 0.0:
        raise DomainError(f"sigma_eps must be nonnegative, got {sigma_eps}")
    if not correlated:
        return rng.normal(0.0, sigma_eps, size=panel.n)
    if not (0.0 <= group_share <= 1.0):
        raise DomainError(f"group share must lie in [0, 1], got {group_share}")
    u = rng.normal(0.0, sigma_eps * np.sqrt(group_share), size=len(panel.groups))
    nu = rng.normal(0.0, sigma_eps * np.sqrt(1.0 - group_share), size=panel.n)
    return u[panel.group_index] + nu
