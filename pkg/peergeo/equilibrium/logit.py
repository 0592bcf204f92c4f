"""
Binary-choice (logit) equilibrium p_i = Λ(x_i'γ + J Φ_i(p)).
"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit

from peergeo.aggregators.norms import exposure
from peergeo.aggregators.spec import AggregatorSpec, Family
from peergeo.equilibrium.params import SolveReport
from peergeo.equilibrium.solver import DEFAULT_MAX_ITER, DEFAULT_TOL, iterate_fixed_point
from peergeo.errors import DomainError, UnsupportedOperationError
from peergeo.netcore.panel import Panel

logger = logging.getLogger(__name__)

LOGISTIC_SLOPE_MAX = 0.25  # sup of Λ'


def logit_fixed_point(
    panel: Panel,
    gamma: np.ndarray,
    J: float,
    spec: AggregatorSpec,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    start: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, SolveReport]:
    """Fixed point of the logit best response with SmoothMax (or LIM) exposure.

    Both families are 1-Lipschitz, so |J|/4 < 1 certifies a unique fixed point;
    the report's ``contraction_bound`` carries |J|·L_Φ/4.
    """
    if spec.family not in (Family.SMOOTHMAX, Family.LIM):
        raise UnsupportedOperationError(f"logit fixed point needs a 1-Lipschitz family, got {spec.family.value}")
    if tol <= 0.0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    index = panel.X @ gamma
    bound = abs(J) * LOGISTIC_SLOPE_MAX
    p0 = expit(index) if start is None else np.clip(np.asarray(start, dtype=float).reshape(-1), 0.0, 1.0)

    if J == 0.0:
        return expit(index), SolveReport(1, 0.0, True, bound, False, tuple(1 for _ in panel.groups))

    p = np.empty(panel.n)
    iterations, residuals = [], []
    converged, damped = True, False
    for net, sl in panel.iter_groups():
        idx = index[sl]

        def step(current: np.ndarray, t: int, net=net, idx=idx) -> np.ndarray:
            return expit(idx + J * exposure(net, current, spec).filled(0.0))

        p_g, it, res, ok, dmp = iterate_fixed_point(step, p0[sl], tol, max_iter)
        p[sl] = p_g
        iterations.append(it)
        residuals.append(res)
        converged &= ok
        damped |= dmp
        if not ok:
            logger.warning("logit fixed point: group %s did not converge in %d iterations", net.name, it)

    report = SolveReport(
        iterations=max(iterations, default=0),
        final_residual=max(residuals, default=0.0),
        converged=converged,
        contraction_bound=bound,
        damped=damped,
        group_iterations=tuple(iterations),
    )
    return p, report
