"""
Fixed-point iteration for the norm game.

Each group's equilibrium depends only on that group, so groups are iterated
separately and the report aggregates them.
"""

import logging
from typing import Callable, List, Optional, Tuple

import numpy as np

from peergeo.aggregators.norms import exposure
from peergeo.equilibrium.contraction import contraction_bound, equilibrium_envelope
from peergeo.equilibrium.params import SolveReport, StructuralParams
from peergeo.errors import DomainError
from peergeo.netcore.panel import Panel

logger = logging.getLogger(__name__)

# -----------------------------
# CONFIG
# -----------------------------
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 500
DAMPING = 0.5
DAMPING_AFTER = 100  # non-monotone steps before damping engages


def relative_change(new: np.ndarray, old: np.ndarray) -> float:
    """‖new − old‖∞ / max(‖old‖∞, 1)."""
    if new.size == 0:
        return 0.0
    return float(np.max(np.abs(new - old)) / max(float(np.max(np.abs(old))), 1.0))


def iterate_fixed_point(
    step: Callable[[np.ndarray, int], np.ndarray],
    start: np.ndarray,
    tol: float,
    max_iter: int,
) -> Tuple[np.ndarray, int, float, bool, bool]:
    """Plain iteration of ``step`` with automatic damping.

    Returns (last iterate, iterations, final residual, converged, damped).
    """
    y = np.array(start, dtype=float, copy=True)
    residual, previous = np.inf, np.inf
    non_monotone, damped = 0, False
    for t in range(1, max_iter + 1):
        y_new = step(y, t)
        if damped:
            y_new = DAMPING * y + (1.0 - DAMPING) * y_new
        residual = relative_change(y_new, y)
        y = y_new
        if residual <= tol:
            return y, t, residual, True, damped
        if residual >= previous:
            non_monotone += 1
            if non_monotone >= DAMPING_AFTER and not damped:
                damped = True
                logger.debug("damping engaged after %d non-monotone steps", non_monotone)
        previous = residual
    return y, max_iter, residual, False, damped


def structural_base(panel: Panel, params: StructuralParams, shocks: np.ndarray) -> np.ndarray:
    """Xγ + ζ_s + ε."""
    if params.gamma.shape[0] != panel.p:
        raise DomainError(f"gamma has {params.gamma.shape[0]} entries for {panel.p} covariates")
    base = panel.X @ params.gamma + np.asarray(shocks, dtype=float).reshape(-1)
    if params.group_effects is not None:
        base = base + params.group_effects[panel.group_index]
    return base


def solve_equilibrium(
    panel: Panel,
    params: StructuralParams,
    shocks: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    start: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, SolveReport]:
    """Iterate y ← Xγ + λ Φ(y) + ζ + ε from y⁰ = Xγ (or ``start``).

    Isolates have exposure 0. Non-convergent solves are returned with
    ``converged=False``; a CES domain exit raises DomainError with the
    iteration, group and node.
    """
    if tol <= 0.0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    shocks = np.asarray(shocks, dtype=float).reshape(-1)
    if shocks.shape[0] != panel.n:
        raise DomainError(f"expected {panel.n} shocks, got {shocks.shape[0]}")

    base = structural_base(panel, params, shocks)
    y0 = panel.X @ params.gamma if start is None else np.asarray(start, dtype=float).reshape(-1)
    spec, lam = params.aggregator, params.lam

    box = equilibrium_envelope(base, lam, y0)
    try:
        bound: Optional[float] = contraction_bound(params, box)
    except DomainError:
        bound = None

    if lam == 0.0:
        return base.copy(), SolveReport(1, 0.0, True, bound, False, tuple(1 for _ in panel.groups))

    y = np.empty(panel.n)
    iterations: List[int] = []
    residuals: List[float] = []
    converged, damped = True, False
    for net, sl in panel.iter_groups():
        b = base[sl]

        def step(current: np.ndarray, t: int, net=net, b=b) -> np.ndarray:
            try:
                phi = exposure(net, current, spec).filled(0.0)
            except DomainError as e:
                raise DomainError(
                    f"equilibrium iterate left the aggregator domain: {e.reason}",
                    node=e.node,
                    group=net.group_id,
                    iteration=t,
                ) from e
            return b + lam * phi

        y_g, it, res, ok, dmp = iterate_fixed_point(step, y0[sl], tol, max_iter)
        y[sl] = y_g
        iterations.append(it)
        residuals.append(res)
        converged &= ok
        damped |= dmp
        if not ok:
            logger.warning("group %s did not converge in %d iterations (residual %.3g)", net.name, it, res)

    report = SolveReport(
        iterations=max(iterations, default=0),
        final_residual=max(residuals, default=0.0),
        converged=converged,
        contraction_bound=bound,
        damped=damped,
        group_iterations=tuple(iterations),
    )
    return y, report
