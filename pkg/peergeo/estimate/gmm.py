"""
Nonlinear-in-θ GMM for the aggregator parameter: iterative two-step GMM
with a bounded scalar search, and the profile-IV grid search.

Builders are callables of θ: ``exposure_builder(θ)`` returns the per-node
endogenous exposure, ``Z_builder(θ)`` the excluded instruments as an array
or an InstrumentSignature. LIM passes θ = None.
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from scipy import optimize

from peergeo.aggregators.spec import Family
from peergeo.errors import DomainError, EstimationError, InferenceError, PeerGeoError
from peergeo.estimate.linear import (
    COV_TYPES,
    cluster_codes,
    linear_gmm,
    select_instruments,
    two_sls,
    two_step_objective,
)
from peergeo.estimate.results import EstimationResult, ProfileTrace
from peergeo.geometry.signature import InstrumentSignature

logger = logging.getLogger(__name__)

# -----------------------------
# CONFIG
# -----------------------------
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 50
FLAT_TOL = 1e-6
CES_GRID = (0.05, 0.8, 1.2, 1.6, 2.0, 2.4)
SMOOTHMAX_GRID = tuple(float(v) for v in np.geomspace(0.05, 10.0, 8))
QUANTILE_GRID = (0.5,)

Theta = Optional[float]
ExposureBuilder = Callable[[Theta], np.ndarray]
InstrumentBuilder = Callable[[Theta], Union[np.ndarray, InstrumentSignature]]


def default_grid(family: Union[Family, str]) -> Tuple[Theta, ...]:
    family = Family.parse(family)
    return {
        Family.LIM: (None,),
        Family.CES: CES_GRID,
        Family.SMOOTHMAX: SMOOTHMAX_GRID,
        Family.QUANTILE: QUANTILE_GRID,
    }[family]


@dataclass(frozen=True, eq=False)
class GmmOptions:
    bounds: Optional[Tuple[float, float]] = None
    grid: Optional[Tuple[Theta, ...]] = None
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    cov_type: str = "cluster"
    sample: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.cov_type not in COV_TYPES:
            raise DomainError(f"cov_type must be one of {', '.join(COV_TYPES)}, got {self.cov_type!r}")
        if self.bounds is not None:
            lo, hi = (float(b) for b in self.bounds)
            if not lo <= hi:
                raise DomainError(f"θ bounds must satisfy lower <= upper, got {self.bounds}")
            object.__setattr__(self, "bounds", (lo, hi))
        if self.grid is not None:
            object.__setattr__(self, "grid", tuple(self.grid))
        if self.tol <= 0 or self.max_iter < 1:
            raise DomainError("tol must be positive and max_iter at least 1")

    def search_bounds(self) -> Optional[Tuple[float, float]]:
        if self.bounds is not None:
            return self.bounds
        if self.grid and all(t is not None for t in self.grid):
            return (float(min(self.grid)), float(max(self.grid)))
        return None


def _unpack(Z: Union[np.ndarray, InstrumentSignature]) -> Tuple[np.ndarray, Tuple[str, ...]]:
    if isinstance(Z, InstrumentSignature):
        return Z.excluded, Z.columns
    Z = np.asarray(Z, dtype=float)
    Z = Z[:, None] if Z.ndim == 1 else Z
    return Z, tuple(f"z{k}" for k in range(Z.shape[1]))


def _subset(arr: np.ndarray, sample: Optional[np.ndarray]) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    return arr if sample is None else arr[np.asarray(sample, dtype=bool)]


def _clusters(cluster_id: Optional[np.ndarray], sample: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if cluster_id is None:
        return None
    cl = np.asarray(cluster_id).reshape(-1)
    return cl if sample is None else cl[np.asarray(sample, dtype=bool)]


def _profile_point(
    theta: Theta,
    y: np.ndarray,
    X: np.ndarray,
    exposure_builder: ExposureBuilder,
    Z_builder: InstrumentBuilder,
    cluster_id: Optional[np.ndarray],
    sample: Optional[np.ndarray],
    cov_type: str,
    x_names: Sequence[str],
) -> Tuple[float, EstimationResult]:
    w = np.asarray(exposure_builder(theta), dtype=float).reshape(-1)
    Z, names = _unpack(Z_builder(theta))
    try:
        result = two_sls(y, X, w, Z, cluster_id, sample, cov_type, x_names, names, theta)
    except InferenceError as e:
        if e.result is None:
            raise
        logger.warning("θ=%s: %s", theta, e)
        result = replace(e.result, notes=e.result.notes + (str(e),))

    ys, Xs, ws = _subset(y, sample), _subset(X, sample), _subset(w, sample)
    Xs = Xs[:, None] if Xs.ndim == 1 else Xs
    Zk = _subset(Z, sample)[:, [names.index(c) for c in result.instruments]]
    cl = _clusters(cluster_id, sample)
    codes = cluster_codes(cl if cov_type == "cluster" else None, ys.shape[0])
    criterion, _, _ = two_step_objective(ys, Xs, ws, Zk, codes)
    return criterion, replace(result, criterion=criterion)


def profile_iv(
    y: np.ndarray,
    X: np.ndarray,
    exposure_builder: ExposureBuilder,
    Z_builder: InstrumentBuilder,
    theta_grid: Sequence[Theta],
    cluster_id: Optional[np.ndarray] = None,
    sample: Optional[np.ndarray] = None,
    cov_type: str = "cluster",
    x_names: Sequence[str] = (),
    n_jobs: int = 1,
) -> Tuple[ProfileTrace, EstimationResult]:
    """Two-step GMM criterion at every grid point; the estimate at the minimizer.

    Failed points are kept in the trace with a NaN criterion and their error
    message. Ties, and a flat criterion, resolve to the smallest θ.
    """
    grid = tuple(theta_grid)
    if not grid:
        raise DomainError("θ grid must not be empty")
    if any(t is None for t in grid) and len(grid) > 1:
        raise DomainError("a grid containing None (LIM) must have a single point")

    def run(theta: Theta):
        try:
            return _profile_point(theta, y, X, exposure_builder, Z_builder, cluster_id, sample, cov_type, x_names)
        except (PeerGeoError, ValueError, np.linalg.LinAlgError) as e:
            return e

    outcomes = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(run)(t) for t in grid)

    criterion = np.full(len(grid), np.nan)
    lambda_path = np.full(len(grid), np.nan)
    results: List[Optional[EstimationResult]] = []
    failures = {}
    for k, (theta, out) in enumerate(zip(grid, outcomes)):
        if isinstance(out, Exception):
            logger.warning("profile point θ=%s failed: %s", theta, out)
            failures[theta] = f"{type(out).__name__}: {out}"
            results.append(None)
            continue
        criterion[k], res = out
        lambda_path[k] = res.lambda_hat
        results.append(res)

    valid = np.flatnonzero(np.isfinite(criterion))
    if valid.size == 0:
        raise EstimationError(f"all {len(grid)} profile points failed: {failures}")
    lo, hi = criterion[valid].min(), criterion[valid].max()
    flat = bool(hi - lo < FLAT_TOL * (1.0 + abs(lo)))
    tied = valid if flat else valid[criterion[valid] == lo]
    best = min(tied, key=lambda k: grid[k] or 0.0)
    if flat and valid.size > 1:
        logger.warning("profile criterion is flat over the grid; θ is not identified by these instruments")

    trace = ProfileTrace(
        grid=grid,
        criterion=criterion,
        lambda_path=lambda_path,
        argmin=grid[best],
        flat=flat,
        failures=failures,
        results=tuple(results),
    )
    return trace, results[best]


def gmm(
    y: np.ndarray,
    X: np.ndarray,
    exposure_builder: ExposureBuilder,
    Z_builder: InstrumentBuilder,
    theta0: Theta,
    cluster_id: Optional[np.ndarray] = None,
    options: GmmOptions = GmmOptions(),
    x_names: Sequence[str] = (),
) -> EstimationResult:
    """Iterative two-step GMM in θ with (γ, λ) concentrated out in closed form.

    Each outer step fixes the efficient weight at the current θ, minimizes the
    criterion over the bounds, then refreshes the weight. Stops when θ and the
    criterion both move less than ``options.tol``; otherwise the best iterate
    is returned with ``converged=False``.
    """
    bounds = options.search_bounds()
    if theta0 is None or bounds is None or bounds[0] == bounds[1]:
        theta = None if theta0 is None else (theta0 if bounds is None else bounds[0])
        Z, names = _unpack(Z_builder(theta))
        return two_sls(
            y, X, exposure_builder(theta), Z, cluster_id, options.sample, options.cov_type, x_names, names, theta
        )

    sample = options.sample
    ys, Xs = _subset(y, sample), _subset(X, sample)
    Xs = Xs[:, None] if Xs.ndim == 1 else Xs
    cl = _clusters(cluster_id, sample)
    codes = cluster_codes(cl if options.cov_type == "cluster" else None, ys.shape[0])

    # instrument columns are fixed at θ0 so the weight matrix keeps its shape
    Z0, names = _unpack(Z_builder(theta0))
    _, kept, _ = select_instruments(_subset(Z0, sample), Xs, names)
    keep = [names.index(c) for c in kept]

    def moments(theta: float) -> Tuple[np.ndarray, np.ndarray]:
        w = _subset(np.asarray(exposure_builder(theta), dtype=float).reshape(-1), sample)
        Z, _ = _unpack(Z_builder(theta))
        return w, _subset(Z, sample)[:, keep]

    def criterion_at(theta: float, W: np.ndarray) -> float:
        try:
            w, Z = moments(theta)
            fit = linear_gmm(ys, Xs, w, Z, weight=W)
        except (PeerGeoError, ValueError, np.linalg.LinAlgError):
            return np.inf
        g = np.hstack([Xs, Z]).T @ fit.residuals
        return float(g @ W @ g)

    theta_t = float(np.clip(theta0, *bounds))
    w, Z = moments(theta_t)
    crit_t, _, W = two_step_objective(ys, Xs, w, Z, codes)
    best_theta, best_crit = theta_t, crit_t
    converged = False
    for it in range(1, options.max_iter + 1):
        step = optimize.minimize_scalar(
            criterion_at, bounds=bounds, args=(W,), method="bounded", options={"xatol": options.tol}
        )
        theta_new = float(step.x)
        w, Z = moments(theta_new)
        crit_new, _, W = two_step_objective(ys, Xs, w, Z, codes)
        logger.debug("gmm iteration %d: θ=%.6g criterion=%.6g", it, theta_new, crit_new)
        if crit_new < best_crit:
            best_theta, best_crit = theta_new, crit_new
        if abs(theta_new - theta_t) < options.tol and abs(crit_new - crit_t) < options.tol * (1.0 + abs(crit_t)):
            converged = True
            theta_t, crit_t = theta_new, crit_new
            break
        theta_t, crit_t = theta_new, crit_new

    if converged:
        theta_hat, crit_hat = theta_t, crit_t
    else:
        logger.warning("GMM outer loop did not converge in %d iterations; returning best iterate", options.max_iter)
        theta_hat, crit_hat = best_theta, best_crit

    Z_hat, names_hat = _unpack(Z_builder(theta_hat))
    result = two_sls(
        y, X, exposure_builder(theta_hat), Z_hat, cluster_id, sample, options.cov_type, x_names, names_hat, theta_hat
    )
    notes = result.notes if converged else result.notes + ("outer θ iteration did not converge",)
    return replace(result, converged=converged, criterion=crit_hat, notes=notes)
