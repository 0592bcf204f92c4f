"""
Linear IV on linearmodels: 2SLS with cluster-robust inference, first-stage
strength diagnostics, Hansen J and linear GMM at a given weight.

Notation: X included exogenous (carries the intercept), w the endogenous
peer exposure, Z excluded instruments, Q = [X, Z] all instruments and
R = [X, w] regressors.
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from linearmodels.iv import IV2SLS, IVGMM

from peergeo.errors import CollinearityWarning, DomainError, InferenceError, RankError
from peergeo.estimate.results import EstimationResult, FirstStage, param_names
from peergeo.netcore.panel import dependent_columns, require_full_rank

logger = logging.getLogger(__name__)

# -----------------------------
# CONFIG
# -----------------------------
COLLINEAR_CORR = 0.9999
ZERO_RESIDUAL_TOL = 1e-9  # residual norm relative to the largest excluded column
COV_TYPES = ("cluster", "robust", "unadjusted")

# our covariance names → linearmodels cov_type
LM_COV_TYPES: Dict[str, str] = {
    "cluster": "clustered",
    "robust": "robust",
    "unadjusted": "unadjusted",
}


# -----------------------------
# Linear algebra helpers
# -----------------------------

def partial_out(A: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Residuals of A after least squares on X."""
    coef, *_ = np.linalg.lstsq(X, A, rcond=None)
    return A - X @ coef


def cluster_codes(cluster_id: Optional[np.ndarray], n: int) -> np.ndarray:
    """Dense cluster codes; None means one cluster per observation."""
    if cluster_id is None:
        return np.arange(n)
    _, codes = np.unique(np.asarray(cluster_id), return_inverse=True)
    return codes.reshape(-1)


def fit_options(cov_type: str, codes: np.ndarray) -> Dict[str, Any]:
    """linearmodels ``fit`` keywords; ``debiased`` applies the HC1 / cluster small-sample factors."""
    options: Dict[str, Any] = {"cov_type": LM_COV_TYPES[cov_type], "debiased": True}
    if cov_type == "cluster":
        options["clusters"] = codes
    return options


def _column(a: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=float).reshape(-1, 1)


def _iv2sls(y: np.ndarray, X: np.ndarray, w: np.ndarray, Z: np.ndarray) -> IV2SLS:
    try:
        return IV2SLS(y, X, _column(w), Z)
    except ValueError as e:
        raise RankError(f"2SLS design rejected: {e}") from e


def _ivgmm(y: np.ndarray, X: np.ndarray, w: np.ndarray, Z: np.ndarray, codes: Optional[np.ndarray] = None) -> IVGMM:
    try:
        if codes is None:
            return IVGMM(y, X, _column(w), Z)
        return IVGMM(y, X, _column(w), Z, weight_type="clustered", clusters=codes)
    except ValueError as e:
        raise RankError(f"GMM design rejected: {e}") from e


# -----------------------------
# Input handling
# -----------------------------

@dataclass(frozen=True, eq=False)
class _Prepared:
    y: np.ndarray
    X: np.ndarray
    w: np.ndarray
    Z: np.ndarray
    codes: np.ndarray
    n_clusters: int


def _prepare(y, X, endogenous, Z, cluster_id, sample) -> _Prepared:
    y = np.asarray(y, dtype=float).reshape(-1)
    X = np.asarray(X, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    w = np.asarray(endogenous, dtype=float).reshape(-1)
    Z = np.asarray(Z, dtype=float)
    Z = Z[:, None] if Z.ndim == 1 else Z
    n = y.shape[0]
    if not (X.shape[0] == w.shape[0] == Z.shape[0] == n):
        raise DomainError("y, X, endogenous and Z must have the same number of rows")
    cl = None if cluster_id is None else np.asarray(cluster_id).reshape(-1)
    if sample is not None:
        mask = np.asarray(sample, dtype=bool).reshape(-1)
        y, X, w, Z = y[mask], X[mask], w[mask], Z[mask]
        cl = None if cl is None else cl[mask]
    for name, arr in (("y", y), ("X", X), ("endogenous", w), ("Z", Z)):
        if not np.all(np.isfinite(arr)):
            raise DomainError(f"{name} contains non-finite values")
    codes = cluster_codes(cl, y.shape[0])
    return _Prepared(y, X, w, Z, codes, int(codes.max()) + 1 if codes.size else 0)


def select_instruments(
    Z: np.ndarray,
    X: np.ndarray,
    names: Sequence[str] = (),
) -> Tuple[np.ndarray, List[str], List[str]]:
    """Drop excluded columns that vanish after partialling X or are near-duplicates of an earlier column.

    Returns (kept columns, kept names, dropped names). Raises RankError when the
    kept block is still rank deficient or empty.
    """
    names = list(names) if names else [f"z{k}" for k in range(Z.shape[1])]
    Zt = partial_out(Z, X)
    scale = float(np.linalg.norm(Z, axis=0).max()) if Z.shape[1] else 0.0
    res_norm = np.linalg.norm(Zt, axis=0)
    kept: List[int] = []
    vanished: List[str] = []
    collinear: List[str] = []
    for j in range(Z.shape[1]):
        # finite-difference noise on a spanned column counts as vanished
        if res_norm[j] <= ZERO_RESIDUAL_TOL * scale or res_norm[j] == 0.0:
            vanished.append(names[j])
            continue
        u = Zt[:, j] / res_norm[j]
        if any(abs(u @ (Zt[:, k] / res_norm[k])) > COLLINEAR_CORR for k in kept):
            collinear.append(names[j])
            continue
        kept.append(j)

    # e.g. P²·const on a row-stochastic P; expected, so not a warning
    if vanished:
        logger.info("dropped excluded column(s) spanned by X: %s", ", ".join(vanished))
    if collinear:
        msg = f"dropped {len(collinear)} collinear excluded instrument(s): {', '.join(collinear)}"
        logger.warning(msg)
        warnings.warn(msg, CollinearityWarning, stacklevel=3)
    dropped = [names[j] for j in range(Z.shape[1]) if names[j] in vanished or names[j] in collinear]
    if not kept:
        raise RankError("no excluded instrument varies after partialling out X", columns=dropped)
    rank = np.linalg.matrix_rank(Zt[:, kept])
    if rank < len(kept):
        bad = dependent_columns(Zt[:, kept], [names[j] for j in kept])
        raise RankError("singular first-stage cross-product", columns=bad, split="excluded instruments")
    return Z[:, kept], [names[j] for j in kept], dropped


# -----------------------------
# First stage
# -----------------------------

def _first_stage(fit, w: np.ndarray, X: np.ndarray, m: int) -> FirstStage:
    """Strength of the last ``m`` coefficients of a first-stage OLS fit of w on [X, Z]."""
    N, p = X.shape
    wt = partial_out(w, X)
    ssr_r = float(wt @ wt)
    ssr_u = float(fit.resid_ss)
    partial_r2 = 0.0 if ssr_r <= 0.0 else float(np.clip(1.0 - ssr_u / ssr_r, 0.0, 1.0))

    dof = N - p - m
    if dof <= 0:
        f_stat = float("nan")
    elif partial_r2 >= 1.0:
        f_stat = float("inf")
    else:
        f_stat = (partial_r2 / m) / ((1.0 - partial_r2) / dof)

    pi = np.asarray(fit.params)[-m:]
    V = np.asarray(fit.cov)[-m:, -m:]
    f_robust = float("nan") if dof <= 0 else float(pi @ np.linalg.pinv(V) @ pi / m)
    return FirstStage(partial_r2=partial_r2, f_stat=float(f_stat), f_stat_robust=f_robust, excluded_count=m)


def first_stage_diagnostics(
    endogenous: np.ndarray,
    X: np.ndarray,
    Z_excluded: np.ndarray,
    cluster_id: Optional[np.ndarray] = None,
    sample: Optional[np.ndarray] = None,
    z_names: Sequence[str] = (),
) -> FirstStage:
    """Partial R² and F of the excluded instruments for the endogenous exposure.

    ``f_stat`` is the homoskedastic joint F; ``f_stat_robust`` the
    cluster-robust Wald statistic divided by the instrument count.
    """
    w = np.asarray(endogenous, dtype=float).reshape(-1)
    d = _prepare(w, X, w, Z_excluded, cluster_id, sample)
    Zk, _, _ = select_instruments(d.Z, d.X, z_names)
    if d.n_clusters < 2:
        raise InferenceError(f"cluster-robust first stage needs at least 2 clusters, got {d.n_clusters}")
    fit = IV2SLS(d.w, np.hstack([d.X, Zk]), None, None).fit(**fit_options("cluster", d.codes))
    return _first_stage(fit, d.w, d.X, Zk.shape[1])


# -----------------------------
# Estimators
# -----------------------------

@dataclass(frozen=True, eq=False)
class LinearGmmFit:
    params: np.ndarray
    residuals: np.ndarray


def linear_gmm(
    y: np.ndarray,
    X: np.ndarray,
    endogenous: np.ndarray,
    Z: np.ndarray,
    weight: Optional[np.ndarray] = None,
) -> LinearGmmFit:
    """One GMM step for (γ, λ) at weight W on the moments Q'u; W = (Q'Q)⁻¹ (2SLS) when None."""
    y = np.asarray(y, dtype=float).reshape(-1)
    X = np.asarray(X, dtype=float).reshape(y.shape[0], -1)
    Z = np.asarray(Z, dtype=float).reshape(y.shape[0], -1)
    initial = None if weight is None else np.asarray(weight, dtype=float)
    try:
        res = _ivgmm(y, X, endogenous, Z).fit(iter_limit=1, initial_weight=initial, cov_type="unadjusted")
    except np.linalg.LinAlgError as e:
        raise RankError(f"GMM normal equations are singular: {e}") from e
    return LinearGmmFit(params=np.asarray(res.params), residuals=np.asarray(res.resids).reshape(-1))


def hansen_j(
    y: np.ndarray,
    X: np.ndarray,
    w: np.ndarray,
    Z: np.ndarray,
    codes: np.ndarray,
) -> Tuple[float, float]:
    """(J, p-value) after one efficient step from 2SLS, the weight clustered on ``codes``."""
    res = _ivgmm(y, X, w, Z, codes).fit(iter_limit=2, cov_type="robust")
    return float(res.j_stat.stat), float(res.j_stat.pval)


def two_step_objective(
    y: np.ndarray,
    X: np.ndarray,
    w: np.ndarray,
    Z: np.ndarray,
    codes: np.ndarray,
) -> Tuple[float, LinearGmmFit, np.ndarray]:
    """Two-step GMM: identity on standardized moments, then the clustered optimal weight.

    Returns the second-step criterion g' S⁻¹ g (g the summed moments, S their
    clustered covariance), the second-step fit and S⁻¹.
    """
    Q = np.hstack([X, Z])
    W1 = np.diag(1.0 / np.mean(Q * Q, axis=0))
    try:
        res = _ivgmm(y, X, w, Z, codes).fit(iter_limit=2, initial_weight=W1, cov_type="robust")
    except np.linalg.LinAlgError as e:
        raise RankError(f"clustered moment covariance is singular: {e}") from e
    fit = LinearGmmFit(params=np.asarray(res.params), residuals=np.asarray(res.resids).reshape(-1))
    # linearmodels scales the weight by the sample size; g' S⁻¹ g equals its J
    return float(res.j_stat.stat), fit, np.asarray(res.weight_matrix) / y.shape[0]


def two_sls(
    y: np.ndarray,
    X: np.ndarray,
    endogenous: np.ndarray,
    Z: np.ndarray,
    cluster_id: Optional[np.ndarray] = None,
    sample: Optional[np.ndarray] = None,
    cov_type: str = "cluster",
    x_names: Sequence[str] = (),
    z_names: Sequence[str] = (),
    theta: Optional[float] = None,
) -> EstimationResult:
    """2SLS of y on [X, w] with instruments [X, Z].

    ``cov_type`` is "cluster" (default; None ``cluster_id`` clusters each
    observation alone), "robust" (HC1) or "unadjusted". The first-stage
    ``f_stat_robust`` uses the same covariance. With fewer than two clusters
    an InferenceError is raised that carries the point estimates.
    """
    if cov_type not in COV_TYPES:
        raise DomainError(f"cov_type must be one of {', '.join(COV_TYPES)}, got {cov_type!r}")
    d = _prepare(y, X, endogenous, Z, cluster_id, sample)
    require_full_rank(d.X, label="included exogenous covariates", names=x_names)
    Zk, kept, dropped = select_instruments(d.Z, d.X, z_names)

    N, p = d.X.shape
    k = p + 1
    m = Zk.shape[1]
    model = _iv2sls(d.y, d.X, d.w, Zk)
    fields: Dict[str, Any] = dict(
        theta_used=theta,
        n_used=N,
        j_df=max(m - 1, 0),
        n_clusters=d.n_clusters,
        cov_type=cov_type,
        param_names=param_names(x_names, p),
        instruments=tuple(kept),
        dropped_instruments=tuple(dropped),
    )

    problem = None
    if cov_type == "cluster" and d.n_clusters < 2:
        problem = f"cluster-robust covariance needs at least 2 clusters, got {d.n_clusters}"
    elif N <= k:
        problem = f"{N} observations for {k} parameters"
    if problem is not None:
        params = np.asarray(model.fit(cov_type="unadjusted").params)
        nan = np.full((k, k), np.nan)
        result = EstimationResult(
            gamma_hat=params[:p], lambda_hat=float(params[p]), vcov=nan, se_lambda=float("nan"),
            first_stage=None, j_stat=None, **fields,
        )
        raise InferenceError(problem, result=result)

    res = model.fit(**fit_options(cov_type, d.codes))
    params = np.asarray(res.params)
    vcov = np.asarray(res.cov)
    vcov = 0.5 * (vcov + vcov.T)
    first = next(iter(res.first_stage.individual.values()))

    j_stat = j_p = None
    notes: Tuple[str, ...] = ()
    if m > 1:
        j_codes = d.codes if cov_type == "cluster" else np.arange(N)
        try:
            j_stat, j_p = hansen_j(d.y, d.X, d.w, Zk, j_codes)
        except (RankError, np.linalg.LinAlgError) as e:
            logger.debug("Hansen J unavailable: %s", e)
            notes = (f"Hansen J unavailable: {e}",)

    return EstimationResult(
        gamma_hat=params[:p],
        lambda_hat=float(params[p]),
        vcov=vcov,
        se_lambda=float(np.sqrt(max(vcov[p, p], 0.0))),
        first_stage=_first_stage(first, d.w, d.X, m),
        j_stat=j_stat,
        j_pvalue=j_p,
        notes=notes,
        **fields,
    )
