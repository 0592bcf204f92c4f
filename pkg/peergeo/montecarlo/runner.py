"""
Replication loop: draw dispersion-bridge panels, solve the CES norm game,
build ŷ and the instrument menus, estimate λ by 2SLS, and reduce the
records into per-(n, β, menu) cells.
"""

import logging
import time
import warnings
import zlib
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from peergeo.aggregators.norms import default_shift, panel_exposure
from peergeo.aggregators.spec import AggregatorSpec, Family
from peergeo.equilibrium.contraction import certifying_shift, contraction_bound, equilibrium_envelope
from peergeo.equilibrium.params import StructuralParams
from peergeo.equilibrium.shocks import draw_shocks
from peergeo.equilibrium.solver import solve_equilibrium, structural_base
from peergeo.errors import ContractionWarning, DomainError, InferenceError, PeerGeoError
from peergeo.estimate.linear import two_sls
from peergeo.geometry.diagnostics import design_diagnostics
from peergeo.geometry.signature import build_signature
from peergeo.geometry.transport import transport
from peergeo.montecarlo.config import McConfig, menu_spec
from peergeo.montecarlo.designs import COVARIATE_NAMES, dispersion_bridge
from peergeo.netcore.panel import Panel
from peergeo.predictor.predict import predict

logger = logging.getLogger(__name__)

# -----------------------------
# CONFIG
# -----------------------------
SHIFT_PAD = 1.0  # slack below the equilibrium envelope for ŷ
CONTRACTION_TARGET = 0.95
ESTIMATION_ERRORS = (PeerGeoError, ValueError, np.linalg.LinAlgError)


def stream(seed: int, n: int, rep: int, tag: str) -> np.random.Generator:
    """Independent generator per (seed, n, replication, purpose)."""
    return np.random.default_rng(np.random.SeedSequence([seed, n, rep, zlib.crc32(tag.encode("utf-8"))]))


def draw_bridge_panel(n: int, config: McConfig, rng: np.random.Generator) -> Panel:
    draws = [
        dispersion_bridge(config.group_size, int(rng.integers(2**32)), config.bridge, group_id=s)
        for s in range(config.groups(n))
    ]
    return Panel(
        groups=tuple(d.network for d in draws),
        X=np.vstack([d.X for d in draws]),
        x_names=COVARIATE_NAMES,
    )


def ces_shift(
    panel: Panel,
    params: StructuralParams,
    shocks: np.ndarray,
    certify: bool = True,
    target: float = CONTRACTION_TARGET,
) -> float:
    """Shift c keeping the envelope of every iterate, less SHIFT_PAD, at or above one.

    With ``certify`` the shift also grows until |λ|·L_Φ on the envelope is
    ``target``, which certifies a unique equilibrium whenever |λ| < target.
    """
    base = structural_base(panel, params, shocks)
    start = panel.X @ params.gamma
    box = equilibrium_envelope(base, params.lam, start)
    lower = min(base.min(), start.min()) if box is None else box[0]
    shift = default_shift(np.array([lower - SHIFT_PAD]))
    if certify and box is not None:
        needed = certifying_shift(box[0], box[1], params.aggregator.theta, params.lam, target)
        if np.isfinite(needed):
            shift = max(shift, needed)
    return shift


def _draw(config: McConfig, n: int, rep: int) -> Tuple[Panel, np.ndarray, np.ndarray, int]:
    panel = draw_bridge_panel(n, config, stream(config.seed, n, rep, "network"))
    shocks = draw_shocks(panel, config.sigma_eps, stream(config.seed, n, rep, "shocks"), config.correlated_shocks)
    zeta = stream(config.seed, n, rep, "effects").normal(0.0, config.zeta_scale, size=len(panel.groups))
    predictor_seed = int(stream(config.seed, n, rep, "predictor").integers(2**31))
    return panel, shocks, zeta, predictor_seed


def ces_params(config: McConfig, panel: Panel, shocks: np.ndarray, zeta: np.ndarray, beta: float) -> StructuralParams:
    """True parameters at curvature β with the shift ``ces_shift`` picks for this draw."""
    params = StructuralParams(
        gamma=np.asarray(config.gamma0),
        lam=config.lambda0,
        aggregator=AggregatorSpec(Family.CES, beta),
        group_effects=zeta,
        sigma_eps=config.sigma_eps,
    )
    shift = ces_shift(panel, params, shocks, certify=config.certify_contraction)
    return replace(params, aggregator=params.aggregator.with_shift(shift))


def contraction_precheck(config: McConfig) -> Dict[float, Optional[float]]:
    """|λ|·L_Φ per β on the first replication's draw at the smallest n.

    Warns with ContractionWarning when any bound is missing or at least one.
    """
    n = min(config.n)
    try:
        panel, shocks, zeta, _ = _draw(config, n, 0)
    except ESTIMATION_ERRORS as e:
        logger.warning("contraction precheck skipped: %s", e)
        return {}
    bounds: Dict[float, Optional[float]] = {}
    for beta in config.beta_fix:
        params = ces_params(config, panel, shocks, zeta, beta)
        box = equilibrium_envelope(structural_base(panel, params, shocks), params.lam, panel.X @ params.gamma)
        try:
            bounds[beta] = None if box is None else contraction_bound(params, box)
        except DomainError:
            bounds[beta] = None

    failing = [b for b, v in bounds.items() if v is None or v >= 1.0]
    if failing:
        msg = (f"lambda0 = {config.lambda0:g}: contraction bound >= 1 or undefined at beta = "
               f"{', '.join(f'{b:g}' for b in failing)}; equilibria are not certified unique")
        logger.warning(msg)
        warnings.warn(msg, ContractionWarning, stacklevel=3)
    else:
        logger.info("contraction bound below one at every beta (max %.3f)", max(bounds.values(), default=0.0))
    return bounds


# -----------------------------
# One replication
# -----------------------------

@dataclass(frozen=True)
class Record:
    n: int
    rep: int
    beta: float
    menu: str
    status: str  # ok | nonconverged | failed
    lambda_hat: float = float("nan")
    partial_r2: float = float("nan")
    f_stat: float = float("nan")


@dataclass
class ReplicationOutcome:
    n: int = 0
    records: List[Record] = field(default_factory=list)
    failures: List[Dict[str, Any]] = field(default_factory=list)
    diagnostics: Dict[float, Dict[str, float]] = field(default_factory=dict)
    uncertified: int = 0

    def fail(self, n: int, rep: int, beta: float, stage: str, error: Exception, menus: Sequence[str]) -> None:
        self.failures.append(
            {"replication": rep, "n": n, "beta": beta, "stage": stage, "error": f"{type(error).__name__}: {error}"}
        )
        self.records.extend(Record(n, rep, beta, m, "failed") for m in menus)


def replicate(config: McConfig, n: int, rep: int) -> ReplicationOutcome:
    """Steps 1-5 for one replication at every β in ``config.beta_fix``.

    The network, covariates, shocks and group effects are drawn once and
    shared across β (common random numbers).
    """
    out = ReplicationOutcome(n=n)
    menus = config.menus
    try:
        panel, shocks, zeta, predictor_seed = _draw(config, n, rep)
    except ESTIMATION_ERRORS as e:
        for beta in config.beta_fix:
            out.fail(n, rep, beta, "design", e, menus)
        return out

    mask = panel.estimation_mask()
    for beta in config.beta_fix:
        params = ces_params(config, panel, shocks, zeta, beta)
        spec, shift = params.aggregator, params.aggregator.shift

        try:
            y, report = solve_equilibrium(panel, params, shocks, tol=config.tol, max_iter=config.max_iter)
        except ESTIMATION_ERRORS as e:
            out.fail(n, rep, beta, "equilibrium", e, menus)
            continue
        if not report.unique:
            out.uncertified += 1
        if not report.converged:
            out.failures.append({
                "replication": rep, "n": n, "beta": beta, "stage": "equilibrium",
                "error": f"no convergence in {report.iterations} iterations (residual {report.final_residual:.3g})",
            })
            out.records.extend(Record(n, rep, beta, m, "nonconverged") for m in menus)
            continue

        try:
            observed = panel.with_outcome(y)
            yhat = predict(observed, config.predictor, seed=predictor_seed)
            w = panel_exposure(observed, y, spec)
        except ESTIMATION_ERRORS as e:
            out.fail(n, rep, beta, "predictor", e, menus)
            continue

        for menu in menus:
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    sig = build_signature(panel, yhat, spec, menu_spec(menu))
                    try:
                        res = two_sls(
                            y, panel.X, w, sig.excluded, panel.cluster_id, mask,
                            x_names=panel.x_names, z_names=sig.columns, theta=beta,
                        )
                    except InferenceError as e:
                        if e.result is None:
                            raise
                        res = e.result
            except ESTIMATION_ERRORS as e:
                out.fail(n, rep, beta, f"estimate:{menu}", e, [menu])
                continue
            fs = res.first_stage
            out.records.append(Record(n, rep, beta, menu, "ok", res.lambda_hat, fs.partial_r2, fs.f_stat))

        try:
            ops = [transport(net, yhat[sl], spec) for net, sl in panel.iter_groups()]
            diag = design_diagnostics(w, ops, yhat, panel.groups, beta=beta, shift=shift)
            out.diagnostics[beta] = diag.to_dict()
        except ESTIMATION_ERRORS as e:
            out.failures.append({"replication": rep, "n": n, "beta": beta, "stage": "diagnostics", "error": str(e)})
    return out


# -----------------------------
# Reduction
# -----------------------------

@dataclass(frozen=True)
class McCell:
    n: int
    beta: float
    menu: str
    bias: float
    rmse: float
    mean_partial_r2: float
    mean_f: float
    used: int
    nonconverged: int
    failed: int

    @property
    def excluded(self) -> int:
        return self.nonconverged + self.failed

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "beta": self.beta,
            "menu": self.menu,
            "bias": _num(self.bias),
            "rmse": _num(self.rmse),
            "mean_partial_r2": _num(self.mean_partial_r2),
            "mean_f": _num(self.mean_f),
            "used": self.used,
            "nonconverged": self.nonconverged,
            "excluded": self.excluded,
            "failed": self.failed,
        }


@dataclass(frozen=True)
class McReport:
    cells: Tuple[McCell, ...]
    menus: Tuple[str, ...]
    replications: int
    lambda0: float
    diagnostics: Tuple[Tuple[int, float, Tuple[Tuple[str, float], ...]], ...] = ()
    failures: Tuple[Tuple[Tuple[str, Any], ...], ...] = ()
    uncertified_solves: int = 0
    config_digest: str = ""
    runtime_seconds: float = field(default=0.0, compare=False)

    def cell(self, n: int, beta: float, menu: str) -> McCell:
        for c in self.cells:
            if c.n == n and c.beta == beta and c.menu == menu:
                return c
        raise KeyError((n, beta, menu))

    def to_dict(self, include_runtime: bool = True) -> Dict[str, Any]:
        out = {
            "replications": self.replications,
            "lambda0": self.lambda0,
            "menus": list(self.menus),
            "cells": [c.to_dict() for c in self.cells],
            "diagnostics": [
                {"n": n, "beta": beta, **{k: _num(v) for k, v in values}} for n, beta, values in self.diagnostics
            ],
            "failure_count": len(self.failures),
            "uncertified_solves": self.uncertified_solves,
            "config_digest": self.config_digest,
        }
        if include_runtime:
            out["runtime_seconds"] = self.runtime_seconds
        return out

    def failure_records(self) -> List[Dict[str, Any]]:
        return [dict(f) for f in self.failures]


def _num(v: Optional[float]) -> Optional[float]:
    if v is None or not np.isfinite(v):
        return None
    return float(v)


def _reduce_cell(records: List[Record], n: int, beta: float, menu: str, lambda0: float) -> McCell:
    ok = [r for r in records if r.status == "ok"]
    err = np.array([r.lambda_hat - lambda0 for r in ok])
    nan = float("nan")
    return McCell(
        n=n,
        beta=beta,
        menu=menu,
        bias=float(err.mean()) if ok else nan,
        rmse=float(np.sqrt(np.mean(err ** 2))) if ok else nan,
        mean_partial_r2=float(np.mean([r.partial_r2 for r in ok])) if ok else nan,
        mean_f=float(np.mean([r.f_stat for r in ok])) if ok else nan,
        used=len(ok),
        nonconverged=sum(r.status == "nonconverged" for r in records),
        failed=sum(r.status == "failed" for r in records),
    )


def reduce_outcomes(config: McConfig, outcomes: Sequence[ReplicationOutcome], runtime: float = 0.0) -> McReport:
    """Deterministic reduction in (n, replication) order."""
    records = [r for o in outcomes for r in o.records]
    cells = []
    diagnostics = []
    for n in config.n:
        for beta in config.beta_fix:
            for menu in config.menus:
                subset = [r for r in records if r.n == n and r.beta == beta and r.menu == menu]
                cells.append(_reduce_cell(subset, n, beta, menu, config.lambda0))
            diag = [o.diagnostics[beta] for o in outcomes if o.n == n and beta in o.diagnostics]
            if diag:
                keys = sorted(diag[0])
                diagnostics.append((n, beta, tuple((k, float(np.nanmean([d[k] for d in diag]))) for k in keys)))
    failures = tuple(tuple(sorted(f.items())) for o in outcomes for f in o.failures)
    return McReport(
        cells=tuple(cells),
        menus=config.menus,
        replications=config.R,
        lambda0=config.lambda0,
        diagnostics=tuple(diagnostics),
        failures=failures,
        uncertified_solves=sum(o.uncertified for o in outcomes),
        config_digest=config.digest(),
        runtime_seconds=runtime,
    )


def run_mc(config: McConfig, threads: int = 1) -> McReport:
    """Run every (n, replication) task and reduce into an McReport.

    Results do not depend on ``threads``: every replication draws from its
    own seeded streams and the reduction follows task order.
    """
    contraction_precheck(config)

    tasks = [(n, rep) for n in config.n for rep in range(config.R)]
    logger.info("running %d replications over n=%s, beta=%s", len(tasks), list(config.n), list(config.beta_fix))
    started = time.perf_counter()
    outcomes = Parallel(n_jobs=threads)(delayed(replicate)(config, n, rep) for n, rep in tasks)
    runtime = time.perf_counter() - started

    report = reduce_outcomes(config, outcomes, runtime)
    if report.uncertified_solves:
        logger.warning("%d equilibrium solves lacked a contraction certificate", report.uncertified_solves)
    if report.failures:
        logger.warning("%d replication-level failures recorded", len(report.failures))
    logger.info("monte carlo finished in %.1fs", runtime)
    return report
