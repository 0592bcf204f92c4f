"""
Subcommand implementations. Each returns a process exit status and writes
its outputs plus a manifest.json into its output directory.
"""

import json
import logging
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from peergeo.aggregators.norms import default_shift, panel_exposure
from peergeo.aggregators.spec import AggregatorSpec, Family
from peergeo.cli.config import default_output_dir, resolve_mc_config
from peergeo.cli.manifest import RunManifest
from peergeo.errors import EstimationError
from peergeo.estimate.gmm import default_grid, profile_iv
from peergeo.estimate.linear import first_stage_diagnostics
from peergeo.geometry.signature import MenuSpec, build_signature, emit_signature, resolve_menu
from peergeo.montecarlo.designs import two_star_diagnostics
from peergeo.montecarlo.runner import run_mc
from peergeo.montecarlo.tables import emit_tables
from peergeo.netcore.io import emit_index_map, load_panel
from peergeo.netcore.panel import Panel
from peergeo.predictor.predict import PredictorKind, PredictorSpec, predict

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# θ used by `instruments` when none is given
DEFAULT_THETA = {Family.CES: 1.0, Family.SMOOTHMAX: 1.0, Family.QUANTILE: 0.5}


def _out_dir(args, command: str) -> Path:
    out = Path(args.out) if args.out else default_output_dir(command)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: Any) -> Path:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
    return path


# -----------------------------
# mc
# -----------------------------

def cmd_mc(args) -> int:
    config = resolve_mc_config(args.config, args.set or (), args.seed)
    out = _out_dir(args, "mc")
    manifest = RunManifest(command="mc", config=config.to_dict(), seed=config.seed)
    if args.config:
        manifest.add_input(args.config)

    with manifest.phase("simulate"):
        report = run_mc(config, threads=args.threads)
    with manifest.phase("emit"):
        files = emit_tables(report, out, config)
    manifest.add_outputs(*files.values())
    manifest.write(out)

    used = sum(c.used for c in report.cells)
    logger.info("mc: %d cells, %d estimates, %d failures -> %s", len(report.cells), used, len(report.failures), out)
    return EXIT_OK


# -----------------------------
# Shared panel plumbing
# -----------------------------

def _aggregator(args) -> AggregatorSpec:
    family = Family.parse(args.family)
    theta = args.theta if args.theta is not None else DEFAULT_THETA.get(family)
    return AggregatorSpec(family, theta)


def _predictor(args) -> PredictorSpec:
    kind = PredictorKind.parse(args.predictor)
    gamma = None
    if args.oracle_gamma:
        gamma = np.array([float(v) for v in args.oracle_gamma.split(",")])
    return PredictorSpec(kind=kind, folds=args.folds, include_group_effects=args.group_effects, oracle_gamma=gamma)


def _menu(args, name: Optional[str] = None) -> MenuSpec:
    menu = resolve_menu(name or args.menu)
    changes: Dict[str, Any] = {}
    if args.steps is not None:
        changes["K"] = args.steps
    if args.shells is not None:
        changes["H"] = args.shells
    if args.epsilon0 is not None:
        changes["epsilon0"] = args.epsilon0
    return replace(menu, **changes) if changes else menu


def _with_shift(spec: AggregatorSpec, args, *actions: Optional[np.ndarray]) -> AggregatorSpec:
    """CES needs a positivity shift; default to the smallest one covering ŷ and y."""
    if spec.family is not Family.CES:
        return spec
    if args.shift is not None:
        return spec.with_shift(args.shift)
    values = np.concatenate([np.asarray(a, dtype=float) for a in actions if a is not None])
    return spec.with_shift(default_shift(values))


def _load(args, manifest: RunManifest) -> Panel:
    manifest.add_input(args.edges)
    manifest.add_input(args.nodes)
    return load_panel(args.edges, args.nodes, symmetrize=args.symmetrize)


def _labels(panel: Panel) -> pd.DataFrame:
    return pd.DataFrame({
        "group": [net.name for net in panel.groups for _ in range(net.n)],
        "node": list(panel.node_labels),
    })


# -----------------------------
# instruments
# -----------------------------

def cmd_instruments(args) -> int:
    out = _out_dir(args, "instruments")
    manifest = RunManifest(command="instruments", config=_panel_config(args), seed=args.seed)
    with manifest.phase("load"):
        panel = _load(args, manifest)

    with manifest.phase("predict"):
        yhat = predict(panel, _predictor(args), seed=args.seed)
    spec = _with_shift(_aggregator(args), args, yhat, panel.y)
    menu = _menu(args)

    with manifest.phase("instruments"):
        sig = build_signature(panel, yhat, spec, menu)
    files = [
        out / "instruments.csv",
        out / "index_map.csv",
    ]
    emit_signature(sig, files[0], labels=_labels(panel), yhat=yhat)
    emit_index_map(panel, files[1])

    if panel.y is not None:
        with manifest.phase("first_stage"):
            w = panel_exposure(panel, panel.y, spec)
            fs = first_stage_diagnostics(
                w, panel.X, sig.excluded, panel.cluster_id, sample=panel.estimation_mask(), z_names=sig.columns
            )
        files.append(_write_json(out / "first_stage.json", {"aggregator": spec.label(), "menu": menu.name, **fs.to_dict()}))
        logger.info("first stage: partial R2 %.4f, F %.2f", fs.partial_r2, fs.f_stat)

    manifest.add_outputs(*files)
    manifest.write(out)
    logger.info("%s instruments (%d excluded columns) -> %s", menu.name, len(sig.columns), files[0])
    return EXIT_OK


def _panel_config(args) -> Dict[str, Any]:
    keys = ("family", "theta", "shift", "menu", "steps", "shells", "epsilon0", "predictor", "folds",
            "oracle_gamma", "group_effects", "symmetrize", "grid")
    return {k: getattr(args, k) for k in keys if hasattr(args, k)}


# -----------------------------
# estimate
# -----------------------------

def _grid(args, family: Family) -> Tuple[Optional[float], ...]:
    if family is Family.LIM:
        return (None,)
    if args.grid:
        return tuple(float(v) for v in args.grid.split(","))
    if args.theta is not None:
        return (args.theta,)
    return default_grid(family)


def cmd_estimate(args) -> int:
    out = _out_dir(args, "estimate")
    manifest = RunManifest(command="estimate", config=_panel_config(args), seed=args.seed)
    with manifest.phase("load"):
        panel = _load(args, manifest)
    y = panel.require_outcome()

    with manifest.phase("predict"):
        yhat = predict(panel, _predictor(args), seed=args.seed)
    spec = _with_shift(_aggregator(args), args, yhat, y)
    grid = _grid(args, spec.family)
    mask = panel.estimation_mask()

    def exposure_at(theta):
        return panel_exposure(panel, y, spec.with_theta(theta))

    payload: Dict[str, Any] = {"aggregator": spec.family.value, "shift": spec.shift, "grid": list(grid), "menus": {}}
    row: Dict[str, Any] = {}
    files = []
    failed = []
    for label, menu in (("BRUZ", _menu(args, "bruz")), ("GEO", _menu(args))):

        def instruments_at(theta, menu=menu):
            return build_signature(panel, yhat, spec.with_theta(theta), menu)

        try:
            with manifest.phase(f"profile_{label}"):
                trace, result = profile_iv(
                    y, panel.X, exposure_at, instruments_at, grid, panel.cluster_id,
                    sample=mask, x_names=panel.x_names, n_jobs=args.threads,
                )
        except EstimationError as e:
            logger.error("%s: %s", label, e)
            failed.append(label)
            payload["menus"][label] = {"error": str(e)}
            row.update({f"Param({label})": None, f"lambda_{label}": None, f"se_{label}": None})
            continue
        trace_path = out / f"profile_{label}.csv"
        pd.DataFrame(trace.to_rows()).to_csv(trace_path, index=False, float_format="%.10g")
        files.append(trace_path)
        payload["menus"][label] = {"menu": menu.name, "trace": trace.to_dict(), "result": result.to_dict()}
        row.update({
            f"Param({label})": trace.argmin,
            f"lambda_{label}": result.lambda_hat,
            f"se_{label}": result.se_lambda,
        })

    columns = ["Param(BRUZ)", "Param(GEO)", "lambda_BRUZ", "se_BRUZ", "lambda_GEO", "se_GEO"]
    table = out / "comparison.csv"
    pd.DataFrame([row], columns=columns).to_csv(table, index=False, float_format="%.6f")
    files.extend([table, _write_json(out / "estimate.json", payload)])
    manifest.add_outputs(*files)
    manifest.write(out)

    if len(failed) == 2:
        return EXIT_FAILURE
    logger.info("comparison table -> %s", table)
    return EXIT_OK


# -----------------------------
# twostar
# -----------------------------

def cmd_twostar(args) -> int:
    m_a, m_b = args.sizes
    report = two_star_diagnostics(m_a, m_b, equal_hub_covariates=not args.unequal_hubs, beta=args.beta)
    out = _out_dir(args, "twostar")
    manifest = RunManifest(command="twostar", config={"sizes": [m_a, m_b], "beta": args.beta,
                                                      "unequal_hubs": args.unequal_hubs})
    path = _write_json(out / "twostar.json", report.to_dict())
    manifest.add_outputs(path)
    manifest.write(out)

    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(f"two stars: {m_a} + {m_b} peripherals, beta = {report.beta:g}")
        print(f"  max |d/dbeta Phi| on peripherals : {report.peripheral_dtheta_max:.3e}")
        print(f"  peripheral norm spread           : {report.peripheral_norm_spread:.3e}")
        norms = report.peripheral_norms
        print(f"  peripheral norms                 : a = {norms['a']:.6g}, b = {norms['b']:.6g}")
        print(f"  shell-2 vs sibling sums          : {report.shell2_max_error:.3e}")
        print(f"  hop shell-2 vs sibling sums      : {report.hop_shell2_max_error:.3e}")
        if report.collapse:
            print("collapse verified")
        else:
            print(f"no collapse: {'; '.join(report.failed_checks())}")
        if not report.shell2_in_range:
            print("  effective-distance shell 2 holds the siblings only for 3 to 7 peripherals")

    # unequal hubs are expected to break the norm checks, never the shells
    if not report.shells_match or (not args.unequal_hubs and not report.collapse):
        logger.error("two-star checks failed: %s", ", ".join(report.failed_checks()))
        return EXIT_FAILURE
    return EXIT_OK
