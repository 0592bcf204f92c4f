import json
import logging

import numpy as np
import pandas as pd
import pytest

from peergeo.aggregators.spec import AggregatorSpec, Family
from peergeo.cli.config import load_config_file, parse_overrides, parse_value, resolve_mc_config
from peergeo.cli.main import main
from peergeo.equilibrium import StructuralParams, solve_equilibrium
from peergeo.errors import ConfigError
from peergeo.montecarlo.designs import dispersion_bridge, two_star
from peergeo.netcore.io import emit_panel
from peergeo.netcore.panel import Panel

MC_SMALL = ["--set", "n=[16]", "--set", "group_size=8", "--set", "beta_fix=[1.2]", "--set", "R=1",
            "--set", "predictor=oracle", "--set", "menus=BRUZ"]


@pytest.fixture(autouse=True)
def _restore_logging():
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)
    logging.captureWarnings(False)


@pytest.fixture
def star_files(tmp_path):
    draw = two_star(4, 4)
    panel = Panel(groups=(draw.network,), X=draw.X, x_names=("const", "x1"))
    edges, nodes = tmp_path / "star_edges.csv", tmp_path / "star_nodes.csv"
    emit_panel(panel, edges, nodes)
    return edges, nodes


@pytest.fixture
def bridge_files(tmp_path):
    """Four dispersion-bridge groups with a linear-in-means outcome (λ = 0.3)."""
    draws = [dispersion_bridge(12, seed=s, group_id=s) for s in range(4)]
    panel = Panel(groups=tuple(d.network for d in draws), X=np.vstack([d.X for d in draws]), x_names=("const", "x1"))
    params = StructuralParams(np.array([1.0, 1.0]), 0.3, AggregatorSpec(Family.LIM))
    shocks = np.random.default_rng(0).normal(size=panel.n)
    y, _ = solve_equilibrium(panel, params, shocks, tol=1e-12)
    edges, nodes = tmp_path / "edges.csv", tmp_path / "nodes.csv"
    emit_panel(panel.with_outcome(y), edges, nodes)
    return edges, nodes


# -----------------------------
# Configuration helpers
# -----------------------------

def test_parse_value_uses_toml_syntax() -> None:
    assert parse_value("[600, 2400]") == [600, 2400]
    assert parse_value("1.5") == 1.5
    assert parse_value("true") is True
    assert parse_value("crossfit") == "crossfit"


def test_parse_overrides_requires_key_value() -> None:
    assert parse_overrides(["R=3", "menus=[\"BRUZ\"]"]) == {"R": 3, "menus": ["BRUZ"]}
    with pytest.raises(ConfigError):
        parse_overrides(["R"])


def test_config_file_formats(tmp_path) -> None:
    toml_path = tmp_path / "mc.toml"
    toml_path.write_text("R = 7\nbeta_fix = [1.2]\n")
    json_path = tmp_path / "mc.json"
    json_path.write_text(json.dumps({"R": 5}))
    nested = tmp_path / "nested.toml"
    nested.write_text("[bridge]\nd_in = 4.0\n")

    assert load_config_file(toml_path) == {"R": 7, "beta_fix": [1.2]}
    assert load_config_file(json_path) == {"R": 5}
    with pytest.raises(ConfigError):
        load_config_file(nested)
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "missing.toml")


def test_override_precedence(tmp_path) -> None:
    path = tmp_path / "mc.toml"
    path.write_text("R = 7\nseed = 1\n")
    config = resolve_mc_config(path, ["R=3"], seed=99)
    assert config.R == 3
    assert config.seed == 99


# -----------------------------
# Exit codes
# -----------------------------

def test_missing_config_is_a_usage_error(tmp_path) -> None:
    assert main(["mc", "--config", str(tmp_path / "nope.toml"), "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize("override", ["bad", "replications=3", "group_size=5"])
def test_bad_override_is_a_usage_error(tmp_path, override) -> None:
    assert main(["mc", "--set", override, "--out", str(tmp_path)]) == 2


def test_bad_thread_variable_is_a_usage_error(tmp_path, monkeypatch) -> None:
    monkeypatch.setenv("PEERGEO_THREADS", "many")
    assert main(["twostar", "--out", str(tmp_path)]) == 2


def test_missing_input_is_a_runtime_failure(tmp_path) -> None:
    code = main(["instruments", "--edges", str(tmp_path / "e.csv"), "--nodes", str(tmp_path / "n.csv"),
                 "--out", str(tmp_path), "--threads", "1"])
    assert code == 1


# -----------------------------
# twostar
# -----------------------------

def test_twostar_reports_collapse(tmp_path, capsys) -> None:
    assert main(["twostar", "--out", str(tmp_path), "--threads", "1"]) == 0
    assert "collapse verified" in capsys.readouterr().out
    saved = json.loads((tmp_path / "twostar.json").read_text())
    assert saved["collapse"] is True
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "twostar"
    assert manifest["finished_at"] is not None


def test_twostar_json_with_unequal_hubs(tmp_path, capsys) -> None:
    assert main(["twostar", "--sizes", "3", "6", "--unequal-hubs", "--json", "--out", str(tmp_path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["collapse"] is False
    assert report["peripheral_norms"]["a"] != report["peripheral_norms"]["b"]


def test_twostar_fails_when_shell_two_misses_siblings(tmp_path, capsys) -> None:
    assert main(["twostar", "--sizes", "8", "8", "--out", str(tmp_path), "--threads", "1"]) == 1
    out = capsys.readouterr().out
    assert "collapse verified" not in out
    assert "only for 3 to 7 peripherals" in out
    saved = json.loads((tmp_path / "twostar.json").read_text())
    assert saved["collapse"] is False
    assert saved["hop_shell2_max_error"] <= 1e-12


def test_twostar_rejects_small_stars(tmp_path) -> None:
    assert main(["twostar", "--sizes", "1", "5", "--out", str(tmp_path)]) == 2


def test_output_directory_from_environment(tmp_path, monkeypatch) -> None:
    monkeypatch.setenv("PEERGEO_OUTPUT_DIR", str(tmp_path / "runs"))
    assert main(["twostar", "--threads", "1"]) == 0
    assert (tmp_path / "runs" / "twostar" / "twostar.json").exists()


# -----------------------------
# mc
# -----------------------------

def test_mc_writes_tables_and_manifest(tmp_path) -> None:
    assert main(["mc", *MC_SMALL, "--seed", "3", "--threads", "1", "--out", str(tmp_path)]) == 0
    table1 = pd.read_csv(tmp_path / "table1.csv")
    assert list(table1.columns) == ["n", "beta", "bias_BRUZ", "rmse_BRUZ"]
    assert len(table1) == 1
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seed"] == 3
    assert manifest["config"]["R"] == 1
    assert set(manifest["timings"]) == {"simulate", "emit"}
    assert str(tmp_path / "tables.xlsx") in manifest["outputs"]


def test_mc_tables_are_identical_across_worker_counts(tmp_path) -> None:
    runs = ["--set", "R=4", "--set", 'menus=["BRUZ", "GEO"]']
    serial, parallel = tmp_path / "serial", tmp_path / "parallel"
    assert main(["mc", *MC_SMALL, *runs, "--seed", "5", "--threads", "1", "--out", str(serial)]) == 0
    assert main(["mc", *MC_SMALL, *runs, "--seed", "5", "--threads", "2", "--out", str(parallel)]) == 0
    for name in ("table1.csv", "table2.csv"):
        assert (serial / name).read_bytes() == (parallel / name).read_bytes()


# -----------------------------
# instruments
# -----------------------------

def test_instruments_on_two_stars(tmp_path, star_files) -> None:
    edges, nodes = star_files
    out = tmp_path / "inst"
    code = main(["instruments", "--edges", str(edges), "--nodes", str(nodes), "--beta", "1.2",
                 "--predictor", "oracle", "--oracle-gamma", "0,1", "--out", str(out), "--threads", "1"])
    assert code == 0

    table = pd.read_csv(out / "instruments.csv")
    assert list(table.columns[:5]) == ["group", "node", "const", "x1", "yhat"]
    assert "phi" in table.columns
    assert len(table) == 10
    np.testing.assert_allclose(table["yhat"], table["x1"])

    index_map = pd.read_csv(out / "index_map.csv")
    assert list(index_map.columns) == ["index", "group_index", "group", "node", "cluster_id"]
    assert not (out / "first_stage.json").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["inputs"]) == {str(edges), str(nodes)}


def test_instruments_with_outcome_report_first_stage(tmp_path, bridge_files) -> None:
    edges, nodes = bridge_files
    out = tmp_path / "inst"
    code = main(["instruments", "--edges", str(edges), "--nodes", str(nodes), "--family", "lim",
                 "--menu", "bruz", "--predictor", "ols", "--out", str(out), "--threads", "1"])
    assert code == 0
    first_stage = json.loads((out / "first_stage.json").read_text())
    assert first_stage["menu"] == "bruz"
    assert 0.0 <= first_stage["partial_r2"] <= 1.0


# -----------------------------
# estimate
# -----------------------------

def test_estimate_writes_comparison(tmp_path, bridge_files) -> None:
    edges, nodes = bridge_files
    out = tmp_path / "est"
    code = main(["estimate", "--edges", str(edges), "--nodes", str(nodes), "--family", "lim",
                 "--predictor", "ols", "--out", str(out), "--threads", "1"])
    assert code == 0

    comparison = pd.read_csv(out / "comparison.csv")
    assert list(comparison.columns) == ["Param(BRUZ)", "Param(GEO)", "lambda_BRUZ", "se_BRUZ", "lambda_GEO", "se_GEO"]
    assert np.isfinite(comparison.loc[0, "lambda_BRUZ"])
    for name in ("profile_BRUZ.csv", "estimate.json", "manifest.json"):
        assert (out / name).exists()
    payload = json.loads((out / "estimate.json").read_text())
    assert payload["grid"] == [None]
    assert set(payload["menus"]) == {"BRUZ", "GEO"}


def test_estimate_needs_an_outcome(tmp_path, star_files) -> None:
    edges, nodes = star_files
    code = main(["estimate", "--edges", str(edges), "--nodes", str(nodes), "--out", str(tmp_path), "--threads", "1"])
    assert code == 1
