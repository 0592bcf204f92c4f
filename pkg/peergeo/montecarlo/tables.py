"""
Table output for Monte Carlo reports: accuracy (bias / RMSE) and
first-stage strength (partial R² / F) per (n, β), one column pair per menu.
"""

import json
import logging
import platform
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd
import scipy
from openpyxl import load_workbook
from openpyxl.styles import Font, PatternFill

from peergeo.montecarlo.config import McConfig
from peergeo.montecarlo.runner import McReport

logger = logging.getLogger(__name__)

# -----------------------------
# CONFIG
# -----------------------------
TABLE_FLOAT_FORMAT = "%.6f"
WEAK_F = 10.0
WEAK_FILL = PatternFill(start_color="FF9999", end_color="FF9999", fill_type="solid")
TABLE1 = "table1.csv"
TABLE2 = "table2.csv"
WORKBOOK = "tables.xlsx"
REPORT = "report.json"
META = "meta.json"
FAILURES = "failures.json"


def _grid(report: McReport) -> List[tuple]:
    seen = []
    for c in report.cells:
        if (c.n, c.beta) not in seen:
            seen.append((c.n, c.beta))
    return seen


def accuracy_table(report: McReport) -> pd.DataFrame:
    """n, beta, bias_<menu>, rmse_<menu> for each menu."""
    columns = ["n", "beta"] + [f"{k}_{m}" for m in report.menus for k in ("bias", "rmse")]
    rows = []
    for n, beta in _grid(report):
        row: Dict[str, float] = {"n": n, "beta": beta}
        for m in report.menus:
            cell = report.cell(n, beta, m)
            row[f"bias_{m}"] = cell.bias
            row[f"rmse_{m}"] = cell.rmse
        rows.append(row)
    return pd.DataFrame(rows, columns=columns)


def strength_table(report: McReport) -> pd.DataFrame:
    """n, beta, r2_<menu>, f_<menu> for each menu."""
    columns = ["n", "beta"] + [f"{k}_{m}" for m in report.menus for k in ("r2", "f")]
    rows = []
    for n, beta in _grid(report):
        row: Dict[str, float] = {"n": n, "beta": beta}
        for m in report.menus:
            cell = report.cell(n, beta, m)
            row[f"r2_{m}"] = cell.mean_partial_r2
            row[f"f_{m}"] = cell.mean_f
        rows.append(row)
    return pd.DataFrame(rows, columns=columns)


def _highlight_weak(path: Path) -> None:
    wb = load_workbook(path)
    header_font = Font(bold=True)
    for ws in wb.worksheets:
        for cell in ws[1]:
            cell.font = header_font
    ws = wb["strength"]
    f_columns = [cell.column for cell in ws[1] if str(cell.value).startswith("f_")]
    for row in ws.iter_rows(min_row=2, max_row=ws.max_row):
        for cell in row:
            if cell.column in f_columns and isinstance(cell.value, (int, float)) and cell.value < WEAK_F:
                cell.fill = WEAK_FILL
    wb.save(path)


def versions() -> Dict[str, str]:
    from peergeo import __version__

    return {
        "peergeo": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
    }


def emit_tables(
    report: McReport,
    path: Union[str, Path],
    config: Optional[McConfig] = None,
) -> Dict[str, Path]:
    """Write table1.csv, table2.csv, tables.xlsx, report.json, failures.json and meta.json under ``path``.

    Returns the written paths by name.
    """
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    files = {name: out / name for name in (TABLE1, TABLE2, WORKBOOK, REPORT, FAILURES, META)}

    acc, strength = accuracy_table(report), strength_table(report)
    acc.to_csv(files[TABLE1], index=False, float_format=TABLE_FLOAT_FORMAT)
    strength.to_csv(files[TABLE2], index=False, float_format=TABLE_FLOAT_FORMAT)

    with pd.ExcelWriter(files[WORKBOOK], engine="openpyxl") as writer:
        acc.to_excel(writer, sheet_name="accuracy", index=False)
        strength.to_excel(writer, sheet_name="strength", index=False)
    _highlight_weak(files[WORKBOOK])

    with open(files[REPORT], "w") as f:
        json.dump(report.to_dict(), f, indent=2)
    with open(files[FAILURES], "w") as f:
        json.dump(report.failure_records(), f, indent=2)
    meta = {"config_digest": report.config_digest, "versions": versions()}
    if config is not None:
        meta["config"] = config.to_dict()
    with open(files[META], "w") as f:
        json.dump(meta, f, indent=2)

    logger.info("tables written to %s (%d rows)", out, len(acc))
    return files
