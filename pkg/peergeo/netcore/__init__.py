"""Grouped network data: per-group weights, covariates, outcomes and file formats."""

from peergeo.netcore.io import emit_index_map, emit_panel, load_panel
from peergeo.netcore.network import ROW_SUM_TOL, Network, max_row_sum_error, row_normalize
from peergeo.netcore.panel import INTERCEPT_NAME, Panel, drop_isolates, require_full_rank

__all__ = [
    "INTERCEPT_NAME",
    "ROW_SUM_TOL",
    "Network",
    "Panel",
    "drop_isolates",
    "emit_index_map",
    "emit_panel",
    "load_panel",
    "max_row_sum_error",
    "require_full_rank",
    "row_normalize",
]
