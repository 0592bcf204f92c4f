"""Dispersion-bridge and two-star designs, the replication loop and its tables."""

from peergeo.montecarlo.config import MENU_PRESETS, BridgeParams, McConfig, menu_spec
from peergeo.montecarlo.designs import (
    GroupDraw,
    TwoStarReport,
    dispersion_bridge,
    sibling_sums,
    two_star,
    two_star_diagnostics,
)
from peergeo.montecarlo.runner import McCell, McReport, draw_bridge_panel, reduce_outcomes, replicate, run_mc
from peergeo.montecarlo.tables import accuracy_table, emit_tables, strength_table

__all__ = [
    "MENU_PRESETS",
    "BridgeParams",
    "GroupDraw",
    "McCell",
    "McConfig",
    "McReport",
    "TwoStarReport",
    "accuracy_table",
    "dispersion_bridge",
    "draw_bridge_panel",
    "emit_tables",
    "menu_spec",
    "reduce_outcomes",
    "replicate",
    "run_mc",
    "sibling_sums",
    "strength_table",
    "two_star",
    "two_star_diagnostics",
]
