"""Transport operator and geometry-induced instrument construction."""

from peergeo.geometry.diagnostics import DesignDiagnostics, design_diagnostics
from peergeo.geometry.instruments import (
    DEFAULT_EPSILON0,
    DEFAULT_H,
    DEFAULT_K,
    dtheta_multistep,
    effective_distances,
    friction_lengths,
    hop_distances,
    hop_shell_instruments,
    multistep_instruments,
    shell_instruments,
    torsion_instrument,
)
from peergeo.geometry.signature import (
    BLOCK_FLAGS,
    MENUS,
    InstrumentSignature,
    MenuSpec,
    bruz_menu,
    build_signature,
    emit_signature,
    geo_menu,
    resolve_menu,
)
from peergeo.geometry.transport import TransportOperator, influence_weights, transport

__all__ = [
    "BLOCK_FLAGS",
    "DEFAULT_EPSILON0",
    "DEFAULT_H",
    "DEFAULT_K",
    "MENUS",
    "DesignDiagnostics",
    "InstrumentSignature",
    "MenuSpec",
    "TransportOperator",
    "bruz_menu",
    "build_signature",
    "design_diagnostics",
    "dtheta_multistep",
    "effective_distances",
    "emit_signature",
    "friction_lengths",
    "geo_menu",
    "hop_distances",
    "hop_shell_instruments",
    "influence_weights",
    "multistep_instruments",
    "resolve_menu",
    "shell_instruments",
    "torsion_instrument",
    "transport",
]
