"""
Instrument menus: the BRUZ one-step block and the geometry-augmented
signature, per group and stacked for a whole panel.
"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from peergeo.aggregators.derivatives import DEFAULT_STEP, dtheta_exposure
from peergeo.aggregators.norms import exposure
from peergeo.aggregators.spec import AggregatorSpec, Family, THETA_FAMILIES
from peergeo.errors import ConfigError
from peergeo.geometry.instruments import (
    DEFAULT_EPSILON0,
    DEFAULT_H,
    DEFAULT_K,
    dtheta_multistep,
    effective_distances,
    hop_shell_instruments,
    multistep_instruments,
    shell_instruments,
    torsion_instrument,
)
from peergeo.geometry.transport import transport
from peergeo.netcore.network import Network

logger = logging.getLogger(__name__)

BLOCK_FLAGS = frozenset({"steps", "shells", "torsion", "adj_shell2", "dtheta_step2"})


@dataclass(frozen=True)
class MenuSpec:
    """Which geometry blocks to build on top of the BRUZ block."""

    name: str
    include: FrozenSet[str] = frozenset()
    K: int = DEFAULT_K
    H: int = DEFAULT_H
    epsilon0: float = DEFAULT_EPSILON0
    cutoff: Optional[float] = None
    include_dtheta: Optional[bool] = None  # None: only for CES / SmoothMax

    def __post_init__(self) -> None:
        include = frozenset(self.include)
        unknown = include - BLOCK_FLAGS
        if unknown:
            raise ConfigError(f"unknown instrument block(s): {', '.join(sorted(unknown))}", key=sorted(unknown)[0])
        object.__setattr__(self, "include", include)


MENUS: Dict[str, MenuSpec] = {
    "bruz": MenuSpec("bruz"),
    # P²X, its θ-derivative and the row-normalized distance-2 adjacency block
    "geo5": MenuSpec("geo5", frozenset({"steps", "dtheta_step2", "adj_shell2"}), K=2),
    "geo": MenuSpec("geo", frozenset({"steps", "shells", "torsion"})),
}


def resolve_menu(menu: Union[str, MenuSpec]) -> MenuSpec:
    if isinstance(menu, MenuSpec):
        return menu
    key = str(menu).strip().lower().replace("-", "_")
    key = {"geo_full": "geo", "geo_5": "geo5"}.get(key, key)
    if key not in MENUS:
        raise ConfigError(f"unknown menu {menu!r}; expected one of {', '.join(MENUS)}", key="menu")
    return MENUS[key]


@dataclass(frozen=True, eq=False)
class InstrumentSignature:
    """Per-node instruments: included exogenous X plus excluded blocks.

    ``excluded`` stacks the blocks in a fixed order: BRUZ [Φ, ∂θΦ], steps
    (P²X … P^K X), ∂θ(P²X), adjacency shell 2, effective shells 2..H, torsion.
    """

    X: np.ndarray
    x_names: Tuple[str, ...]
    bruz_block: np.ndarray
    bruz_columns: Tuple[str, ...]
    step_block: Optional[np.ndarray] = None
    dtheta_step_block: Optional[np.ndarray] = None
    adj_shell_block: Optional[np.ndarray] = None
    shell_blocks: Optional[np.ndarray] = None
    torsion_block: Optional[np.ndarray] = None
    K: int = DEFAULT_K
    H: int = DEFAULT_H
    epsilon0: float = DEFAULT_EPSILON0
    menu: str = "bruz"

    def _named_blocks(self) -> List[Tuple[Optional[np.ndarray], List[str]]]:
        xs = list(self.x_names)
        return [
            (self.bruz_block, list(self.bruz_columns)),
            (self.step_block, [f"step{k}_{x}" for k in range(2, self.K + 1) for x in xs]),
            (self.dtheta_step_block, [f"dtheta_step2_{x}" for x in xs]),
            (self.adj_shell_block, [f"adj_shell2_{x}" for x in xs]),
            (self.shell_blocks, [f"shell{h}_{x}" for h in range(2, self.H + 1) for x in xs]),
            (self.torsion_block, [f"torsion_{x}" for x in xs]),
        ]

    @property
    def columns(self) -> Tuple[str, ...]:
        return tuple(name for block, names in self._named_blocks() if block is not None for name in names)

    @property
    def excluded(self) -> np.ndarray:
        blocks = [block for block, _ in self._named_blocks() if block is not None]
        return np.hstack(blocks)

    def full(self) -> np.ndarray:
        """[X, excluded instruments]."""
        return np.hstack([self.X, self.excluded])

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @classmethod
    def stack(cls, parts: Sequence["InstrumentSignature"]) -> "InstrumentSignature":
        """Row-stack per-group signatures built with the same menu."""
        if not parts:
            raise ValueError("nothing to stack")
        first = parts[0]

        def vstack(attr: str) -> Optional[np.ndarray]:
            if getattr(first, attr) is None:
                return None
            return np.vstack([getattr(p, attr) for p in parts])

        return replace(
            first,
            X=np.vstack([p.X for p in parts]),
            bruz_block=np.vstack([p.bruz_block for p in parts]),
            step_block=vstack("step_block"),
            dtheta_step_block=vstack("dtheta_step_block"),
            adj_shell_block=vstack("adj_shell_block"),
            shell_blocks=vstack("shell_blocks"),
            torsion_block=vstack("torsion_block"),
        )


# -----------------------------
# Menus
# -----------------------------

def _wants_dtheta(spec: AggregatorSpec, include_dtheta: Optional[bool]) -> bool:
    if include_dtheta is None:
        return spec.family in THETA_FAMILIES
    return include_dtheta and spec.family is not Family.LIM


def _bruz_block(
    net: Network,
    yhat: np.ndarray,
    spec: AggregatorSpec,
    include_dtheta: Optional[bool] = None,
    step: float = DEFAULT_STEP,
) -> Tuple[np.ndarray, Tuple[str, ...]]:
    cols = [exposure(net, yhat, spec).filled(0.0)]
    names = ["phi"]
    if _wants_dtheta(spec, include_dtheta):
        d = dtheta_exposure(net, yhat, spec, step=step, allow_quantile=spec.family is Family.QUANTILE)
        cols.append(d.filled(0.0))
        names.append("dtheta_phi")
    return np.column_stack(cols), tuple(names)


def bruz_menu(
    net: Network,
    yhat: np.ndarray,
    X: np.ndarray,
    spec: AggregatorSpec,
    include_dtheta: Optional[bool] = None,
    step: float = DEFAULT_STEP,
) -> np.ndarray:
    """[x_i, Φ_i(ŷ; θ), ∂θΦ_i(ŷ; θ)] per node; ∂θ is dropped for LIM and (by default) Quantile."""
    block, _ = _bruz_block(net, yhat, spec, include_dtheta, step)
    return np.hstack([np.asarray(X, dtype=float).reshape(net.n, -1), block])


def geo_menu(
    net: Network,
    yhat: np.ndarray,
    X: np.ndarray,
    spec: AggregatorSpec,
    K: int = DEFAULT_K,
    H: int = DEFAULT_H,
    epsilon0: float = DEFAULT_EPSILON0,
    include: Iterable[str] = frozenset(),
    x_names: Sequence[str] = (),
    cutoff: Optional[float] = None,
    include_dtheta: Optional[bool] = None,
    step: float = DEFAULT_STEP,
) -> InstrumentSignature:
    """BRUZ block plus the selected geometry blocks for one group."""
    menu = MenuSpec("custom", frozenset(include), K=K, H=H, epsilon0=epsilon0, cutoff=cutoff, include_dtheta=include_dtheta)
    X = np.asarray(X, dtype=float).reshape(net.n, -1)
    names = tuple(x_names) if x_names else tuple(f"x{k}" for k in range(X.shape[1]))
    bruz, bruz_cols = _bruz_block(net, yhat, spec, include_dtheta, step)

    blocks: Dict[str, np.ndarray] = {}
    flags = menu.include
    if flags & {"steps", "shells", "torsion"}:
        op = transport(net, yhat, spec)
        if "steps" in flags:
            steps = multistep_instruments(op, X, K)
            blocks["step_block"] = np.hstack([steps[k] for k in range(2, K + 1)])
        if "shells" in flags:
            shells = shell_instruments(effective_distances(op, epsilon0, cutoff), X, H)
            blocks["shell_blocks"] = np.hstack([shells[h] for h in range(2, H + 1)])
        if "torsion" in flags:
            blocks["torsion_block"] = torsion_instrument(op, X)
    if "dtheta_step2" in flags and spec.family in THETA_FAMILIES:
        blocks["dtheta_step_block"] = dtheta_multistep(net, yhat, X, spec, step=step, k=2)
    if "adj_shell2" in flags:
        blocks["adj_shell_block"] = hop_shell_instruments(net, X, h=2, normalize=True)

    return InstrumentSignature(
        X=X,
        x_names=names,
        bruz_block=bruz,
        bruz_columns=bruz_cols,
        K=K,
        H=H,
        epsilon0=epsilon0,
        **blocks,
    )


def build_signature(
    panel,
    yhat: np.ndarray,
    spec: AggregatorSpec,
    menu: Union[str, MenuSpec] = "bruz",
    step: float = DEFAULT_STEP,
) -> InstrumentSignature:
    """Stacked signature for every group of ``panel`` in panel node order."""
    menu = resolve_menu(menu)
    yhat = np.asarray(yhat, dtype=float).reshape(-1)
    parts = [
        geo_menu(
            net,
            yhat[sl],
            panel.X[sl],
            spec,
            K=menu.K,
            H=menu.H,
            epsilon0=menu.epsilon0,
            include=menu.include,
            x_names=panel.x_names,
            cutoff=menu.cutoff,
            include_dtheta=menu.include_dtheta,
            step=step,
        )
        for net, sl in panel.iter_groups()
    ]
    signature = replace(InstrumentSignature.stack(parts), menu=menu.name)
    logger.debug("%s signature: %d excluded columns for %d nodes", menu.name, len(signature.columns), signature.n)
    return signature


def emit_signature(
    signature: InstrumentSignature,
    path: Union[str, Path],
    labels: Optional[pd.DataFrame] = None,
    yhat: Optional[np.ndarray] = None,
) -> pd.DataFrame:
    """Write the signature as CSV; ``labels`` (group/node columns) are prepended when given."""
    df = pd.DataFrame(signature.X, columns=list(signature.x_names))
    if yhat is not None:
        df["yhat"] = np.asarray(yhat, dtype=float)
    df = pd.concat([df, pd.DataFrame(signature.excluded, columns=list(signature.columns))], axis=1)
    if labels is not None:
        df = pd.concat([labels.reset_index(drop=True), df], axis=1)
    df.to_csv(path, index=False, float_format="%.17g")
    return df
