"""
Monte Carlo configuration: the dispersion-bridge design constants and the
replication settings, with flat-mapping (TOML / JSON / --set) conversion.
"""

import hashlib
import json
from dataclasses import dataclass, field, fields
from typing import Any, Dict, Mapping, Tuple

from peergeo.equilibrium.solver import DEFAULT_MAX_ITER, DEFAULT_TOL
from peergeo.errors import ConfigError, DomainError
from peergeo.geometry.signature import MenuSpec, resolve_menu
from peergeo.predictor.predict import PredictorKind, PredictorSpec

# -----------------------------
# CONFIG
# -----------------------------
DEFAULT_SEED = 20240611
MAX_DESIGN_ATTEMPTS = 100

# user-facing menu names → instrument menu presets
MENU_PRESETS: Dict[str, str] = {
    "BRUZ": "bruz",
    "GEO": "geo5",
    "GEO_FULL": "geo",
}


@dataclass(frozen=True)
class BridgeParams:
    """Dispersion-bridge group design: two equal blocks joined by a few anchor bridges.

    Each block holds ``hubs`` anchors with the covariate pinned at zero; every
    other node is a leaf tied to one anchor drawn at random. ``d_in`` is the
    expected count of extra leaf-leaf ties per leaf (0 keeps blocks as stars).
    """

    d_in: float = 0.0
    bridges: int = 1
    sigma_a: float = 4.0
    sigma_b: float = 10.0
    hubs: int = 1

    def __post_init__(self) -> None:
        if self.d_in < 0:
            raise DomainError(f"d_in must be nonnegative, got {self.d_in}")
        if self.hubs < 1:
            raise DomainError(f"each block needs at least one anchor, got hubs={self.hubs}")
        if self.bridges < 0:
            raise DomainError(f"bridges must be nonnegative, got {self.bridges}")
        if self.bridges > self.hubs * self.hubs:
            raise DomainError(f"{self.bridges} bridges exceed the {self.hubs * self.hubs} cross-block anchor pairs")
        if self.sigma_a <= 0 or self.sigma_b <= 0:
            raise DomainError("block covariate scales must be positive")

    @property
    def dispersion_ratio(self) -> float:
        return self.sigma_b / self.sigma_a


def menu_spec(name: str) -> MenuSpec:
    key = str(name).strip().upper().replace("-", "_")
    if key not in MENU_PRESETS:
        raise ConfigError(f"unknown menu {name!r}; expected one of {', '.join(MENU_PRESETS)}", key="menus")
    return resolve_menu(MENU_PRESETS[key])


@dataclass(frozen=True, eq=False)
class McConfig:
    n: Tuple[int, ...] = (600, 2400)
    group_size: int = 60
    beta_fix: Tuple[float, ...] = (0.8, 1.2, 1.6, 2.0)
    lambda0: float = 0.7
    gamma0: Tuple[float, ...] = (0.0, 1.0)
    sigma_eps: float = 1.0
    zeta_scale: float = 0.5
    R: int = 100
    predictor: PredictorSpec = field(default_factory=PredictorSpec)
    menus: Tuple[str, ...] = ("BRUZ", "GEO")
    seed: int = DEFAULT_SEED
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    bridge: BridgeParams = field(default_factory=BridgeParams)
    correlated_shocks: bool = False
    certify_contraction: bool = True

    def __post_init__(self) -> None:
        n = _as_tuple(self.n, int, "n")
        beta = _as_tuple(self.beta_fix, float, "beta_fix")
        menus = tuple(str(m).strip().upper().replace("-", "_") for m in _as_tuple(self.menus, str, "menus"))
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "beta_fix", beta)
        object.__setattr__(self, "menus", menus)
        object.__setattr__(self, "gamma0", _as_tuple(self.gamma0, float, "gamma0"))

        if int(self.R) < 1:
            raise ConfigError(f"R must be at least 1, got {self.R}", key="R")
        object.__setattr__(self, "R", int(self.R))
        if self.group_size < 8:
            raise ConfigError(f"group_size must be at least 8, got {self.group_size}", key="group_size")
        for size in n:
            if size % self.group_size:
                raise ConfigError(f"n={size} is not a multiple of group_size={self.group_size}", key="n")
        if len(self.gamma0) != 2:
            raise ConfigError("gamma0 holds (intercept, covariate) coefficients", key="gamma0")
        if any(b == 0.0 for b in beta):
            raise ConfigError("CES curvature beta_fix must be nonzero", key="beta_fix")
        for m in menus:
            menu_spec(m)
        if self.sigma_eps < 0 or self.zeta_scale < 0:
            raise ConfigError("sigma_eps and zeta_scale must be nonnegative", key="sigma_eps")

    def groups(self, n: int) -> int:
        return n // self.group_size

    # -----------------------------
    # Flat mapping
    # -----------------------------

    def to_dict(self) -> Dict[str, Any]:
        p, b = self.predictor, self.bridge
        return {
            "n": list(self.n),
            "group_size": self.group_size,
            "beta_fix": list(self.beta_fix),
            "lambda0": self.lambda0,
            "gamma0": list(self.gamma0),
            "sigma_eps": self.sigma_eps,
            "zeta_scale": self.zeta_scale,
            "R": self.R,
            "predictor": p.kind.value,
            "folds": p.folds,
            "group_effects": p.include_group_effects,
            "menus": list(self.menus),
            "seed": self.seed,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "d_in": b.d_in,
            "bridges": b.bridges,
            "sigma_a": b.sigma_a,
            "sigma_b": b.sigma_b,
            "hubs": b.hubs,
            "correlated_shocks": self.correlated_shocks,
            "certify_contraction": self.certify_contraction,
        }

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form."""
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")).hexdigest()

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "McConfig":
        """Build from flat keys (those of ``to_dict``); unknown keys raise ConfigError."""
        known = set(cls().to_dict())
        for key in values:
            if key not in known:
                raise ConfigError(f"unknown configuration key {key!r}", key=key)

        merged = {**cls().to_dict(), **dict(values)}
        try:
            predictor = PredictorSpec(
                kind=PredictorKind.parse(merged["predictor"]),
                folds=int(merged["folds"]),
                include_group_effects=bool(merged["group_effects"]),
                oracle_gamma=merged["gamma0"] if str(merged["predictor"]).lower() == "oracle" else None,
            )
            bridge = BridgeParams(
                d_in=float(merged["d_in"]),
                bridges=int(merged["bridges"]),
                sigma_a=float(merged["sigma_a"]),
                sigma_b=float(merged["sigma_b"]),
                hubs=int(merged["hubs"]),
            )
        except DomainError as e:
            raise ConfigError(str(e), key="predictor") from e
        plain = {f.name for f in fields(cls)} - {"predictor", "bridge"}
        kwargs = {k: merged[k] for k in plain}
        for key in ("group_size", "R", "seed", "max_iter"):
            kwargs[key] = _as_int(kwargs[key], key)
        for key in ("lambda0", "sigma_eps", "zeta_scale", "tol"):
            kwargs[key] = _as_float(kwargs[key], key)
        kwargs["correlated_shocks"] = bool(kwargs["correlated_shocks"])
        kwargs["certify_contraction"] = bool(kwargs["certify_contraction"])
        return cls(predictor=predictor, bridge=bridge, **kwargs)


def _as_tuple(value: Any, kind: type, key: str) -> tuple:
    items = value if isinstance(value, (list, tuple)) else [value]
    try:
        out = tuple(kind(v) for v in items)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must hold {kind.__name__} values, got {value!r}", key=key) from None
    if not out:
        raise ConfigError(f"{key} must not be empty", key=key)
    return out


def _as_int(value: Any, key: str) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {value!r}", key=key) from None


def _as_float(value: Any, key: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number, got {value!r}", key=key) from None
