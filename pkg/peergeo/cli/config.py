"""
Configuration loading for the command line: TOML or JSON files plus
``--set key=value`` overrides, resolved into an McConfig.
"""

import json
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

from peergeo.errors import ConfigError
from peergeo.montecarlo.config import McConfig

# -----------------------------
# CONFIG
# -----------------------------
THREADS_ENV = "PEERGEO_THREADS"
OUTPUT_DIR_ENV = "PEERGEO_OUTPUT_DIR"
DEFAULT_OUTPUT_ROOT = "peergeo_out"


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}", key=THREADS_ENV) from None


def default_output_dir(command: str) -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_ROOT)) / command


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Flat key/value mapping from a .json file, or TOML for anything else."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}", key="config")
    try:
        if path.suffix.lower() == ".json":
            with open(path) as f:
                values = json.load(f)
        else:
            with open(path, "rb") as f:
                values = tomllib.load(f)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot parse {path}: {e}", key="config") from e
    if not isinstance(values, dict):
        raise ConfigError(f"{path} must hold a key/value table", key="config")
    for key, value in values.items():
        if isinstance(value, dict):
            raise ConfigError(f"nested table {key!r} is not supported; use flat keys", key=key)
    return values


def parse_value(raw: str) -> Any:
    """TOML scalar or array syntax (1.2, [600, 2400], true); bare words stay strings."""
    try:
        return tomllib.loads(f"value = {raw}")["value"]
    except tomllib.TOMLDecodeError:
        return raw.strip()


def parse_overrides(items: Iterable[str]) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for item in items:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"override must look like key=value, got {item!r}", key=item)
        out[key] = parse_value(raw)
    return out


def resolve_mc_config(
    config_path: Optional[Union[str, Path]] = None,
    overrides: Iterable[str] = (),
    seed: Optional[int] = None,
) -> McConfig:
    """Defaults < config file < --set overrides < --seed."""
    values: Dict[str, Any] = {}
    if config_path is not None:
        values.update(load_config_file(config_path))
    values.update(parse_overrides(overrides))
    if seed is not None:
        values["seed"] = seed
    return McConfig.from_mapping(values)
