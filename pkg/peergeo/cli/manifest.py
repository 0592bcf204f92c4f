"""
Run manifest: what ran, with which configuration and inputs, what it wrote
and how long each phase took.
"""

import hashlib
import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Union

import pytz

from peergeo.errors import PeerGeoError

MANIFEST = "manifest.json"


def utc_now() -> str:
    return datetime.now(pytz.utc).isoformat()


def sha256_file(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    started_at: str = field(default_factory=utc_now)
    finished_at: Optional[str] = None
    timings: Dict[str, float] = field(default_factory=dict)

    def add_input(self, path: Union[str, Path]) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def add_outputs(self, *paths: Union[str, Path]) -> None:
        self.outputs.extend(str(p) for p in paths)

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        started = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = round(time.perf_counter() - started, 6)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "timings": self.timings,
        }

    def write(self, out_dir: Union[str, Path]) -> Path:
        """Write manifest.json; every listed output must exist."""
        missing = [p for p in self.outputs if not Path(p).exists()]
        if missing:
            raise PeerGeoError(f"manifest lists missing outputs: {', '.join(missing)}")
        self.finished_at = utc_now()
        path = Path(out_dir) / MANIFEST
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
        return path
