import logging
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import pytest

from peergeo.montecarlo.designs import GroupDraw, two_star
from peergeo.netcore.network import Network, row_normalize
from peergeo.netcore.panel import Panel


@pytest.fixture(autouse=True)
def _quiet_logs(caplog):
    caplog.set_level(logging.WARNING)


@pytest.fixture
def make_network() -> Callable[..., Network]:
    """Random row-stochastic network; every node gets at least one peer."""

    def factory(n: int, seed: int = 0, density: float = 0.4, group_id: int = 0) -> Network:
        rng = np.random.default_rng(seed)
        raw = rng.random((n, n)) * (rng.random((n, n)) < density)
        np.fill_diagonal(raw, 0.0)
        for i in range(n):
            if raw[i].sum() == 0.0:
                raw[i, (i + 1) % n] = 1.0
        return row_normalize(raw, group_id=group_id)

    return factory


@pytest.fixture
def make_panel(make_network) -> Callable[..., Panel]:
    """Panel of random groups with X = [1, x] and x ~ U(0.5, 2)."""

    def factory(sizes: Sequence[int] = (8, 10, 12), seed: int = 0, density: float = 0.4) -> Panel:
        rng = np.random.default_rng(seed + 1000)
        groups = tuple(make_network(m, seed=seed + s, density=density, group_id=s) for s, m in enumerate(sizes))
        n = sum(sizes)
        X = np.column_stack([np.ones(n), rng.uniform(0.5, 2.0, size=n)])
        return Panel(groups=groups, X=X, x_names=("const", "x1"))

    return factory


@pytest.fixture
def star_draw() -> GroupDraw:
    return two_star(5, 5)


@pytest.fixture
def write_csv(tmp_path) -> Callable[[str, str], Path]:
    def writer(name: str, text: str) -> Path:
        path = tmp_path / name
        path.write_text(text)
        return path

    return writer
