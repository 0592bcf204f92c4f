"""
Design summaries for a built panel: how much the exposure, the transport
weights and the Jacobian intensity vary across nodes.
"""

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from peergeo.geometry.transport import TransportOperator
from peergeo.netcore.network import Network


@dataclass(frozen=True)
class DesignDiagnostics:
    exposure_dispersion: float
    weight_concentration_mean: float
    weight_concentration_p90: float
    intensity_dispersion: float

    def to_dict(self) -> dict:
        return asdict(self)


def _coef_of_variation(v: np.ndarray) -> float:
    if v.size == 0:
        return float("nan")
    mean = float(np.mean(v))
    if mean == 0.0:
        return float("nan")
    return float(np.std(v) / abs(mean))


def design_diagnostics(
    exposure: np.ndarray,
    transports: Sequence[TransportOperator],
    yhat: np.ndarray,
    networks: Sequence[Network],
    beta: Optional[float] = None,
    shift: float = 0.0,
) -> DesignDiagnostics:
    """Three summaries over non-isolates, stacked across groups:

    - sd/mean of the endogenous exposure
    - mean and 90th percentile of max_j P_ij (concentration of transport weight)
    - sd/mean of s_i = Σ_j g_ij (ŷ_j + c)^{β−1} (Jacobian row-sum intensity; β = 1 when None)
    """
    live = np.concatenate([~net.isolate_mask for net in networks]) if networks else np.zeros(0, dtype=bool)
    exposure = np.asarray(exposure, dtype=float).reshape(-1)
    yhat = np.asarray(yhat, dtype=float).reshape(-1)

    concentration = np.concatenate([op.P.max(axis=1) if op.n else np.zeros(0) for op in transports])[live]
    power = 0.0 if beta is None else beta - 1.0
    intensity = []
    start = 0
    for net in networks:
        a = yhat[start:start + net.n] + shift
        with np.errstate(divide="ignore", invalid="ignore"):
            base = np.where(net.weights > 0.0, np.power(np.abs(a)[None, :], power), 0.0)
        intensity.append((net.weights * base).sum(axis=1))
        start += net.n
    intensity = np.concatenate(intensity)[live] if intensity else np.zeros(0)

    return DesignDiagnostics(
        exposure_dispersion=_coef_of_variation(exposure[live]),
        weight_concentration_mean=float(np.mean(concentration)) if concentration.size else float("nan"),
        weight_concentration_p90=float(np.percentile(concentration, 90)) if concentration.size else float("nan"),
        intensity_dispersion=_coef_of_variation(intensity),
    )
