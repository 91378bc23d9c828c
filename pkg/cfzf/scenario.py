"""
Network Scenario Module

Draws random AP/UE geometries on a square area and computes the large-scale
fading table every other stage of the simulator consumes.
"""

import logging
from dataclasses import dataclass, field, fields, asdict
from typing import Any, Dict, List, Optional

import numpy as np


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PathlossModel:
    """Distance-dependent pathloss with optional log-normal shadowing."""
    offset_dB: float = -30.5
    exponent: float = 3.67
    shadow_sigma_dB: float = 4.0
    min_distance_m: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    """
    Static description of one simulated network.

    Pilot power falls back to the data power budget when not given.
    """
    L: int
    N: int
    K: int
    tau_p: int
    tau_c: int = 200
    area_m: float = 1000.0
    p_max_W: float = 0.1
    p_pilot_W: Optional[float] = None
    noise_dBm: float = -94.0
    pathloss: PathlossModel = field(default_factory=PathlossModel)
    v_percent: float = 85.0
    seed: int = 0
    trials: int = 2000

    @property
    def pilot_power_W(self) -> float:
        return self.p_max_W if self.p_pilot_W is None else self.p_pilot_W

    @property
    def sigma2(self) -> float:
        return sigma2_from_dbm(self.noise_dBm)

    @property
    def prelog(self) -> float:
        return 1.0 - self.tau_p / self.tau_c

    def problems(self, zf_family: bool = False) -> List[str]:
        """
        Collect every violated invariant.

        Args:
            zf_family: Whether full-pilot zero-forcing will run on this scenario

        Returns:
            List of human-readable problems (empty when valid)
        """
        found = []
        if self.L < 1:
            found.append(f"L must be >= 1 (got {self.L})")
        if self.K < 1:
            found.append(f"K must be >= 1 (got {self.K})")
        if self.N < 1:
            found.append(f"N must be >= 1 (got {self.N})")
        if not 1 <= self.tau_p <= self.tau_c:
            found.append(f"tau_p must be in [1, tau_c={self.tau_c}] (got {self.tau_p})")
        if zf_family and self.N < self.tau_p + 1:
            found.append(f"full-pilot zero-forcing needs N >= tau_p + 1 (N={self.N}, tau_p={self.tau_p})")
        if self.p_max_W <= 0:
            found.append(f"p_max_W must be positive (got {self.p_max_W})")
        if self.p_pilot_W is not None and self.p_pilot_W <= 0:
            found.append(f"p_pilot_W must be positive (got {self.p_pilot_W})")
        if self.area_m <= 0:
            found.append(f"area_m must be positive (got {self.area_m})")
        if not 0 < self.v_percent <= 100:
            found.append(f"v_percent must be in (0, 100] (got {self.v_percent})")
        if self.trials < 1:
            found.append(f"trials must be >= 1 (got {self.trials})")
        if self.pathloss.min_distance_m <= 0:
            found.append("pathloss.min_distance_m must be positive")
        if self.pathloss.shadow_sigma_dB < 0:
            found.append("pathloss.shadow_sigma_dB must be non-negative")
        return found

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioConfig":
        """Build from a JSON-style mapping; unknown keys raise ValueError."""
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        data = dict(data)
        if 'pathloss' in data:
            pl = data['pathloss']
            pl_known = {f.name for f in fields(PathlossModel)}
            pl_unknown = set(pl) - pl_known
            if pl_unknown:
                raise ValueError(f"unknown pathloss keys: {sorted(pl_unknown)}")
            data['pathloss'] = PathlossModel(**pl)
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class NetworkRealization:
    """One network drop: positions (m) and the K x L fading table."""
    ap_positions: np.ndarray
    ue_positions: np.ndarray
    beta: np.ndarray
    sigma2: float

    @property
    def K(self) -> int:
        return self.beta.shape[0]

    @property
    def L(self) -> int:
        return self.beta.shape[1]


def sigma2_from_dbm(noise_dBm: float) -> float:
    """Noise power in watts."""
    return 10.0 ** ((noise_dBm - 30.0) / 10.0)


def pathloss_db(distance_m, model: PathlossModel, shadowing_db=0.0):
    """
    Large-scale gain in dB at the given distance(s).

    Distances below the model's minimum are clamped to it.

    Args:
        distance_m: Scalar or array of distances in meters
        model: Pathloss parameters
        shadowing_db: Shadowing realization(s) added to the result

    Returns:
        Gain in dB (same shape as the broadcast inputs)
    """
    d = np.maximum(np.asarray(distance_m, dtype=float), model.min_distance_m)
    gain = model.offset_dB - 10.0 * model.exponent * np.log10(d) + shadowing_db
    return float(gain) if np.ndim(gain) == 0 else gain


def generate_network(config: ScenarioConfig, rng: np.random.Generator) -> NetworkRealization:
    """
    Drop APs and UEs uniformly on the square and compute beta.

    Draw order: AP positions, UE positions, shadowing (only when enabled).
    """
    ap_positions = rng.uniform(0.0, config.area_m, size=(config.L, 2))
    ue_positions = rng.uniform(0.0, config.area_m, size=(config.K, 2))

    distance = np.linalg.norm(ue_positions[:, None, :] - ap_positions[None, :, :], axis=-1)
    if config.pathloss.shadow_sigma_dB > 0:
        shadowing = rng.normal(0.0, config.pathloss.shadow_sigma_dB, size=distance.shape)
    else:
        shadowing = 0.0

    beta = 10.0 ** (pathloss_db(distance, config.pathloss, shadowing) / 10.0)
    logger.debug(f"Generated network: L={config.L}, K={config.K}, beta range "
                 f"[{beta.min():.3e}, {beta.max():.3e}]")

    return NetworkRealization(
        ap_positions=ap_positions,
        ue_positions=ue_positions,
        beta=np.atleast_2d(beta),
        sigma2=config.sigma2,
    )
