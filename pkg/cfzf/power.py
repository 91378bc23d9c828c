"""
Uplink Power Control Module

Full-power and fractional (large-scale-fading based) data power allocation.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .scenario import NetworkRealization


class PowerMode(Enum):
    """Power allocation policies."""
    FULL = "full"
    FRACTIONAL = "fractional"


@dataclass(frozen=True)
class PowerAllocation:
    """Per-UE uplink data powers (W)."""
    p_ul: np.ndarray
    mode: PowerMode


def full_power(K: int, p_max: float) -> PowerAllocation:
    """Every UE transmits at p_max."""
    if p_max <= 0:
        raise ValueError(f"p_max must be positive (got {p_max})")
    return PowerAllocation(p_ul=np.full(K, float(p_max)), mode=PowerMode.FULL)


def fractional_power(net: NetworkRealization, p_max: float, exponent: float = 1.0) -> PowerAllocation:
    """
    Fractional power control.

    p_k = p_max * (min_j s_j / s_k)^exponent with s_k = sum_l beta_kl, so the
    UE with the weakest aggregate gain transmits at p_max.
    """
    if p_max <= 0:
        raise ValueError(f"p_max must be positive (got {p_max})")
    aggregate = net.beta.sum(axis=1)
    if np.any(aggregate <= 0):
        raise ValueError("large-scale fading coefficients must be positive")
    p_ul = p_max * (aggregate.min() / aggregate) ** exponent
    return PowerAllocation(p_ul=p_ul, mode=PowerMode.FRACTIONAL)


def allocate(mode: PowerMode, net: NetworkRealization, p_max: float,
             exponent: float = 1.0) -> PowerAllocation:
    if mode is PowerMode.FRACTIONAL:
        return fractional_power(net, p_max, exponent)
    return full_power(net.K, p_max)
