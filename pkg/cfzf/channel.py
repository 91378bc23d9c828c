"""
Channel Module

MMSE estimation statistics, small-scale fading draws and the per-AP pilot
basis matrices the combiners are built from.

Pilot basis convention: column i of Hbar[l] is
``sqrt(tau_p) * sum_{t on pilot i} sqrt(p_t) h_tl + n`` with ``n ~ CN(0, sigma2 I)``,
i.e. the received pilot block despread by the orthogonal pilot book and
divided by sqrt(tau_p). Its per-entry variance is ``theta[i, l]``.
"""

from dataclasses import dataclass

import numpy as np

from .pilots import PilotAssignment
from .scenario import NetworkRealization


@dataclass(frozen=True)
class EstimationStats:
    """
    Estimation scalars c (K x L), estimate variances gamma (K x L), theta (tau_p x L).

    The fading table and noise power travel along so combiners and closed
    forms need nothing else from the drop.
    """
    c: np.ndarray
    gamma: np.ndarray
    theta: np.ndarray
    p_pilot: np.ndarray
    beta: np.ndarray
    sigma2: float


@dataclass
class ChannelWorkspace:
    """
    One coherence block.

    Shapes: h and hhat are (K, L, N); Hbar is (L, N, tau_p).
    """
    h: np.ndarray
    Hbar: np.ndarray
    hhat: np.ndarray

    @property
    def N(self) -> int:
        return self.h.shape[2]

    def scaled(self, s: complex) -> "ChannelWorkspace":
        return ChannelWorkspace(h=self.h * s, Hbar=self.Hbar * s, hhat=self.hhat * s)


def estimation_stats(net: NetworkRealization, pa: PilotAssignment, p_pilot) -> EstimationStats:
    """
    MMSE estimation statistics for every UE/AP pair.

    Args:
        net: Network drop
        pa: Pilot assignment
        p_pilot: Per-UE pilot powers (scalar broadcasts)

    Returns:
        EstimationStats
    """
    K, L = net.beta.shape
    p_pilot = np.broadcast_to(np.asarray(p_pilot, dtype=float), (K,)).copy()
    if np.any(p_pilot <= 0):
        raise ValueError("pilot powers must be positive")

    tau_p = pa.tau_p
    received = p_pilot[:, None] * net.beta
    theta = np.full((tau_p, L), net.sigma2, dtype=float)
    np.add.at(theta, pa.pilot_index, tau_p * received)

    denom = theta[pa.pilot_index]
    c = np.sqrt(p_pilot * tau_p)[:, None] * net.beta / denom
    gamma = tau_p * p_pilot[:, None] * net.beta ** 2 / denom

    return EstimationStats(c=c, gamma=gamma, theta=theta, p_pilot=p_pilot,
                           beta=net.beta, sigma2=net.sigma2)


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) samples; real parts are drawn before imaginary parts."""
    real = rng.standard_normal(shape)
    imag = rng.standard_normal(shape)
    return (real + 1j * imag) / np.sqrt(2.0)


def draw_block(net: NetworkRealization, pa: PilotAssignment, stats: EstimationStats,
               rng: np.random.Generator, N: int) -> ChannelWorkspace:
    """
    Draw Rayleigh channels, the pilot basis and the MMSE estimates for one block.

    Stream order: channel real/imag parts, then pilot-noise real/imag parts.
    """
    K, L = net.beta.shape
    tau_p = pa.tau_p

    h = np.sqrt(net.beta)[:, :, None] * _complex_normal(rng, (K, L, N))
    noise = np.sqrt(net.sigma2) * _complex_normal(rng, (L, N, tau_p))

    spread = np.zeros((K, tau_p))
    spread[np.arange(K), pa.pilot_index] = np.sqrt(tau_p * stats.p_pilot)
    Hbar = np.einsum('kln,ki->lni', h, spread) + noise

    hhat = stats.c[:, :, None] * np.transpose(Hbar[:, :, pa.pilot_index], (2, 0, 1))

    return ChannelWorkspace(h=h, Hbar=Hbar, hhat=hhat)
