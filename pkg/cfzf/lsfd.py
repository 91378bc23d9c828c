"""
Large-Scale Fading Decoding Module

Monte-Carlo estimation of the use-and-then-forget statistics of the
effective channels g_kt[l] = v_kl^H h_tl, the LSFD-optimal CPU weights and
the resulting SINR/SE.

Trials are split into fixed-size chunks. Chunk j draws from its own
SeedSequence child and chunk sums are reduced pairwise in chunk order, so
the moments do not depend on how many worker processes ran the chunks.
"""

import logging
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from itertools import repeat
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .channel import EstimationStats, draw_block
from .combining import CombinerError, Regularization, Scheme, build_combiners
from .pilots import GroupAssignment, PilotAssignment
from .scenario import NetworkRealization


logger = logging.getLogger(__name__)

HERMITIAN_TOLERANCE = 1e-10


class LSFDError(Exception):
    """Exception raised when LSFD weights or SINR cannot be computed."""
    pass


class Method(Enum):
    """Provenance of an SE value."""
    MONTE_CARLO = "monte-carlo"
    CLOSED_FORM = "closed-form"
    ASYMPTOTIC = "asymptotic"


@dataclass(frozen=True)
class GMoments:
    """
    Finalized effective-channel moments.

    mean_g[k, l] = E{g_kk[l]}; weighted_second[k] = sum_t p_t E{g_kt g_kt^H}
    for the powers the moments were accumulated with; second[k, t] holds the
    per-interferer matrices when accumulated with ``full=True``;
    noise_diag[k, l] = E{||v_kl||^2}.
    """
    mean_g: np.ndarray
    weighted_second: np.ndarray
    noise_diag: np.ndarray
    powers: np.ndarray
    trials_used: int
    second: Optional[np.ndarray] = None


@dataclass
class SEReport:
    """Per-UE SINR and SE of one scheme on one drop."""
    scheme: str
    power_mode: str
    method: Method
    sinr: np.ndarray
    se: np.ndarray
    prelog: float
    config_digest: str = ""
    weights: Optional[List[np.ndarray]] = field(default=None, repr=False)


@dataclass
class _MomentSums:
    mean_g: np.ndarray
    weighted_second: np.ndarray
    noise_diag: np.ndarray
    second: Optional[np.ndarray]
    count: int

    def __add__(self, other: "_MomentSums") -> "_MomentSums":
        return _MomentSums(
            mean_g=self.mean_g + other.mean_g,
            weighted_second=self.weighted_second + other.weighted_second,
            noise_diag=self.noise_diag + other.noise_diag,
            second=None if self.second is None else self.second + other.second,
            count=self.count + other.count,
        )


@dataclass
class MomentTask:
    """Everything a worker needs to run one chunk of trials."""
    scheme: Scheme
    net: NetworkRealization
    pa: PilotAssignment
    stats: EstimationStats
    powers: np.ndarray
    N: int
    trials: int
    entropy: int
    spawn_key: Tuple[int, ...]
    ga: Optional[GroupAssignment] = None
    alpha: float = 0.8
    regularization: Regularization = Regularization.SUM
    full: bool = False
    chunk_trials: int = 50
    draw: Callable = draw_block

    @property
    def n_chunks(self) -> int:
        return -(-self.trials // self.chunk_trials)


def _run_chunk(task: MomentTask, chunk: int) -> _MomentSums:
    seq = np.random.SeedSequence(entropy=task.entropy, spawn_key=tuple(task.spawn_key) + (chunk,))
    rng = np.random.default_rng(seq)
    K, L = task.stats.c.shape
    sqrt_p = np.sqrt(task.powers)

    sums = _MomentSums(
        mean_g=np.zeros((K, L), dtype=complex),
        weighted_second=np.zeros((K, L, L), dtype=complex),
        noise_diag=np.zeros((K, L)),
        second=np.zeros((K, K, L, L), dtype=complex) if task.full else None,
        count=0,
    )

    start = chunk * task.chunk_trials
    stop = min(start + task.chunk_trials, task.trials)
    diag = np.arange(K)
    for trial in range(start, stop):
        ws = task.draw(task.net, task.pa, task.stats, rng, task.N)
        try:
            v = build_combiners(task.scheme, ws, task.stats, task.pa, ga=task.ga,
                                powers=task.powers, alpha=task.alpha,
                                regularization=task.regularization).v
        except CombinerError as e:
            raise e.at_trial(trial) from e

        g = np.einsum('kln,tln->ktl', v.conj(), ws.h)
        sums.mean_g += g[diag, diag]
        x = g * sqrt_p[None, :, None]
        sums.weighted_second += np.matmul(np.swapaxes(x, 1, 2), x.conj())
        sums.noise_diag += np.sum(np.abs(v) ** 2, axis=2)
        if sums.second is not None:
            sums.second += g[:, :, :, None] * g.conj()[:, :, None, :]
        sums.count += 1

    return sums


def _pairwise_sum(items: Sequence[_MomentSums]) -> _MomentSums:
    if len(items) == 1:
        return items[0]
    mid = len(items) // 2
    return _pairwise_sum(items[:mid]) + _pairwise_sum(items[mid:])


def _symmetrized(matrices: np.ndarray, label: str) -> np.ndarray:
    herm = np.conj(np.swapaxes(matrices, -1, -2))
    scale = max(np.max(np.abs(matrices)), np.finfo(float).tiny)
    deviation = np.max(np.abs(matrices - herm)) / scale
    if deviation >= HERMITIAN_TOLERANCE:
        raise LSFDError(f"{label} second moments are not Hermitian (relative deviation {deviation:.2e})")
    return 0.5 * (matrices + herm)


def run_moment_task(task: MomentTask, executor: Optional[Executor] = None) -> GMoments:
    """Run every chunk of ``task`` (optionally on ``executor``) and finalize."""
    chunks = range(task.n_chunks)
    if executor is not None and task.n_chunks > 1:
        results = list(executor.map(_run_chunk, repeat(task), chunks))
    else:
        results = [_run_chunk(task, chunk) for chunk in chunks]

    total = _pairwise_sum(results)
    n = total.count
    second = None
    if total.second is not None:
        second = _symmetrized(total.second / n, task.scheme.value)

    return GMoments(
        mean_g=total.mean_g / n,
        weighted_second=_symmetrized(total.weighted_second / n, task.scheme.value),
        noise_diag=total.noise_diag / n,
        powers=np.asarray(task.powers, dtype=float).copy(),
        trials_used=n,
        second=second,
    )


def accumulate_moments(scheme: Scheme, net: NetworkRealization, pa: PilotAssignment,
                       stats: EstimationStats, powers, N: int, trials: int,
                       seed_seq: np.random.SeedSequence, ga: Optional[GroupAssignment] = None,
                       alpha: float = 0.8, regularization: Regularization = Regularization.SUM,
                       full: bool = False, chunk_trials: int = 50, workers: int = 1,
                       executor: Optional[Executor] = None, draw: Callable = draw_block) -> GMoments:
    """
    Monte-Carlo moments of the effective channels for one scheme.

    Args:
        scheme: Combining scheme
        net: Network drop
        pa: Pilot assignment
        stats: Estimation statistics (pilot powers included)
        powers: Per-UE data powers
        N: Antennas per AP
        trials: Number of coherence blocks
        seed_seq: Root of the trial streams; chunk j uses spawn key + (j,)
        ga: Group assignment (partial ZF schemes)
        alpha: mLRZF regularization factor
        regularization: LRZF regularization form
        full: Also keep E{g_kt g_kt^H} for every interferer t
        chunk_trials: Trials per chunk
        workers: Worker processes when no executor is given
        executor: Pool to run chunks on
        draw: Block generator (test hook)

    Returns:
        GMoments

    Raises:
        CombinerError: With the failing trial index attached
        LSFDError: If the accumulated second moments are not Hermitian
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1 (got {trials})")
    if chunk_trials < 1:
        raise ValueError(f"chunk_trials must be >= 1 (got {chunk_trials})")

    task = MomentTask(
        scheme=scheme, net=net, pa=pa, stats=stats,
        powers=np.asarray(powers, dtype=float), N=N, trials=trials,
        entropy=seed_seq.entropy, spawn_key=tuple(seed_seq.spawn_key), ga=ga,
        alpha=alpha, regularization=regularization, full=full,
        chunk_trials=chunk_trials, draw=draw,
    )
    logger.debug(f"{scheme.value}: {trials} trials in {task.n_chunks} chunks")

    if executor is None and workers > 1 and task.n_chunks > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return run_moment_task(task, pool)
    return run_moment_task(task, executor)


def _signal_matrix(m: GMoments, powers, sigma2: float, k: int) -> np.ndarray:
    """sum_t p_t E{g_kt g_kt^H} + sigma2 F_k."""
    powers = np.asarray(powers, dtype=float)
    if m.second is not None:
        interference = np.einsum('t,tlm->lm', powers, m.second[k])
    elif m.powers.shape == powers.shape and np.array_equal(m.powers, powers):
        interference = m.weighted_second[k]
    else:
        raise LSFDError("moments were accumulated for other powers; re-run with full=True")
    return interference + sigma2 * np.diag(m.noise_diag[k])


def optimal_lsfd(m: GMoments, powers, sigma2: float, k: int) -> np.ndarray:
    """
    LSFD weights maximizing the effective SINR of UE k.

    Raises:
        LSFDError: If the weighting system is singular
    """
    matrix = _signal_matrix(m, powers, sigma2, k)
    try:
        factor = scipy.linalg.cho_factor(matrix)
        return scipy.linalg.cho_solve(factor, m.mean_g[k])
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        raise LSFDError(f"LSFD system of UE {k} is singular") from e


def uatf_sinr(m: GMoments, a, powers, sigma2: float, k: int) -> float:
    """Effective SINR of UE k for CPU weights ``a``."""
    a = np.asarray(a)
    p_k = float(np.asarray(powers, dtype=float)[k])
    useful = p_k * np.abs(np.vdot(a, m.mean_g[k])) ** 2
    total = np.real(np.vdot(a, _signal_matrix(m, powers, sigma2, k) @ a))
    return float(useful / (total - useful))


def optimal_sinr(m: GMoments, powers, sigma2: float, k: int) -> float:
    """Max-form SINR p_k b^H C^{-1} b with C the interference-plus-noise matrix."""
    p_k = float(np.asarray(powers, dtype=float)[k])
    b = m.mean_g[k]
    interference = _signal_matrix(m, powers, sigma2, k) - p_k * np.outer(b, b.conj())
    try:
        x = scipy.linalg.solve(interference, b, assume_a='her')
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        raise LSFDError(f"interference matrix of UE {k} is singular") from e
    return float(p_k * np.real(np.vdot(b, x)))


def se_from_sinr(sinr, tau_p: int, tau_c: int):
    """Spectral efficiency (bit/s/Hz) with the pilot-overhead prelog."""
    if not 0 <= tau_p <= tau_c:
        raise ValueError(f"need 0 <= tau_p <= tau_c (got tau_p={tau_p}, tau_c={tau_c})")
    se = (1.0 - tau_p / tau_c) * np.log2(1.0 + np.asarray(sinr, dtype=float))
    return float(se) if np.ndim(se) == 0 else se


def monte_carlo_report(m: GMoments, powers, sigma2: float, tau_p: int, tau_c: int,
                       scheme: str, power_mode: str, config_digest: str = "") -> SEReport:
    """Optimal-LSFD SINR and SE of every UE from one set of moments."""
    K = m.mean_g.shape[0]
    weights = [optimal_lsfd(m, powers, sigma2, k) for k in range(K)]
    sinr = np.array([uatf_sinr(m, weights[k], powers, sigma2, k) for k in range(K)])
    return SEReport(
        scheme=scheme, power_mode=power_mode, method=Method.MONTE_CARLO,
        sinr=sinr, se=se_from_sinr(sinr, tau_p, tau_c), prelog=1.0 - tau_p / tau_c,
        config_digest=config_digest, weights=weights,
    )
