"""
Closed-Form Spectral Efficiency Module

Channel-draw-free SINR/SE of the zero-forcing family with optimal LSFD,
built from the estimation statistics and the grouping only, plus the
deterministic-equivalent SINR of modified local regularized ZF.

Per AP, UE k sees one of three branches:

- ZF with d = N - tau (tau = tau_p for FZF, tau_S for the partial schemes):
  gain 1, noise gamma_k / d, interferer t variance (gamma_k / d)(beta_t - gamma_t [t nulled])
- MR: gain N, noise N gamma_k, interferer t variance N gamma_k beta_t
- protected MR with d = N - tau_S: gain d, noise d gamma_k,
  interferer t variance d gamma_k (beta_t - gamma_t [t strong])

Co-pilot UEs add rank-one terms with means gain * sqrt(gamma_k gamma_t).
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from .channel import EstimationStats
from .combining import Scheme
from .lsfd import Method, SEReport, se_from_sinr
from .pilots import GroupAssignment, PilotAssignment


logger = logging.getLogger(__name__)


class FixedPointError(Exception):
    """Exception raised when the deterministic-equivalent fixed point fails."""

    def __init__(self, message: str, residual: float = float('nan')):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class ClosedFormInputs:
    """Large-scale quantities every closed form is evaluated from."""
    stats: EstimationStats
    pa: PilotAssignment
    ga: Optional[GroupAssignment]
    powers: np.ndarray
    sigma2: float
    N: int
    tau_p: int
    tau_c: int = 200


@dataclass(frozen=True)
class FixedPointState:
    """
    Converged deterministic equivalents of one AP (noise-normalized units).

    e_cross[i, j] is the derivative-type quantity for interferer pilot i seen
    through the combiner of pilot j.
    """
    e: np.ndarray
    T: float
    e_prime: np.ndarray
    e_cross: np.ndarray
    alpha: float
    iterations: int
    residual: float
    spectral_radius: float


def _branch_terms(inp: ClosedFormInputs, scheme: Scheme, k: int):
    """Per-AP gain, noise factor and interferer variances for UE k."""
    stats, N = inp.stats, inp.N
    K, L = stats.gamma.shape
    gamma_k = stats.gamma[k]

    if scheme is Scheme.FZF:
        d = np.full(L, N - inp.tau_p, dtype=float)
        zf = np.ones(L, dtype=bool)
        nulled = np.ones((K, L), dtype=bool)
    elif scheme in (Scheme.PFZF, Scheme.PWPFZF):
        if inp.ga is None:
            raise ValueError(f"{scheme.value} closed form needs a group assignment")
        d = (N - inp.ga.tau_S).astype(float)
        zf = inp.ga.is_strong[k]
        if scheme is Scheme.PFZF:
            nulled = inp.ga.is_strong & zf[None, :]
        else:
            nulled = inp.ga.is_strong.copy()
    else:
        raise ValueError(f"no closed form for {scheme.value}")

    if np.any(d < 1):
        raise ValueError(f"{scheme.value} closed form needs N > tau at every AP")

    if scheme is Scheme.PFZF:
        gain = np.where(zf, 1.0, float(N))
    else:
        gain = np.where(zf, 1.0, d)
    noise = gamma_k * np.where(zf, 1.0 / d, gain)

    variance = noise[None, :] * (stats.beta - stats.gamma * nulled)
    return gain, noise, variance


def closed_form_terms(inp: ClosedFormInputs, scheme: Scheme, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Mean vector b_k and interference-plus-noise matrix C_k of UE k.

    Returns:
        Tuple of (b (L,), C (L, L)); SINR(a) = p_k (a^T b)^2 / (a^T C a)
    """
    gain, noise, variance = _branch_terms(inp, scheme, k)
    gamma = inp.stats.gamma
    powers = np.asarray(inp.powers, dtype=float)

    b = gain * gamma[k]
    C = np.diag(powers @ variance + inp.sigma2 * noise)
    for t in sorted(inp.pa.copilot_sets[k] - {k}):
        m = gain * np.sqrt(gamma[k] * gamma[t])
        C += powers[t] * np.outer(m, m)
    return b, C


def closed_form_se(inp: ClosedFormInputs, scheme: Scheme, k: int) -> Tuple[np.ndarray, float, float]:
    """
    Optimal LSFD weights, SINR and SE of UE k in closed form.

    Returns:
        Tuple of (a_k, sinr, se)
    """
    b, C = closed_form_terms(inp, scheme, k)
    try:
        a = scipy.linalg.solve(C, b, assume_a='pos')
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        raise ValueError(f"closed-form interference matrix of UE {k} is singular") from e
    sinr = float(inp.powers[k] * b @ a)
    return a, sinr, se_from_sinr(sinr, inp.tau_p, inp.tau_c)


def closed_form_sinr_at(inp: ClosedFormInputs, scheme: Scheme, k: int, a) -> float:
    """Closed-form SINR of UE k for arbitrary real LSFD weights."""
    a = np.asarray(a, dtype=float)
    b, C = closed_form_terms(inp, scheme, k)
    return float(inp.powers[k] * (a @ b) ** 2 / (a @ C @ a))


def fzf_se_closed(inp: ClosedFormInputs, k: int):
    return closed_form_se(inp, Scheme.FZF, k)


def pfzf_se_closed(inp: ClosedFormInputs, k: int):
    return closed_form_se(inp, Scheme.PFZF, k)


def pwpfzf_se_closed(inp: ClosedFormInputs, k: int):
    return closed_form_se(inp, Scheme.PWPFZF, k)


def mlrzf_fixed_point(theta, N: int, alpha: float, tol: float = 1e-9,
                      max_iter: int = 500) -> FixedPointState:
    """
    Deterministic equivalents of one AP.

    Iterates e_i = theta_i T(e), T(e) = (N^{-1} sum_j theta_j / (1 + e_j) + alpha)^{-1}
    from e = 1/alpha, then solves the two linear systems for e' and e'_cross.

    Args:
        theta: Noise-normalized pilot-basis variances (tau_p,)
        N: Antennas
        alpha: Regularization factor
        tol: Maximum relative change at convergence
        max_iter: Iteration cap

    Raises:
        FixedPointError: On non-convergence, spectral radius >= 1 or singular system
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive (got {alpha})")
    theta = np.asarray(theta, dtype=float)

    e = np.full(theta.shape, 1.0 / alpha)
    residual = np.inf
    for iterations in range(1, max_iter + 1):
        T = 1.0 / (np.sum(theta / (1.0 + e)) / N + alpha)
        e_next = theta * T
        residual = float(np.max(np.abs(e_next - e) / np.abs(e_next)))
        e = e_next
        if residual < tol:
            break
    else:
        raise FixedPointError(f"fixed point did not converge in {max_iter} iterations "
                              f"(residual {residual:.3e})", residual=residual)

    T = 1.0 / (np.sum(theta / (1.0 + e)) / N + alpha)
    J = np.outer(theta * T, theta * T) / (N * (1.0 + e) ** 2)[None, :]
    radius = float(np.max(np.abs(np.linalg.eigvals(J))))
    if radius >= 1.0:
        raise FixedPointError(f"spectral radius {radius:.3f} >= 1", residual=residual)

    rhs = np.column_stack([theta * T ** 2, np.outer(theta, theta) * T ** 2])
    try:
        solution = scipy.linalg.solve(np.eye(len(theta)) - J, rhs)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e_:
        raise FixedPointError("I - J is singular", residual=residual) from e_

    return FixedPointState(
        e=e, T=float(T), e_prime=solution[:, 0], e_cross=solution[:, 1:], alpha=alpha,
        iterations=iterations, residual=residual, spectral_radius=radius,
    )


def mlrzf_fixed_points(stats: EstimationStats, N: int, alpha: float = 0.8, tol: float = 1e-9,
                       max_iter: int = 500) -> List[FixedPointState]:
    """One fixed point per AP on theta / sigma2."""
    states = [mlrzf_fixed_point(stats.theta[:, l] / stats.sigma2, N, alpha, tol, max_iter)
              for l in range(stats.theta.shape[1])]
    logger.debug(f"mLRZF fixed points: max iterations {max(s.iterations for s in states)}")
    return states


def mlrzf_asymptotic_terms(fps: List[FixedPointState], inp: ClosedFormInputs, k: int):
    """Mean vector and interference-plus-noise matrix of the asymptotic mLRZF SINR."""
    stats = inp.stats
    sigma = np.sqrt(inp.sigma2)
    c = stats.c * sigma
    p = np.asarray(inp.powers, dtype=float) / inp.sigma2
    pilot = inp.pa.pilot_index
    ik = pilot[k]
    other = pilot != ik
    K, L = c.shape

    b = np.empty(L)
    m_scale = np.empty(L)
    diag = np.empty(L)
    for l, fp in enumerate(fps):
        e_k, ep_k = fp.e[ik], fp.e_prime[ik]
        e_i = fp.e[pilot]
        cross = np.sum(p[other] * c[other, l] ** 2 * fp.e_cross[pilot[other], ik]
                       / (1.0 + e_i[other]) ** 2)
        # h - hhat is white with variance beta - gamma and independent of Hbar_l
        error = np.sum(p * (stats.beta[:, l] - stats.gamma[:, l])) * ep_k
        upsilon = (cross + error) / inp.N
        zeta = ep_k / (inp.N * (1.0 + e_k) ** 2)

        b[l] = c[k, l] ** 2 * e_k / (1.0 + e_k)
        m_scale[l] = c[k, l] * e_k / (1.0 + e_k)
        diag[l] = upsilon * c[k, l] ** 2 / (1.0 + e_k) ** 2 + c[k, l] ** 2 * zeta

    C = np.diag(diag)
    for t in sorted(inp.pa.copilot_sets[k] - {k}):
        m = m_scale * c[t]
        C += p[t] * np.outer(m, m)
    return b, C, p[k]


def mlrzf_asymptotic_se(fps: List[FixedPointState], inp: ClosedFormInputs, k: int,
                        a=None) -> Tuple[np.ndarray, float, float]:
    """
    Deterministic-equivalent SINR/SE of UE k under mLRZF combining.

    Args:
        fps: Fixed-point state of every AP
        inp: Closed-form inputs
        k: UE index
        a: LSFD weights; the optimal weights are used when None

    Returns:
        Tuple of (a_k, sinr, se)
    """
    b, C, p_k = mlrzf_asymptotic_terms(fps, inp, k)
    if a is None:
        a = scipy.linalg.solve(C, b, assume_a='pos')
        sinr = float(p_k * b @ a)
    else:
        a = np.asarray(a, dtype=float)
        sinr = float(p_k * (a @ b) ** 2 / (a @ C @ a))
    return a, sinr, se_from_sinr(sinr, inp.tau_p, inp.tau_c)


def closed_form_report(inp: ClosedFormInputs, scheme: Scheme, power_mode: str,
                       config_digest: str = "", alpha: float = 0.8) -> SEReport:
    """Closed-form (or asymptotic, for mLRZF) SE of every UE."""
    K = len(inp.pa.pilot_index)
    if scheme is Scheme.MLRZF:
        fps = mlrzf_fixed_points(inp.stats, inp.N, alpha)
        results = [mlrzf_asymptotic_se(fps, inp, k) for k in range(K)]
        method = Method.ASYMPTOTIC
    else:
        results = [closed_form_se(inp, scheme, k) for k in range(K)]
        method = Method.CLOSED_FORM

    sinr = np.array([r[1] for r in results])
    return SEReport(
        scheme=scheme.value, power_mode=power_mode, method=method, sinr=sinr,
        se=se_from_sinr(sinr, inp.tau_p, inp.tau_c), prelog=1.0 - inp.tau_p / inp.tau_c,
        config_digest=config_digest, weights=[r[0] for r in results],
    )


def has_closed_form(scheme: Scheme) -> bool:
    return scheme in (Scheme.FZF, Scheme.PFZF, Scheme.PWPFZF, Scheme.MLRZF)
