"""
Combining Module

Local per-AP combining vectors for every scheme: maximum ratio, full-pilot
zero-forcing, partial zero-forcing (plain and with protected weak UEs), local
regularized zero-forcing and its modified random-matrix variant.

Zero-forcing schemes factor the pilot-basis columns each AP nulls with a
QR decomposition, batched over APs that null the same number of pilots.
LRZF solves its tau_p x tau_p systems batched over all APs; mLRZF factors
each AP's regularized Gram matrix with a Cholesky decomposition.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
import scipy.linalg

from .channel import ChannelWorkspace, EstimationStats
from .pilots import GroupAssignment, PilotAssignment


MAX_CONDITION = 1e12


class Scheme(Enum):
    """Supported combining schemes."""
    MR = "MR"
    FZF = "FZF"
    PFZF = "PFZF"
    PWPFZF = "PWPFZF"
    LRZF = "LRZF"
    MLRZF = "mLRZF"

    @property
    def needs_groups(self) -> bool:
        return self in (Scheme.PFZF, Scheme.PWPFZF)


class Regularization(Enum):
    """
    How the local regularized ZF combines noise and estimation-error power.

    SUM uses sigma2 + phi_l and is the default. PRODUCT uses sigma2 * phi_l, which
    is negligible next to the pilot-space Gram matrix at realistic noise powers,
    so LRZF then coincides with full-pilot zero-forcing.
    """
    SUM = "sum"
    PRODUCT = "product"


class CombinerError(Exception):
    """Exception raised when a combining system cannot be solved reliably."""

    def __init__(self, message: str, ap: Optional[int] = None, trial: Optional[int] = None):
        super().__init__(message)
        self.ap = ap
        self.trial = trial

    def at_trial(self, trial: int) -> "CombinerError":
        return CombinerError(f"trial {trial}: {self}", ap=self.ap, trial=trial)


@dataclass
class CombinerSet:
    """Combining vectors v[k, l, :] for one scheme."""
    scheme: Scheme
    v: np.ndarray


def _hermitian(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def _gram(Hbar: np.ndarray) -> np.ndarray:
    return np.einsum('lni,lnj->lij', Hbar.conj(), Hbar)


def _zf_basis(ws: ChannelWorkspace, mask: np.ndarray, label: str):
    """
    Pseudo-inverse directions and orthonormal basis of each AP's masked pilot columns.

    APs are batched by the number of masked pilots; each batch gets one
    stacked QR factorization Hbar_S = Q R, the directions are
    Hbar_S (Hbar_S^H Hbar_S)^{-1} = Q R^{-H}.

    Returns:
        Tuple of (directions, basis), both (L, N, tau_p) with zero columns
        on unmasked pilots

    Raises:
        CombinerError: If some AP's masked columns are (nearly) dependent
    """
    L, N, tau_p = ws.Hbar.shape
    directions = np.zeros((L, N, tau_p), dtype=complex)
    basis = np.zeros((L, N, tau_p), dtype=complex)
    counts = mask.sum(axis=1)

    for size in np.unique(counts):
        if size == 0:
            continue
        aps = np.flatnonzero(counts == size)
        cols = np.stack([np.flatnonzero(mask[l]) for l in aps])
        selected = np.take_along_axis(ws.Hbar[aps], cols[:, None, :], axis=2)
        Q, R = np.linalg.qr(selected)

        # share of each column orthogonal to the ones before it
        with np.errstate(divide='ignore', invalid='ignore'):
            d = np.abs(np.diagonal(R, axis1=1, axis2=2)) / np.linalg.norm(selected, axis=1)
        for i, l in enumerate(aps):
            if not d[i].min() ** 2 * MAX_CONDITION > 1.0:
                raise CombinerError(f"{label}: Gram matrix at AP {l} is ill-conditioned "
                                    f"(condition estimate above {MAX_CONDITION:.0e})", ap=int(l))

        rows = np.arange(N)[None, :, None]
        directions[aps[:, None, None], rows, cols[:, None, :]] = _hermitian(
            np.linalg.solve(R, _hermitian(Q)))
        basis[aps[:, None, None], rows, cols[:, None, :]] = Q

    return directions, basis


def _per_ue(directions: np.ndarray, pa: PilotAssignment) -> np.ndarray:
    """Pick column pilot_index[k] of every AP's matrix -> (K, L, N)."""
    return np.transpose(directions[:, :, pa.pilot_index], (2, 0, 1))


def mr_combiner(ws: ChannelWorkspace) -> CombinerSet:
    """Maximum ratio: v_kl = hhat_kl."""
    return CombinerSet(scheme=Scheme.MR, v=ws.hhat.copy())


def fzf_combiner(ws: ChannelWorkspace, stats: EstimationStats, pa: PilotAssignment) -> CombinerSet:
    """
    Full-pilot zero-forcing.

    v_kl = c_kl theta_{i_k l} Hbar_l (Hbar_l^H Hbar_l)^{-1} e_{i_k}, shared (up to
    the scalar) by all UEs on the same pilot.

    Raises:
        CombinerError: If a Gram matrix is singular or ill-conditioned
    """
    L, N, tau_p = ws.Hbar.shape
    if N < tau_p + 1:
        raise CombinerError(f"FZF needs N >= tau_p + 1 (N={N}, tau_p={tau_p})")
    mask = np.ones((L, tau_p), dtype=bool)
    directions, _ = _zf_basis(ws, mask, "FZF")
    scale = stats.c * stats.theta[pa.pilot_index]
    return CombinerSet(scheme=Scheme.FZF, v=scale[:, :, None] * _per_ue(directions, pa))


def _partial_zf(ws, stats, pa, ga, scheme: Scheme, protect_weak: bool) -> CombinerSet:
    L, N, tau_p = ws.Hbar.shape
    worst = int(ga.tau_S.max()) if L else 0
    if N < worst + 1:
        raise CombinerError(f"{scheme.value} needs N >= tau_S + 1 (N={N}, max tau_S={worst})",
                            ap=int(np.argmax(ga.tau_S)))

    mask = ga.strong_pilot_mask
    directions, basis = _zf_basis(ws, mask, scheme.value)
    scale = stats.c * stats.theta[pa.pilot_index]
    strong_v = scale[:, :, None] * _per_ue(directions, pa)

    if protect_weak:
        coeff = np.einsum('lni,kln->kli', basis.conj(), ws.hhat)
        weak_v = ws.hhat - np.einsum('lni,kli->kln', basis, coeff)
    else:
        weak_v = ws.hhat

    v = np.where(ga.is_strong[:, :, None], strong_v, weak_v)
    return CombinerSet(scheme=scheme, v=v)


def pfzf_combiner(ws: ChannelWorkspace, stats: EstimationStats, pa: PilotAssignment,
                  ga: GroupAssignment) -> CombinerSet:
    """Partial ZF toward the strong pilots of each AP; weak UEs use MR."""
    return _partial_zf(ws, stats, pa, ga, Scheme.PFZF, protect_weak=False)


def pwpfzf_combiner(ws: ChannelWorkspace, stats: EstimationStats, pa: PilotAssignment,
                    ga: GroupAssignment) -> CombinerSet:
    """
    Partial ZF with protected weak UEs.

    Weak UEs use B_l hhat_kl, the MR vector projected onto the orthogonal
    complement of the AP's strong pilot columns. The projector is applied
    through an orthonormal basis of those columns.
    """
    return _partial_zf(ws, stats, pa, ga, Scheme.PWPFZF, protect_weak=True)


def lrzf_regularizer(stats: EstimationStats, powers: np.ndarray,
                     regularization: Regularization = Regularization.SUM) -> np.ndarray:
    """Per-AP regularization lambda_l built from phi_l = sum_t p_t (beta_tl - gamma_tl)."""
    phi = (powers[:, None] * (stats.beta - stats.gamma)).sum(axis=0)
    if regularization is Regularization.PRODUCT:
        return stats.sigma2 * phi
    return stats.sigma2 + phi


def lrzf_combiner(ws: ChannelWorkspace, stats: EstimationStats, pa: PilotAssignment, powers,
                  regularization: Regularization = Regularization.SUM) -> CombinerSet:
    """
    Local regularized ZF in its tau_p-dimensional form.

    V_l = Hbar_l (F_l Hbar_l^H Hbar_l + lambda_l I)^{-1} [p_1 c_1l e_{i_1}, ...]
    with F_l = sum_t p_t c_tl^2 e_{i_t} e_{i_t}^H.

    Raises:
        CombinerError: If the regularized system is singular at some AP
    """
    powers = np.asarray(powers, dtype=float)
    if np.any(powers <= 0):
        raise CombinerError("LRZF needs positive data powers")
    L, N, tau_p = ws.Hbar.shape
    K = len(pa.pilot_index)

    f = np.zeros((tau_p, L))
    np.add.at(f, pa.pilot_index, powers[:, None] * stats.c ** 2)
    lam = lrzf_regularizer(stats, powers, regularization)

    system = f.T[:, :, None] * _gram(ws.Hbar) + lam[:, None, None] * np.eye(tau_p)
    rhs = np.zeros((L, tau_p, K), dtype=complex)
    rhs[:, pa.pilot_index, np.arange(K)] = (powers[:, None] * stats.c).T

    try:
        coeff = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as e:
        for l in range(L):
            try:
                np.linalg.solve(system[l], rhs[l])
            except np.linalg.LinAlgError:
                raise CombinerError(f"LRZF: regularized system at AP {l} is singular", ap=l) from e
        raise CombinerError("LRZF: regularized solve failed") from e

    return CombinerSet(scheme=Scheme.LRZF, v=np.transpose(ws.Hbar @ coeff, (2, 0, 1)))


def mlrzf_combiner(ws: ChannelWorkspace, stats: EstimationStats, pa: PilotAssignment,
                   alpha: float = 0.8) -> CombinerSet:
    """
    Modified local regularized ZF.

    v_kl = c_kl (Hbar_l Hbar_l^H + N alpha sigma2 I)^{-1} Hbar_l e_{i_k}, evaluated as
    Hbar_l (Hbar_l^H Hbar_l + N alpha sigma2 I)^{-1} e_{i_k}.
    """
    if alpha <= 0:
        raise CombinerError(f"mLRZF needs alpha > 0 (got {alpha})")
    L, N, tau_p = ws.Hbar.shape
    mu = N * alpha * stats.sigma2
    gram = _gram(ws.Hbar) + mu * np.eye(tau_p)
    directions = np.empty_like(ws.Hbar)
    for l in range(L):
        try:
            factor = scipy.linalg.cho_factor(gram[l], lower=True, check_finite=False)
        except scipy.linalg.LinAlgError as e:
            raise CombinerError(f"mLRZF: regularized Gram matrix at AP {l} is not positive definite",
                                ap=l) from e
        solved = scipy.linalg.cho_solve(factor, _hermitian(ws.Hbar[l]), check_finite=False)
        directions[l] = _hermitian(solved)
    return CombinerSet(scheme=Scheme.MLRZF, v=stats.c[:, :, None] * _per_ue(directions, pa))


def build_combiners(scheme: Scheme, ws: ChannelWorkspace, stats: EstimationStats,
                    pa: PilotAssignment, ga: Optional[GroupAssignment] = None,
                    powers=None, alpha: float = 0.8,
                    regularization: Regularization = Regularization.SUM) -> CombinerSet:
    """Dispatch to the combiner for ``scheme``."""
    if scheme is Scheme.MR:
        return mr_combiner(ws)
    if scheme is Scheme.FZF:
        return fzf_combiner(ws, stats, pa)
    if scheme.needs_groups and ga is None:
        raise CombinerError(f"{scheme.value} needs a group assignment")
    if scheme is Scheme.PFZF:
        return pfzf_combiner(ws, stats, pa, ga)
    if scheme is Scheme.PWPFZF:
        return pwpfzf_combiner(ws, stats, pa, ga)
    if scheme is Scheme.LRZF:
        if powers is None:
            raise CombinerError("LRZF needs data powers")
        return lrzf_combiner(ws, stats, pa, powers, regularization)
    if scheme is Scheme.MLRZF:
        return mlrzf_combiner(ws, stats, pa, alpha)
    raise CombinerError(f"unknown scheme {scheme}")
