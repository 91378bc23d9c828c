"""
Pilot and Grouping Module

Assigns orthogonal pilots to UEs and splits the UEs seen by every AP into a
strong group (zero-forced) and a weak group (served by maximum ratio).

Pilot indices are 0-based: UE k uses pilot ``pilot_index[k]`` in ``0..tau_p-1``.
"""

import logging
from dataclasses import dataclass
from typing import FrozenSet, List, Optional, Tuple

import numpy as np

from .scenario import NetworkRealization


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PilotAssignment:
    """Pilot index per UE and the resulting co-pilot sets."""
    pilot_index: np.ndarray
    tau_p: int
    copilot_sets: Tuple[FrozenSet[int], ...]

    @classmethod
    def from_indices(cls, pilot_index, tau_p: int) -> "PilotAssignment":
        pilot_index = np.asarray(pilot_index, dtype=int)
        if pilot_index.size and (pilot_index.min() < 0 or pilot_index.max() >= tau_p):
            raise ValueError(f"pilot indices must lie in [0, {tau_p - 1}]")
        users = [frozenset(np.flatnonzero(pilot_index == i).tolist()) for i in range(tau_p)]
        copilot_sets = tuple(users[i] for i in pilot_index)
        return cls(pilot_index=pilot_index, tau_p=tau_p, copilot_sets=copilot_sets)

    @property
    def K(self) -> int:
        return len(self.pilot_index)

    def users_on_pilot(self, i: int) -> FrozenSet[int]:
        return frozenset(np.flatnonzero(self.pilot_index == i).tolist())

    def used_pilots(self) -> np.ndarray:
        return np.unique(self.pilot_index)


@dataclass(frozen=True)
class GroupAssignment:
    """
    Per-AP strong/weak partition of the UEs.

    ``is_strong[k, l]`` is the master table; the set views are derived from it.
    """
    is_strong: np.ndarray
    strong_pilot_mask: np.ndarray
    demoted: int = 0

    @property
    def strong(self) -> List[FrozenSet[int]]:
        return [frozenset(np.flatnonzero(col).tolist()) for col in self.is_strong.T]

    @property
    def weak(self) -> List[FrozenSet[int]]:
        return [frozenset(np.flatnonzero(~col).tolist()) for col in self.is_strong.T]

    @property
    def tau_S(self) -> np.ndarray:
        return self.strong_pilot_mask.sum(axis=1)

    @property
    def strong_pilot_indices(self) -> List[Tuple[int, ...]]:
        return [tuple(np.flatnonzero(row).tolist()) for row in self.strong_pilot_mask]

    @property
    def Z(self) -> List[FrozenSet[int]]:
        """APs where each UE is strong."""
        return [frozenset(np.flatnonzero(row).tolist()) for row in self.is_strong]

    @property
    def M(self) -> List[FrozenSet[int]]:
        """APs where each UE is weak."""
        return [frozenset(np.flatnonzero(~row).tolist()) for row in self.is_strong]

    @classmethod
    def from_strong_table(cls, is_strong, pa: PilotAssignment, demoted: int = 0) -> "GroupAssignment":
        is_strong = np.asarray(is_strong, dtype=bool)
        L = is_strong.shape[1]
        mask = np.zeros((L, pa.tau_p), dtype=bool)
        for l in range(L):
            mask[l, pa.pilot_index[is_strong[:, l]]] = True
        return cls(is_strong=is_strong, strong_pilot_mask=mask, demoted=demoted)


def all_strong(pa: PilotAssignment, L: int) -> GroupAssignment:
    return GroupAssignment.from_strong_table(np.ones((pa.K, L), dtype=bool), pa)


def all_weak(pa: PilotAssignment, L: int) -> GroupAssignment:
    return GroupAssignment.from_strong_table(np.zeros((pa.K, L), dtype=bool), pa)


def assign_pilots_random(K: int, tau_p: int, rng: np.random.Generator) -> PilotAssignment:
    """
    Random pilot assignment.

    With K <= tau_p every UE gets its own pilot. Otherwise a random set of
    tau_p UEs covers every pilot once and the remaining UEs draw uniformly.
    """
    if tau_p < 1:
        raise ValueError(f"tau_p must be >= 1 (got {tau_p})")

    if K <= tau_p:
        pilot_index = rng.permutation(tau_p)[:K]
    else:
        order = rng.permutation(K)
        pilot_index = np.empty(K, dtype=int)
        pilot_index[order[:tau_p]] = np.arange(tau_p)
        pilot_index[order[tau_p:]] = rng.integers(0, tau_p, size=K - tau_p)

    return PilotAssignment.from_indices(pilot_index, tau_p)


def _close_under_copilots(selected: np.ndarray, pa: PilotAssignment) -> np.ndarray:
    pilots = np.unique(pa.pilot_index[selected])
    return np.isin(pa.pilot_index, pilots)


def group_ues(net: NetworkRealization, pa: PilotAssignment, v_percent: float,
              n_antennas: Optional[int] = None) -> GroupAssignment:
    """
    Split UEs per AP by their share of the received large-scale power.

    Args:
        net: Network drop
        pa: Pilot assignment
        v_percent: Share of the total beta the strong prefix must reach
        n_antennas: When given, weakest co-pilot clusters are demoted until
            every AP zero-forces at most n_antennas - 1 pilots

    Returns:
        GroupAssignment
    """
    if not 0 < v_percent <= 100:
        raise ValueError(f"v_percent must be in (0, 100] (got {v_percent})")

    K, L = net.beta.shape
    is_strong = np.zeros((K, L), dtype=bool)
    demoted = 0

    for l in range(L):
        beta_l = net.beta[:, l]
        # descending beta, lower index first on ties
        order = np.lexsort((np.arange(K), -beta_l))
        share = np.cumsum(beta_l[order]) / beta_l.sum()
        reached = np.flatnonzero(share >= v_percent / 100.0)
        prefix = reached[0] + 1 if reached.size else K

        selected = np.zeros(K, dtype=bool)
        selected[order[:prefix]] = True
        selected = _close_under_copilots(selected, pa)

        if n_antennas is not None:
            pilots = np.unique(pa.pilot_index[selected])
            if len(pilots) >= n_antennas:
                cluster_power = np.array([beta_l[pa.pilot_index == i].sum() for i in pilots])
                # weakest clusters go first; pilot index breaks ties
                drop_order = pilots[np.lexsort((pilots, cluster_power))]
                n_drop = len(pilots) - max(n_antennas - 1, 0)
                for i in drop_order[:n_drop]:
                    selected[pa.pilot_index == i] = False
                demoted += n_drop
                logger.warning(f"AP {l}: demoted {n_drop} co-pilot clusters to keep "
                               f"tau_S below N={n_antennas}")

        is_strong[:, l] = selected

    ga = GroupAssignment.from_strong_table(is_strong, pa, demoted=demoted)
    logger.debug(f"Grouped UEs: mean tau_S={ga.tau_S.mean():.3f}, demoted clusters={demoted}")
    return ga
