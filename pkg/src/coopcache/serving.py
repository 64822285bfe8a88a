"""Per-slot traffic accounting for coded and uncoded fragment caching."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .core import CachingAction, SystemParams, miss_fractions, update_amount

__all__ = [
    "SlotTraffic",
    "UncodedPlacement",
    "account_mds",
    "account_uncoded",
    "direct_ratio",
    "expected_uncoded_served",
]


@dataclass(frozen=True)
class SlotTraffic:
    """Traffic of one slot in content-size units.

    ``sbs_direct - update_cost`` is the slot reward.
    """

    total: float
    sbs_direct: float
    update_cost: float
    complement_cost: float

    @property
    def reward(self) -> float:
        return self.sbs_direct - self.update_cost


def _check(counts, a_t, a_prev, params):
    for v in (counts, a_t.levels, a_prev.levels):
        if len(v) != params.C:
            raise ValueError(
                f"dimension mismatch: expected length {params.C}, got {len(v)}")


def account_mds(counts, a_t: CachingAction, a_prev: CachingAction,
                params: SystemParams) -> SlotTraffic:
    """Split the slot traffic for MDS-coded caching.

    Packets cached at different SBSs are disjoint, so a user served by ``d``
    SBSs collects ``min(d * a_i, 1)`` of content ``i`` with no randomness.
    """
    counts = np.asarray(counts, dtype=float)
    _check(counts, a_t, a_prev, params)
    total = float(counts.sum())
    update = params.p * update_amount(a_t.levels, a_prev.levels, params.L)
    if total <= 0:
        return SlotTraffic(0.0, 0.0, update, 0.0)
    theta = counts / total
    complement = float(total * np.dot(theta, miss_fractions(a_t.levels, params.L, params.d)))
    return SlotTraffic(total=total, sbs_direct=max(total - complement, 0.0),
                       update_cost=update, complement_cost=complement)


class UncodedPlacement:
    """Random uncoded fragments held by each SBS.

    Every content is cut into ``L`` equal fragments. SBS ``s`` holds an
    independent uniformly random subset of ``levels[i]`` fragments of content
    ``i``; the subset is redrawn only when ``levels[i]`` changes.
    """

    def __init__(self, params: SystemParams):
        self.params = params
        self.held = np.zeros((params.p, params.C, params.L), dtype=bool)
        self.levels = np.zeros(params.C, dtype=np.int64)

    def apply(self, levels, rng: np.random.Generator) -> None:
        levels = np.asarray(levels, dtype=np.int64)
        p, L = self.params.p, self.params.L
        for i in np.flatnonzero(levels != self.levels):
            k = int(levels[i])
            self.held[:, i, :] = False
            if k:
                # k smallest of p independent random keys per SBS = uniform k-subset
                picks = np.argsort(rng.random((p, L)), axis=1)[:, :k]
                self.held[np.arange(p)[:, None], i, picks] = True
        self.levels = levels.copy()

    def served_fractions(self, content: int, n_requests: int,
                         rng: np.random.Generator) -> np.ndarray:
        """Served fraction for ``n_requests`` users each picking a random ``d``-subset of SBSs."""
        p, d, L = self.params.p, self.params.d, self.params.L
        if self.levels[content] == 0:
            return np.zeros(n_requests)
        if self.levels[content] == L:
            return np.ones(n_requests)
        sbs = np.argsort(rng.random((n_requests, p)), axis=1)[:, :d]
        union = self.held[sbs, content, :].any(axis=1)
        return union.sum(axis=1) / L


def account_uncoded(counts, a_t: CachingAction, a_prev: CachingAction,
                    params: SystemParams, rng: np.random.Generator,
                    placement: Optional[UncodedPlacement] = None) -> SlotTraffic:
    """Split the slot traffic for uncoded random fragment caching.

    ``placement`` carries the fragment sets across slots. Without one, a
    fresh placement is built from ``a_prev`` and then moved to ``a_t``.
    """
    counts = np.asarray(counts, dtype=np.int64)
    _check(counts, a_t, a_prev, params)
    if placement is None:
        placement = UncodedPlacement(params)
        placement.apply(a_prev.levels, rng)
    placement.apply(a_t.levels, rng)
    total = float(counts.sum())
    update = params.p * update_amount(a_t.levels, a_prev.levels, params.L)
    complement = 0.0
    for i in np.flatnonzero(counts):
        served = placement.served_fractions(int(i), int(counts[i]), rng)
        complement += float(np.sum(1.0 - served))
    return SlotTraffic(total=total, sbs_direct=max(total - complement, 0.0),
                       update_cost=update, complement_cost=complement)


def expected_uncoded_served(k: int, L: int, d: int) -> float:
    """Mean served fraction when ``d`` SBSs each hold an independent random ``k``-subset of ``L`` fragments.

    Each fragment is missed by one SBS with probability ``1 - k/L``.
    """
    return 1.0 - (1.0 - k / L) ** d


def direct_ratio(history: Iterable[SlotTraffic]) -> float:
    """Share of the traffic served by the SBSs without the MBS."""
    history = list(history)
    if not history:
        raise ValueError("empty history")
    total = sum(h.total for h in history)
    if total <= 0:
        raise ValueError("history carries no traffic")
    return sum(h.sbs_direct for h in history) / total
