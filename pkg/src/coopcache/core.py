"""Domain types, popularity math, MDS traffic accounting and the slot reward.

Traffic is always expressed in content-size units (bits divided by the
content size ``B``), so ``B`` only shows up in :func:`mds_parity_bits`.

Popularity profiles and request batches are plain 1-D numpy arrays; the
caching decision is a :class:`CachingAction` holding integer levels, where
level ``l`` means a fraction ``l / L`` of the content is cached at every SBS.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "SystemParams",
    "CachingAction",
    "EnvObservation",
    "PopularityProfile",
    "RequestBatch",
    "EmptySlotError",
    "EmptyActionSpace",
    "compute_popularity",
    "mds_parity_bits",
    "complementary_fraction",
    "miss_fractions",
    "update_amount",
    "compute_reward",
    "action_to_fractions",
]

#: Normalized content popularity vector, nonnegative, sums to one.
PopularityProfile = np.ndarray
#: Per-content request counts for one slot, nonnegative integers.
RequestBatch = np.ndarray


class EmptySlotError(ValueError):
    """Raised when a slot carries no requests at all."""


class EmptyActionSpace(ValueError):
    """Raised when no caching vector satisfies the capacity and level constraints."""


@dataclass(frozen=True)
class SystemParams:
    """Scenario constants.

    Parameters
    ----------
    p : int
        Number of small base stations.
    C : int
        Catalog size.
    K : int
        Per-SBS cache capacity in whole contents.
    d : int
        Number of SBSs cooperatively serving one user.
    L : int
        Number of discrete cache levels per unit fraction.
    B : float
        Content size (normalized).
    M : int
        Requests generated per slot by the simulator.
    full_content : bool
        Restrict cache levels to ``{0, L}`` (non-cooperative baseline).
    """

    p: int
    C: int
    K: int
    d: int
    L: int
    B: float = 1.0
    M: int = 100
    full_content: bool = False

    def __post_init__(self):
        if self.p < 1 or self.C < 1 or self.L < 1 or self.M < 1:
            raise ValueError("p, C, L and M must all be >= 1")
        if not self.B > 0:
            raise ValueError("content size B must be positive")
        if not 1 <= self.d <= self.p:
            raise ValueError(f"need 1 <= d <= p, got d={self.d}, p={self.p}")
        if self.K < 1:
            raise ValueError("cache capacity K must be >= 1")
        if self.full_content:
            if self.K > self.C:
                raise EmptyActionSpace("empty action space: K > C with full contents")
        elif self.K * self.L > self.C * self.l_max:
            raise EmptyActionSpace(
                f"empty action space: K*L={self.K * self.L} exceeds "
                f"C*l_max={self.C * self.l_max}")

    @property
    def l_max(self) -> int:
        """Largest admissible cache level, ``ceil(L / d)`` (``L`` for full contents)."""
        if self.full_content:
            return self.L
        return lmax(self.L, self.d)

    @property
    def budget(self) -> int:
        """Total number of levels an action distributes, ``K * L``."""
        return self.K * self.L


class CachingAction:
    """Integer-level caching vector.

    ``levels[i] / L`` is the fraction of content ``i`` cached at each SBS.
    Instances are immutable and hashable so they can key dictionaries.
    """

    __slots__ = ("levels", "l_max", "_key")

    def __init__(self, levels, l_max: int):
        arr = np.array(levels, dtype=np.int64)
        if arr.ndim != 1:
            raise ValueError("levels must be a 1-D vector")
        arr.setflags(write=False)
        self.levels = arr
        self.l_max = int(l_max)
        self._key = arr.tobytes()

    @property
    def key(self) -> bytes:
        return self._key

    def __len__(self):
        return self.levels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, CachingAction):
            return NotImplemented
        return self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"CachingAction({self.levels.tolist()}, l_max={self.l_max})"

    def fractions(self, L: int) -> np.ndarray:
        return self.levels / L


@dataclass(frozen=True)
class EnvObservation:
    """What the agent sees at the start of a slot: ``x(t) = [theta(t), a(t-1)]``."""

    theta: np.ndarray
    prev_action: CachingAction
    counts: np.ndarray
    candidate_index: Optional[int] = None
    slot: int = field(default=0, compare=False)


def compute_popularity(counts) -> np.ndarray:
    """Normalize per-content request counts into a popularity profile."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise EmptySlotError("empty slot: no requests to normalize")
    return counts / total


def mds_parity_bits(params: SystemParams) -> float:
    """Parity bits produced per stored content: ``(p + 1) * B``."""
    return (params.p + 1) * params.B


def complementary_fraction(a_c: float, d: int) -> float:
    """Fraction of a content the MBS still has to send after ``d`` SBSs served theirs."""
    if not 0.0 <= a_c <= 1.0:
        raise ValueError(f"cache fraction must lie in [0, 1], got {a_c}")
    return max(1.0 - d * a_c, 0.0)


def miss_fractions(levels, L: int, d: int) -> np.ndarray:
    """Vectorized complementary fraction on integer levels.

    Uses ``max(L - d*l, 0) / L`` so exact coverage gives an exact zero.
    """
    levels = np.asarray(levels)
    return np.maximum(L - d * levels, 0) / L


def update_amount(levels, prev_levels, L: int) -> float:
    """Per-SBS off-peak update load ``sum(max(a - a_prev, 0))`` in content units."""
    delta = np.asarray(levels) - np.asarray(prev_levels)
    return float(np.maximum(delta, 0).sum()) / L


def _check_dims(params: SystemParams, *vectors):
    for v in vectors:
        if len(v) != params.C:
            raise ValueError(
                f"dimension mismatch: expected length {params.C}, got {len(v)}")


def compute_reward(counts_next, a_t: CachingAction, a_prev: CachingAction,
                   params: SystemParams) -> float:
    """Reward collected when the popularity moves to ``counts_next`` under ``a_t``.

    ``sum(N) - p * sum(max(a - a_prev, 0)) - sum(N) * sum_j theta_j * max(1 - d*a_j, 0)``
    with ``theta`` the normalized ``counts_next``.
    """
    counts_next = np.asarray(counts_next, dtype=float)
    _check_dims(params, counts_next, a_t.levels, a_prev.levels)
    total = counts_next.sum()
    update = params.p * update_amount(a_t.levels, a_prev.levels, params.L)
    if total <= 0:
        return -update
    theta = counts_next / total
    miss = miss_fractions(a_t.levels, params.L, params.d)
    return float(total - update - total * np.dot(theta, miss))


def action_to_fractions(a: CachingAction, L: int) -> np.ndarray:
    """Real cache fractions ``levels / L``."""
    return a.levels / L


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def lmax(L: int, d: int) -> int:
    """``ceil(L / d)``: the largest level worth caching with ``d`` cooperating SBSs."""
    if L < 1 or d < 1:
        raise ValueError("L and d must be >= 1")
    return _ceil_div(L, d)

