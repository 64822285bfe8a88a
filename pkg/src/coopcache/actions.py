"""The constrained discrete action space.

An action distributes ``K * L`` cache levels over ``C`` contents with at most
``l_max`` levels per content. Exact enumeration is only done below a size cap;
above it, actions are drawn by sequential conditional sampling, which is still
exactly uniform over the lattice.
"""
from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np

from .core import CachingAction, EmptyActionSpace, SystemParams, lmax

__all__ = [
    "ActionSpace",
    "ActionSpaceTooLarge",
    "EmptyActionSpace",
    "count_actions",
    "enumerate_actions",
    "lmax",
    "sample_uniform",
    "validate",
    "DEFAULT_SIZE_CAP",
]

DEFAULT_SIZE_CAP = 5_000_000


class ActionSpaceTooLarge(RuntimeError):
    pass


def count_actions(params: SystemParams) -> int:
    """Number of valid actions, by inclusion-exclusion over capped parts."""
    C = params.C
    if params.full_content:
        return comb(C, params.K)
    s, cap = params.budget, params.l_max
    total = 0
    for j in range(C + 1):
        rest = s - j * (cap + 1)
        if rest < 0:
            break
        total += (-1) ** j * comb(C, j) * comb(rest + C - 1, C - 1)
    return total


@lru_cache(maxsize=32)
def _count_table(n: int, s: int, cap: int) -> tuple:
    """``table[k][v]``: ordered ways to write ``v <= s`` as ``k <= n`` parts in ``[0, cap]``."""
    row = [1] + [0] * s
    table = [row]
    for _ in range(n):
        prefix = [0]
        for x in row:
            prefix.append(prefix[-1] + x)
        row = [prefix[v + 1] - prefix[max(v - cap, 0)] for v in range(s + 1)]
        table.append(row)
    return tuple(table)


def _bounded_count(n: int, s: int, cap: int) -> int:
    # ways to write s as an ordered sum of n parts in [0, cap]
    if s < 0 or s > n * cap:
        return 0
    return _count_table(n, s, cap)[n][s]


def _compositions(n: int, s: int, cap: int, memo: dict) -> np.ndarray:
    """All length-``n`` vectors in ``[0, cap]`` summing to ``s``, lexicographic."""
    key = (n, s)
    if key in memo:
        return memo[key]
    if n == 0:
        out = np.zeros((1 if s == 0 else 0, 0), dtype=np.int64)
    else:
        blocks = []
        for v in range(min(cap, s) + 1):
            rest = s - v
            if rest > (n - 1) * cap:
                continue
            tail = _compositions(n - 1, rest, cap, memo)
            head = np.full((tail.shape[0], 1), v, dtype=np.int64)
            blocks.append(np.hstack([head, tail]))
        out = np.vstack(blocks) if blocks else np.zeros((0, n), dtype=np.int64)
    memo[key] = out
    return out


class ActionSpace:
    """Lexicographically ordered list of every valid action plus an exact index.

    Parameters
    ----------
    params : SystemParams
    size_cap : int
        Refuse to enumerate spaces larger than this.
    """

    def __init__(self, params: SystemParams, size_cap: int = DEFAULT_SIZE_CAP):
        n = count_actions(params)
        if n == 0:
            raise EmptyActionSpace("empty action space")
        if n > size_cap:
            raise ActionSpaceTooLarge(
                f"|A| = {n} exceeds the enumeration cap {size_cap}; "
                "use the value-function-approximation agent")
        self.params = params
        if params.full_content:
            mat = _compositions(params.C, params.K, 1, {}) * params.L
        else:
            mat = _compositions(params.C, params.budget, params.l_max, {})
        mat.setflags(write=False)
        self.matrix = mat
        self.actions = [CachingAction(row, params.l_max) for row in mat]
        self._index = {a.key: k for k, a in enumerate(self.actions)}

    def __len__(self):
        return len(self.actions)

    def __getitem__(self, k: int) -> CachingAction:
        return self.actions[k]

    def __iter__(self):
        return iter(self.actions)

    def index(self, action: CachingAction) -> int:
        try:
            return self._index[action.key]
        except KeyError:
            raise KeyError(f"{action!r} is not in the action space") from None

    def __contains__(self, action: CachingAction) -> bool:
        return action.key in self._index

    @property
    def fractions(self) -> np.ndarray:
        return self.matrix / self.params.L


def enumerate_actions(params: SystemParams, size_cap: int = DEFAULT_SIZE_CAP) -> ActionSpace:
    return ActionSpace(params, size_cap=size_cap)


def validate(a: CachingAction, params: SystemParams) -> bool:
    """True iff ``a`` spends exactly ``K * L`` levels and respects the level cap."""
    lv = np.asarray(a.levels)
    if lv.shape != (params.C,):
        return False
    if lv.min(initial=0) < 0 or lv.max(initial=0) > params.l_max:
        return False
    if params.full_content and not np.all((lv == 0) | (lv == params.L)):
        return False
    return int(lv.sum()) == params.budget


def _randbelow(rng: np.random.Generator, n: int) -> int:
    """Uniform integer in ``[0, n)`` for arbitrarily large ``n``."""
    if n <= 2**62:
        return int(rng.integers(n))
    nbits = n.bit_length()
    nbytes = (nbits + 7) // 8
    mask = (1 << nbits) - 1
    while True:
        r = int.from_bytes(rng.bytes(nbytes), "little") & mask
        if r < n:
            return r


def _sample_sequential(params: SystemParams, rng: np.random.Generator) -> np.ndarray:
    C, s, cap = params.C, params.budget, params.l_max
    table = _count_table(C, s, cap)
    levels = np.zeros(C, dtype=np.int64)
    for i in range(C):
        n_rest = C - i - 1
        r = _randbelow(rng, table[C - i][s])
        for v in range(min(cap, s) + 1):
            w = table[n_rest][s - v]
            if r < w:
                levels[i] = v
                s -= v
                break
            r -= w
    return levels


def sample_uniform(space_or_params, rng: np.random.Generator) -> CachingAction:
    """Draw one action uniformly from the valid set.

    Accepts either an enumerated :class:`ActionSpace` (index draw) or bare
    :class:`SystemParams` (sequential conditional draw, no enumeration).
    """
    if isinstance(space_or_params, ActionSpace):
        space = space_or_params
        return space.actions[int(rng.integers(len(space)))]
    params = space_or_params
    if count_actions(params) == 0:
        raise EmptyActionSpace("empty action space")
    if params.full_content:
        levels = np.zeros(params.C, dtype=np.int64)
        levels[rng.choice(params.C, size=params.K, replace=False)] = params.L
    else:
        levels = _sample_sequential(params, rng)
    return CachingAction(levels, params.l_max)
