"""Linear value-function approximation agent and the myopic most-popular baseline.

The approximate Q-value of caching ``a`` after ``a_prev`` under popularity
``theta`` is::

    beta - w1 * sum_i eta_i * theta_i * max(1 - d*a_i, 0)
         - w2 * sum_i xi_i * max(a_i - a_prev_i, 0)

Maximizing it (dropping the small update term) is a sorting problem solved
by the block allocation in :func:`coarse_assignment` followed by
:func:`fine_tune`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..actions import sample_uniform
from ..core import CachingAction, SystemParams, miss_fractions

__all__ = [
    "VfaParams",
    "VfaAgent",
    "MpccAgent",
    "level_blocks",
    "coarse_assignment",
    "fine_tune",
    "selection_penalty",
    "vfa_features",
    "vfa_qhat",
    "vfa_gradient",
    "vfa_select",
    "vfa_update",
    "mpcc_select",
]


@dataclass
class VfaParams:
    """Learnable ``beta, eta, xi`` plus the fixed weights and step size."""

    C: int
    omega1: float = 1.0
    omega2: float = 0.01
    delta: float = 0.01
    gamma: float = 0.9
    beta: float = 0.0
    eta: np.ndarray = field(default=None)
    xi: np.ndarray = field(default=None)

    def __post_init__(self):
        if not self.omega1 > self.omega2 > 0:
            raise ValueError("need omega1 > omega2 > 0")
        if self.eta is None:
            self.eta = np.zeros(self.C)
        if self.xi is None:
            self.xi = np.zeros(self.C)
        self.eta = np.asarray(self.eta, dtype=float)
        self.xi = np.asarray(self.xi, dtype=float)


def level_blocks(sys: SystemParams) -> dict:
    """How many contents get each level ``l`` in the coarse allocation.

    The top level takes ``floor(K*L / l_max)`` contents; each lower level
    takes what the leftover budget allows. Blocks never extend past ``C``:
    overflow is pushed down to the next lower level.
    """
    lm, budget = sys.l_max, sys.budget
    if sys.full_content:
        return {sys.L: sys.K}
    z = {}
    used = 0
    slots = sys.C
    for level in range(lm, 0, -1):
        n = (budget - used) // level
        n = min(n, slots)
        z[level] = n
        used += level * n
        slots -= n
    if used != budget:
        raise ValueError("infeasible allocation: budget does not fit in C contents")
    return z


def _descending(coeffs) -> np.ndarray:
    return np.argsort(-np.asarray(coeffs, dtype=float), kind="stable")


def coarse_assignment(coeffs, sys: SystemParams):
    """Block allocation by descending coefficient. Returns ``(levels, order, z)``."""
    order = _descending(coeffs)
    z = level_blocks(sys)
    levels = np.zeros(sys.C, dtype=np.int64)
    pos = 0
    for level in sorted(z, reverse=True):
        levels[order[pos:pos + z[level]]] = level
        pos += z[level]
    return levels, order, z


def selection_penalty(coeffs, levels, L: int, d: int) -> float:
    """``sum_i c_i * max(1 - d*a_i, 0)``, the part of the approximate Q the selector minimizes."""
    return float(np.dot(coeffs, miss_fractions(levels, L, d)))


def fine_tune(levels, order, z, coeffs, sys: SystemParams) -> np.ndarray:
    """Move single levels off over-covered top contents when that lowers the penalty.

    For ``j = z_top, ..., 1`` the content at sorted position ``j`` gives one
    level to the first content past the top two blocks whose gain beats the
    loss. With the receiver at level 0 this is exactly the test
    ``(1 - d*(l_max-1)/L) * c_j < (d/L) * c_j'``; for a receiver that already
    holds levels the true marginal gain is used instead.
    """
    L, d, lm = sys.L, sys.d, sys.l_max
    levels = np.array(levels, dtype=np.int64)
    if sys.full_content or 1 - d * lm / L >= 0:
        return levels
    coeffs = np.asarray(coeffs, dtype=float)
    start = z.get(lm, 0) + z.get(lm - 1, 0)
    miss = np.maximum(L - d * np.arange(lm + 2), 0) / L
    tail = order[start:]
    tail_c = coeffs[tail]

    for j in range(z.get(lm, 0), 0, -1):
        h = order[j - 1]
        if levels[h] != lm:
            continue
        loss = coeffs[h] * (miss[lm - 1] - miss[lm])
        held = levels[tail]
        gain = tail_c * (miss[held] - miss[held + 1])
        hit = np.flatnonzero((held < lm) & (loss < gain))
        if hit.size:
            g = tail[hit[0]]
            levels[h] -= 1
            levels[g] += 1
    return levels


def _select_levels(coeffs, sys: SystemParams, tune: bool) -> np.ndarray:
    levels, order, z = coarse_assignment(coeffs, sys)
    if tune:
        levels = fine_tune(levels, order, z, coeffs, sys)
    return levels


def vfa_features(theta, levels, prev_levels, L: int, d: int):
    """``(theta_i * max(1 - d*a_i, 0), max(a_i - a_prev_i, 0))`` per content."""
    peak = np.asarray(theta, dtype=float) * miss_fractions(levels, L, d)
    upd = np.maximum(np.asarray(levels) - np.asarray(prev_levels), 0) / L
    return peak, upd


def vfa_qhat(params: VfaParams, theta, a: CachingAction, a_prev: CachingAction,
             d: int, L: int) -> float:
    peak, upd = vfa_features(theta, a.levels, a_prev.levels, L, d)
    return float(params.beta - params.omega1 * np.dot(params.eta, peak)
                 - params.omega2 * np.dot(params.xi, upd))


def vfa_gradient(params: VfaParams, theta, a: CachingAction, a_prev: CachingAction,
                 target: float, d: int, L: int):
    """Gradient of ``(target - Qhat)**2`` in ``(beta, eta, xi)`` with the target held fixed."""
    peak, upd = vfa_features(theta, a.levels, a_prev.levels, L, d)
    e = target - vfa_qhat(params, theta, a, a_prev, d, L)
    return -2.0 * e, 2.0 * e * params.omega1 * peak, 2.0 * e * params.omega2 * upd


def vfa_select(params: VfaParams, theta, a_prev: CachingAction, sys: SystemParams) -> CachingAction:
    """Greedy action for the approximate Q with the update term dropped."""
    coeffs = params.eta * np.asarray(theta, dtype=float)
    return CachingAction(_select_levels(coeffs, sys, tune=True), sys.l_max)


def vfa_update(params: VfaParams, x, a: CachingAction, reward: float, x_next,
               sys: SystemParams) -> float:
    """One SGD step on the squared TD error.

    ``x`` and ``x_next`` are ``(theta, prev_action)`` pairs; ``x_next[1]``
    is normally ``a``. Returns the TD error.
    """
    theta, a_prev = x
    theta_next, prev_next = x_next
    a_tilde = vfa_select(params, theta_next, prev_next, sys)
    target = reward + params.gamma * vfa_qhat(params, theta_next, a_tilde, prev_next,
                                              sys.d, sys.L)
    peak, upd = vfa_features(theta, a.levels, a_prev.levels, sys.L, sys.d)
    e = target - (params.beta - params.omega1 * np.dot(params.eta, peak)
                  - params.omega2 * np.dot(params.xi, upd))
    step = 2.0 * params.delta * e
    params.beta += step
    params.eta -= step * params.omega1 * peak
    params.xi -= step * params.omega2 * upd
    return float(e)


def mpcc_select(theta, sys: SystemParams) -> CachingAction:
    """Coarse block allocation on the current popularity; no learning, no fine-tune."""
    return CachingAction(_select_levels(np.asarray(theta, dtype=float), sys, tune=False),
                         sys.l_max)


class VfaAgent:
    """Epsilon-greedy agent on the linear approximation, trained by SGD."""

    name = "vfa"

    def __init__(self, sys: SystemParams, params: VfaParams, explore_space=None,
                 epsilon: float = 0.1):
        self.sys = sys
        self.params = params
        # uniform exploration: enumerated space if given, else sequential sampling
        self.explore_space = explore_space if explore_space is not None else sys
        self.epsilon = epsilon

    def greedy(self, obs):
        return vfa_select(self.params, obs.theta, obs.prev_action, self.sys)

    def select(self, obs, rng):
        if self.epsilon > 0 and rng.random() < self.epsilon:
            return sample_uniform(self.explore_space, rng)
        return self.greedy(obs)

    def update(self, obs, action, reward, next_obs):
        vfa_update(self.params, (obs.theta, obs.prev_action), action, reward,
                   (next_obs.theta, next_obs.prev_action), self.sys)


class MpccAgent:
    """Caches the currently most popular contents."""

    name = "mpcc"

    def __init__(self, sys: SystemParams):
        self.sys = sys
        self.epsilon = 0.0

    def greedy(self, obs):
        return mpcc_select(obs.theta, self.sys)

    def select(self, obs, rng):
        return self.greedy(obs)

    def update(self, obs, action, reward, next_obs):
        pass
