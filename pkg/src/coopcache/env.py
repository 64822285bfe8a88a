"""Markov environment for the caching MDP.

The popularity process moves among a finite set of candidate profiles
(Zipf-like, one skewness each). The next candidate is drawn from a random
distribution that depends on the current candidate and, in small-scale
mode, on the chosen action. Requests for the slot are then sampled from
the new candidate's profile, and the reward is the SBS-served traffic minus
the cache update traffic.

Transition rows are generated lazily from ``(transition_seed, candidate,
action levels)``. The same action therefore always gets the same row, no
matter which action space (coded, uncoded, full-content) an agent uses.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .actions import ActionSpace
from .core import (CachingAction, EnvObservation, SystemParams, compute_popularity,
                   compute_reward, miss_fractions)
from .serving import (SlotTraffic, UncodedPlacement, account_mds, account_uncoded,
                      expected_uncoded_served)

__all__ = [
    "RequestMode",
    "Discipline",
    "SnmParams",
    "EnvConfig",
    "TransitionModel",
    "ExactModel",
    "CachingEnv",
    "ModelHiddenError",
    "build",
    "zipf_profile",
    "largest_remainder",
    "first_action",
    "stationary_distribution",
    "candidate_chain",
]


class RequestMode(str, enum.Enum):
    ZIPF_MULTINOMIAL = "zipf_multinomial"
    DETERMINISTIC_EXPECTED = "deterministic_expected"
    SNM = "snm"


class Discipline(str, enum.Enum):
    MDS = "mds"
    UNCODED = "uncoded"


class ModelHiddenError(RuntimeError):
    pass


@dataclass(frozen=True)
class SnmParams:
    """Shot-noise burst settings: how many contents burst, for how long, how hard."""

    n_bursts: int = 3
    mean_lifespan: float = 20.0
    boost: float = 5.0


@dataclass(frozen=True)
class EnvConfig:
    params: SystemParams
    skewness: tuple = (1.36, 2.3)
    transition_seed: int = 0
    request_mode: RequestMode = RequestMode.ZIPF_MULTINOMIAL
    snm: SnmParams = field(default_factory=SnmParams)
    permute_ranks: bool = False
    white_box: bool = True
    action_dependent: bool = True

    def __post_init__(self):
        object.__setattr__(self, "skewness", tuple(float(a) for a in self.skewness))
        object.__setattr__(self, "request_mode", RequestMode(self.request_mode))
        if not self.skewness:
            raise ValueError("need at least one popularity candidate")
        if any(a <= 0 for a in self.skewness):
            raise ValueError("Zipf skewness values must be positive")
        if self.snm.n_bursts < 0 or self.snm.mean_lifespan < 1 or self.snm.boost <= 0:
            raise ValueError("invalid shot-noise parameters")

    @property
    def n_candidates(self) -> int:
        return len(self.skewness)

    def with_params(self, params: SystemParams) -> "EnvConfig":
        return EnvConfig(params, self.skewness, self.transition_seed, self.request_mode,
                         self.snm, self.permute_ranks, self.white_box, self.action_dependent)


def zipf_profile(C: int, alpha: float) -> np.ndarray:
    """``theta_c`` proportional to ``c**-alpha`` for ``c = 1..C``."""
    if C < 1 or alpha <= 0:
        raise ValueError("need C >= 1 and alpha > 0")
    w = np.arange(1, C + 1, dtype=float) ** -alpha
    return w / w.sum()


def largest_remainder(M: int, theta: np.ndarray) -> np.ndarray:
    """Round ``M * theta`` to integers summing to ``M`` (Hamilton's method)."""
    raw = M * np.asarray(theta, dtype=float)
    base = np.floor(raw).astype(np.int64)
    short = M - int(base.sum())
    if short > 0:
        # stable: ties go to the lower index
        order = np.argsort(-(raw - base), kind="stable")
        base[order[:short]] += 1
    return base


def first_action(params: SystemParams) -> CachingAction:
    """Lexicographically smallest valid action (budget packed at the tail)."""
    levels = np.zeros(params.C, dtype=np.int64)
    if params.full_content:
        levels[params.C - params.K:] = params.L
    else:
        left, i = params.budget, params.C - 1
        while left > 0:
            levels[i] = min(params.l_max, left)
            left -= levels[i]
            i -= 1
    return CachingAction(levels, params.l_max)


@dataclass(frozen=True)
class TransitionModel:
    """``T[candidate, action_ordinal]`` is a distribution over next candidates."""

    T: np.ndarray
    space: Optional[ActionSpace] = None


@dataclass
class ExactModel:
    """White-box model of the MDP over an enumerated action space.

    States are ordinals ``candidate * |A| + prev_action_ordinal``. The expected
    reward splits into the update part, which depends on ``(prev, action)``,
    and the peak-hour part, which depends on ``(next candidate, action)``.
    """

    T: np.ndarray               # (n_cand, n_act, n_cand)
    update_cost: np.ndarray     # (n_act, n_act), [prev, action], already times p
    served: np.ndarray          # (n_cand, n_act): expected SBS-served traffic
    M: int
    space: ActionSpace

    @property
    def n_candidates(self) -> int:
        return self.T.shape[0]

    @property
    def n_actions(self) -> int:
        return self.T.shape[1]

    @property
    def n_states(self) -> int:
        return self.n_candidates * self.n_actions

    def state_index(self, candidate: int, prev_ordinal: int) -> int:
        return candidate * self.n_actions + prev_ordinal

    def expected_reward(self, state: int, action: int, next_candidate: int) -> float:
        prev = state % self.n_actions
        return float(self.served[next_candidate, action] - self.update_cost[prev, action])

    def reward_table(self) -> np.ndarray:
        """``E[R | x, a, x']`` as an ``(n_states, n_act, n_cand)`` array."""
        nA, nC = self.n_actions, self.n_candidates
        per_prev = self.served.T[None, :, :] - self.update_cost[:, :, None]
        return np.broadcast_to(per_prev, (nC, nA, nA, nC)).reshape(nC * nA, nA, nC).copy()


class CachingEnv:
    """Seedable simulator of the popularity chain, requests and rewards.

    Parameters
    ----------
    config : EnvConfig
    discipline : {"mds", "uncoded"}
        How cached fragments combine at the user.
    """

    def __init__(self, config: EnvConfig, discipline: str = "mds"):
        self.config = config
        self.params = config.params
        self.discipline = Discipline(discipline)
        C = self.params.C
        perm_rng = np.random.default_rng([config.transition_seed, 0x5EED])
        profiles = []
        for i, alpha in enumerate(config.skewness):
            theta = zipf_profile(C, alpha)
            if config.permute_ranks and i > 0:
                theta = theta[np.argsort(perm_rng.permutation(C))]
            profiles.append(theta)
        self.profiles = np.array(profiles)
        self._rows: dict = {}
        self._rng: Optional[np.random.Generator] = None
        self._candidate = 0
        self._prev: Optional[CachingAction] = None
        self._slot = 0
        self._placement: Optional[UncodedPlacement] = None
        self._bursts: list = []
        self.last_traffic: Optional[SlotTraffic] = None

    @property
    def n_candidates(self) -> int:
        return self.config.n_candidates

    # ---- transitions -------------------------------------------------
    def transition_row(self, candidate: int, action: Optional[CachingAction]) -> np.ndarray:
        key = (candidate, action.key if self.config.action_dependent else b"")
        row = self._rows.get(key)
        if row is None:
            n = self.n_candidates
            entropy = [self.config.transition_seed, candidate]
            if self.config.action_dependent:
                entropy += (action.levels + 1).tolist()
            rng = np.random.default_rng(entropy)
            if n == 1:
                row = np.ones(1)
            elif n == 2:
                stay = rng.random()
                row = np.empty(2)
                row[candidate] = stay
                row[1 - candidate] = 1.0 - stay
            else:
                w = rng.random(n)
                row = w / w.sum()
            row.setflags(write=False)
            self._rows[key] = row
        return row

    def transition_model(self, space: ActionSpace) -> TransitionModel:
        n = self.n_candidates
        T = np.empty((n, len(space), n))
        for c in range(n):
            for k, a in enumerate(space):
                T[c, k] = self.transition_row(c, a)
        return TransitionModel(T, space)

    def exact_model(self, space: ActionSpace) -> ExactModel:
        """Exact transition tensor and expected rewards (white-box mode only).

        Expected counts ``M * theta'`` are substituted into the reward, which
        is exact for multinomial requests because the reward is linear in
        the counts.
        """
        if not self.config.white_box:
            raise ModelHiddenError("model hidden: environment is in black-box mode")
        if self.config.request_mode is RequestMode.SNM:
            raise ModelHiddenError("shot-noise requests have no finite exact model")
        prm = self.params
        T = self.transition_model(space).T
        mat = space.matrix
        if self.discipline is Discipline.MDS:
            miss = miss_fractions(mat, prm.L, prm.d)
        else:
            served = np.vectorize(lambda k: expected_uncoded_served(int(k), prm.L, prm.d))(mat)
            miss = 1.0 - served
        if self.config.request_mode is RequestMode.DETERMINISTIC_EXPECTED:
            # requests are the rounded expected counts, so use them as is
            counts = np.array([largest_remainder(prm.M, th) for th in self.profiles])
        else:
            counts = prm.M * self.profiles
        served_traffic = prm.M - counts @ miss.T
        update = np.empty((len(space), len(space)))
        for k, prev in enumerate(mat):
            update[k] = np.maximum(mat - prev, 0).sum(axis=1)
        update *= prm.p / prm.L
        return ExactModel(T=T, update_cost=update, served=served_traffic, M=prm.M, space=space)

    # ---- requests ----------------------------------------------------
    def _new_burst(self, rng, taken) -> tuple:
        free = [c for c in range(self.params.C) if c not in taken]
        content = int(free[int(rng.integers(len(free)))])
        life = int(rng.geometric(1.0 / self.config.snm.mean_lifespan))
        return content, life

    def _advance_bursts(self) -> None:
        rng = self._rng
        kept = [(c, life - 1) for c, life in self._bursts if life > 1]
        taken = {c for c, _ in kept}
        n_target = min(self.config.snm.n_bursts, self.params.C)
        while len(kept) < n_target:
            c, life = self._new_burst(rng, taken)
            kept.append((c, life))
            taken.add(c)
        self._bursts = kept

    def request_profile(self, candidate: int) -> np.ndarray:
        theta = self.profiles[candidate]
        if self.config.request_mode is RequestMode.SNM and self._bursts:
            theta = theta.copy()
            for c, _ in self._bursts:
                theta[c] *= self.config.snm.boost
            theta /= theta.sum()
        return theta

    def _requests(self, candidate: int) -> np.ndarray:
        M = self.params.M
        mode = self.config.request_mode
        if mode is RequestMode.DETERMINISTIC_EXPECTED:
            return largest_remainder(M, self.profiles[candidate])
        if mode is RequestMode.SNM:
            self._advance_bursts()
        return self._rng.multinomial(M, self.request_profile(candidate))

    def _observe(self, counts) -> EnvObservation:
        return EnvObservation(
            theta=compute_popularity(counts),
            prev_action=self._prev,
            counts=counts,
            candidate_index=self._candidate if self.config.white_box else None,
            slot=self._slot,
        )

    # ---- episode -----------------------------------------------------
    def reset(self, seed: int, initial_action: Optional[CachingAction] = None) -> EnvObservation:
        """Start a new episode in candidate 0.

        The previous action defaults to the lexicographically first valid one;
        ``initial_action`` overrides it (it is not checked against the lattice).
        """
        self._rng = np.random.default_rng(seed)
        self._candidate = 0
        self._prev = initial_action if initial_action is not None else first_action(self.params)
        self._slot = 0
        self._bursts = []
        self.last_traffic = None
        if self.discipline is Discipline.UNCODED:
            self._placement = UncodedPlacement(self.params)
            self._placement.apply(self._prev.levels, self._rng)
        counts = self._requests(self._candidate)
        return self._observe(counts)

    def step(self, action: CachingAction):
        """Apply ``action`` for the next slot; return ``(observation, reward)``."""
        if self._rng is None:
            raise RuntimeError("step() called before reset()")
        row = self.transition_row(self._candidate, action)
        u = self._rng.random()
        nxt = int(np.searchsorted(np.cumsum(row), u, side="right"))
        nxt = min(nxt, self.n_candidates - 1)
        counts = self._requests(nxt)
        if self.discipline is Discipline.MDS:
            traffic = account_mds(counts, action, self._prev, self.params)
            reward = compute_reward(counts, action, self._prev, self.params)
        else:
            traffic = account_uncoded(counts, action, self._prev, self.params,
                                      self._rng, self._placement)
            reward = traffic.reward
        self.last_traffic = traffic
        self._prev = action
        self._candidate = nxt
        self._slot += 1
        return self._observe(counts), reward

    @property
    def candidate(self) -> int:
        return self._candidate

    @property
    def slot(self) -> int:
        return self._slot


def build(config: EnvConfig, discipline: str = "mds") -> CachingEnv:
    return CachingEnv(config, discipline)


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Stationary law of a row-stochastic matrix (left eigenvector for eigenvalue 1)."""
    w, v = np.linalg.eig(P.T)
    k = int(np.argmin(np.abs(w - 1.0)))
    pi = np.real(v[:, k])
    return pi / pi.sum()


def candidate_chain(env: CachingEnv, action: CachingAction) -> np.ndarray:
    """Candidate-to-candidate transition matrix under a fixed action."""
    return np.array([env.transition_row(c, action) for c in range(env.n_candidates)])

