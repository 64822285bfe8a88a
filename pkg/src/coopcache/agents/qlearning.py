"""Tabular Q-learning over (popularity candidate, previous action) states."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..actions import ActionSpace

__all__ = ["LearningSchedule", "QTable", "QLearningAgent", "qlearn_select", "qlearn_update"]


@dataclass
class LearningSchedule:
    """Exploration rate, switch point and step sizes.

    ``epsilon_explore`` applies before ``switch_slot`` and zero afterwards.
    """

    epsilon_explore: float = 0.1
    switch_slot: int = 100_000
    lam: float = 0.6
    gamma: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.epsilon_explore <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.switch_slot < 0:
            raise ValueError("switch_slot must be >= 0")

    def epsilon_at(self, slot: int) -> float:
        return self.epsilon_explore if slot < self.switch_slot else 0.0


class QTable:
    """Q-values indexed ``[candidate * |A| + prev_ordinal, action_ordinal]``."""

    def __init__(self, n_candidates: int, n_actions: int, values=None):
        self.n_candidates = n_candidates
        self.n_actions = n_actions
        shape = (n_candidates * n_actions, n_actions)
        if values is None:
            self.values = np.zeros(shape)
        else:
            self.values = np.asarray(values, dtype=float).reshape(shape)

    @property
    def shape(self):
        return self.values.shape

    def state(self, candidate: int, prev_ordinal: int) -> int:
        return candidate * self.n_actions + prev_ordinal

    def greedy_policy(self) -> np.ndarray:
        return self.values.argmax(axis=1)


def qlearn_select(table: QTable, state: int, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy action ordinal; ties in the greedy branch go to the lowest ordinal."""
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(table.n_actions))
    return int(np.argmax(table.values[state]))


def qlearn_update(table: QTable, x: int, a: int, reward: float, x_next: int,
                  lam: float, gamma: float) -> float:
    """One temporal-difference step on ``Q[x, a]``; returns the TD error."""
    q = table.values
    td = reward + gamma * q[x_next].max() - q[x, a]
    q[x, a] += lam * td
    return td


class QLearningAgent:
    """Epsilon-greedy tabular learner.

    Parameters
    ----------
    space : ActionSpace
    n_candidates : int
        Number of popularity candidates, known from the white-box tag.
    schedule : LearningSchedule
    lambda_decay : float
        With ``w > 0`` the step on a pair visited ``n`` times is
        ``lam / n**w``; ``0`` keeps the step constant.
    """

    name = "qlearning"

    def __init__(self, space: ActionSpace, n_candidates: int, schedule: LearningSchedule,
                 lambda_decay: float = 0.0):
        self.space = space
        self.schedule = schedule
        self.table = QTable(n_candidates, len(space))
        self.lambda_decay = lambda_decay
        self.visits = np.zeros(self.table.shape, dtype=np.int64) if lambda_decay else None
        self.epsilon = schedule.epsilon_explore

    def state_of(self, obs) -> int:
        if obs.candidate_index is None:
            raise ValueError("tabular Q-learning needs the white-box candidate index")
        return self.table.state(obs.candidate_index, self.space.index(obs.prev_action))

    def greedy(self, obs):
        return self.space[int(np.argmax(self.table.values[self.state_of(obs)]))]

    def select(self, obs, rng):
        return self.space[qlearn_select(self.table, self.state_of(obs), self.epsilon, rng)]

    def update(self, obs, action, reward, next_obs):
        x = self.state_of(obs)
        a = self.space.index(action)
        lam = self.schedule.lam
        if self.visits is not None:
            self.visits[x, a] += 1
            lam = lam / self.visits[x, a] ** self.lambda_decay
        qlearn_update(self.table, x, a, reward, self.state_of(next_obs), lam,
                      self.schedule.gamma)
