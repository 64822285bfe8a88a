"""Value iteration on the white-box model, and the agent that replays its policy."""
from __future__ import annotations

import numpy as np

from ..env import ExactModel

__all__ = ["value_iteration", "solve_mdp", "bellman_residual", "greedy_q", "OracleAgent"]


def greedy_q(model: ExactModel, V: np.ndarray, gamma: float) -> np.ndarray:
    """``Q[c, prev, a]`` for the structured model given ``V[c, prev]``."""
    # W[c, a] = sum_c' T[c, a, c'] (served[c', a] + gamma * V[c', a])
    future = model.served + gamma * V          # (n_cand, n_act) indexed [c', a]
    W = np.einsum("cak,ka->ca", model.T, future)
    return W[:, None, :] - model.update_cost[None, :, :]


def bellman_residual(model: ExactModel, V: np.ndarray, gamma: float) -> float:
    return float(np.max(np.abs(greedy_q(model, V, gamma).max(axis=2) - V)))


def value_iteration(model: ExactModel, gamma: float, tol: float = 1e-9,
                    max_iter: int = 100_000):
    """Optimal state values and policy of the caching MDP.

    Returns
    -------
    V : ndarray, shape (n_states,)
        Indexed by ``candidate * |A| + prev_action_ordinal``.
    policy : ndarray of int, shape (n_states,)
        Greedy action ordinal; ties go to the lowest ordinal.
    """
    if not 0 <= gamma < 1:
        raise ValueError("value iteration needs 0 <= gamma < 1 to converge")
    V = np.zeros((model.n_candidates, model.n_actions))
    for _ in range(max_iter):
        V_new = greedy_q(model, V, gamma).max(axis=2)
        step = np.max(np.abs(V_new - V))
        V = V_new
        # residual of V_new is at most gamma * step
        if gamma * step <= tol:
            break
    else:
        raise RuntimeError("value iteration did not converge")
    policy = greedy_q(model, V, gamma).argmax(axis=2)
    return V.reshape(-1), policy.reshape(-1)


def solve_mdp(P: np.ndarray, R: np.ndarray, gamma: float, tol: float = 1e-9,
              max_iter: int = 100_000):
    """Value iteration for a generic finite MDP.

    ``P[s, a, s']`` are transition probabilities and ``R[s, a, s']`` the
    expected rewards.
    """
    if not 0 <= gamma < 1:
        raise ValueError("value iteration needs 0 <= gamma < 1 to converge")
    P = np.asarray(P, dtype=float)
    R = np.asarray(R, dtype=float)
    expected = (P * R).sum(axis=2)    # (S, A)
    V = np.zeros(P.shape[0])
    for _ in range(max_iter):
        V_new = (expected + gamma * P @ V).max(axis=1)
        step = np.max(np.abs(V_new - V))
        V = V_new
        if gamma * step <= tol:
            break
    else:
        raise RuntimeError("value iteration did not converge")
    return V, (expected + gamma * P @ V).argmax(axis=1)


class OracleAgent:
    """Plays the value-iteration policy; never learns."""

    name = "value_iteration"

    def __init__(self, policy: np.ndarray, space, epsilon: float = 0.0):
        self.policy = np.asarray(policy)
        self.space = space
        self.epsilon = epsilon

    def state_of(self, obs) -> int:
        if obs.candidate_index is None:
            raise ValueError("the oracle needs the white-box candidate index")
        return obs.candidate_index * len(self.space) + self.space.index(obs.prev_action)

    def greedy(self, obs):
        return self.space[int(self.policy[self.state_of(obs)])]

    def select(self, obs, rng):
        return self.greedy(obs)

    def update(self, obs, action, reward, next_obs):
        pass
