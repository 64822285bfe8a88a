"""Value-iteration oracle, tabular Q-learning, the VFA agent and MPCC."""
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from coopcache.actions import ActionSpace, validate
from coopcache.agents import (LearningSchedule, MpccAgent, OracleAgent, QLearningAgent, QTable,
                              VfaAgent, VfaParams, bellman_residual, coarse_assignment,
                              fine_tune, level_blocks, load_qtable, load_vfa, mpcc_select,
                              qlearn_select, qlearn_update, save_qtable, save_vfa,
                              selection_penalty, solve_mdp, value_iteration, vfa_gradient,
                              vfa_qhat, vfa_select, vfa_update)
from coopcache.core import CachingAction, SystemParams
from coopcache.env import CachingEnv, EnvConfig, ExactModel


def policy_values(P, R, gamma):
    """Values of every deterministic policy by direct linear solves; returns the best."""
    S, A, _ = P.shape
    r = (P * R).sum(axis=2)
    best = None
    for pol in itertools.product(range(A), repeat=S):
        Pp = P[np.arange(S), pol]
        v = np.linalg.solve(np.eye(S) - gamma * Pp, r[np.arange(S), pol])
        best = v if best is None else np.maximum(best, v)
    return best


def structured_to_generic(model):
    """Expand the structured model into P[s, a, s'] and R[s, a, s']."""
    nC, nA = model.n_candidates, model.n_actions
    S = nC * nA
    P = np.zeros((S, nA, S))
    R = np.zeros((S, nA, S))
    table = model.reward_table()
    for s in range(S):
        c = s // nA
        for a in range(nA):
            for c2 in range(nC):
                P[s, a, c2 * nA + a] = model.T[c, a, c2]
                R[s, a, c2 * nA + a] = table[s, a, c2]
    return P, R


def brute_force_penalty(coeffs, sys):
    """Smallest selection penalty over the whole enumerated lattice."""
    space = ActionSpace(sys)
    pens = [selection_penalty(coeffs, a.levels, sys.L, sys.d) for a in space]
    return min(pens)


class TestValueIteration:
    def test_degenerate_geometric_series(self):
        prm = SystemParams(p=1, C=1, K=1, d=1, L=1, M=100)
        env = CachingEnv(EnvConfig(prm, skewness=(1.0,)))
        V, pi = value_iteration(env.exact_model(ActionSpace(prm)), 0.9, tol=1e-9)
        assert V[0] == pytest.approx(100 / (1 - 0.9), abs=1e-8)

    def test_two_by_two_linear_system(self):
        rng = np.random.default_rng(0)
        P = rng.random((2, 2, 2))
        P /= P.sum(axis=2, keepdims=True)
        R = rng.normal(size=(2, 2, 2)) * 5
        V, pi = solve_mdp(P, R, 0.9, tol=1e-12)
        np.testing.assert_allclose(V, policy_values(P, R, 0.9), atol=1e-8)

    def test_structured_four_state_linear_system(self):
        rng = np.random.default_rng(1)
        T = rng.random((2, 2, 2))
        T /= T.sum(axis=2, keepdims=True)
        model = ExactModel(T=T, update_cost=np.array([[0.0, 3.0], [2.0, 0.0]]),
                           served=rng.random((2, 2)) * 50, M=50, space=None)
        V, pi = value_iteration(model, 0.9, tol=1e-12)
        P, R = structured_to_generic(model)
        np.testing.assert_allclose(V, policy_values(P, R, 0.9), atol=1e-8)
        V2, pi2 = solve_mdp(P, R, 0.9, tol=1e-12)
        np.testing.assert_allclose(V, V2, atol=1e-8)
        np.testing.assert_array_equal(pi, pi2)

    def test_residual_and_policy_fixed_point(self):
        prm = SystemParams(p=20, C=4, K=1, d=2, L=2)
        env = CachingEnv(EnvConfig(prm, transition_seed=3))
        model = env.exact_model(ActionSpace(prm))
        V, pi = value_iteration(model, 0.9, tol=1e-9)
        nC, nA = model.n_candidates, model.n_actions
        assert bellman_residual(model, V.reshape(nC, nA), 0.9) <= 1e-9
        # evaluate pi exactly, then its greedy policy is pi again
        P, R = structured_to_generic(model)
        S = nC * nA
        Pp = P[np.arange(S), pi]
        r = (P * R).sum(axis=2)[np.arange(S), pi]
        v_pi = np.linalg.solve(np.eye(S) - 0.9 * Pp, r)
        q = (P * R).sum(axis=2) + 0.9 * P @ v_pi
        np.testing.assert_array_equal(q.argmax(axis=1), pi)

    def test_gamma_one_rejected(self):
        model = ExactModel(T=np.ones((1, 1, 1)), update_cost=np.zeros((1, 1)),
                           served=np.ones((1, 1)), M=1, space=None)
        with pytest.raises(ValueError):
            value_iteration(model, 1.0)

    def test_ties_go_to_lowest_ordinal(self):
        model = ExactModel(T=np.ones((1, 3, 1)), update_cost=np.zeros((3, 3)),
                           served=np.full((1, 3), 7.0), M=7, space=None)
        _, pi = value_iteration(model, 0.5)
        assert list(pi) == [0, 0, 0]


class TestQLearning:
    def test_zero_table_picks_first(self):
        assert qlearn_select(QTable(2, 5), 3, 0.0, np.random.default_rng(0)) == 0

    def test_unique_max(self):
        t = QTable(1, 4)
        t.values[2, 3] = 1.0
        assert qlearn_select(t, 2, 0.0, np.random.default_rng(0)) == 3

    def test_full_exploration_is_uniform(self):
        t = QTable(1, 3)
        t.values[0] = [5.0, 0.0, 0.0]
        rng = np.random.default_rng(4)
        draws = np.bincount([qlearn_select(t, 0, 1.0, rng) for _ in range(10_000)], minlength=3)
        assert chisquare(draws).pvalue > 0.01

    def test_update_examples(self):
        t = QTable(2, 3)
        qlearn_update(t, 0, 1, 9.0, 4, lam=0.6, gamma=0.9)
        assert t.values[0, 1] == pytest.approx(5.4)
        assert np.count_nonzero(t.values) == 1
        qlearn_update(t, 1, 1, 0.0, 2, lam=0.6, gamma=0.9)
        assert t.values[1, 1] == 0.0
        qlearn_update(t, 3, 2, 7.5, 0, lam=1.0, gamma=0.0)
        assert t.values[3, 2] == 7.5

    def test_update_uses_next_state_max(self):
        t = QTable(1, 2)
        t.values[1] = [1.0, 4.0]
        td = qlearn_update(t, 0, 0, 1.0, 1, lam=0.5, gamma=0.5)
        assert td == pytest.approx(3.0)
        assert t.values[0, 0] == pytest.approx(1.5)

    def test_schedule_switch(self):
        s = LearningSchedule(0.1, 10, 0.6, 0.9)
        assert s.epsilon_at(9) == 0.1 and s.epsilon_at(10) == 0.0
        with pytest.raises(ValueError):
            LearningSchedule(epsilon_explore=2.0)

    def test_agent_needs_candidate_tag(self):
        prm = SystemParams(p=20, C=3, K=1, d=2, L=2)
        env = CachingEnv(EnvConfig(prm, white_box=False))
        agent = QLearningAgent(ActionSpace(prm), 2, LearningSchedule())
        with pytest.raises(ValueError, match="white-box"):
            agent.state_of(env.reset(0))

    def test_agent_learns_optimal_policy_on_tiny_mdp(self):
        # three actions, deterministic requests, constant step, exploration kept on
        prm = SystemParams(p=4, C=3, K=1, d=2, L=2)
        cfg = EnvConfig(prm, skewness=(1.0, 2.0), transition_seed=5, permute_ranks=True,
                        request_mode="deterministic_expected")
        env = CachingEnv(cfg)
        space = ActionSpace(prm)
        _, pi = value_iteration(env.exact_model(space), 0.9)
        agent = QLearningAgent(space, 2, LearningSchedule(1.0, 10**9, 0.05, 0.9))
        rng = np.random.default_rng(0)
        obs = env.reset(0)
        for _ in range(60_000):
            a = agent.select(obs, rng)
            nxt, r = env.step(a)
            agent.update(obs, a, r, nxt)
            obs = nxt
        np.testing.assert_array_equal(agent.table.greedy_policy(), pi)


class TestVfaApproximation:
    def test_zero_parameters(self):
        prm = VfaParams(C=3)
        a = CachingAction([2, 1, 0], 2)
        assert vfa_qhat(prm, [0.5, 0.3, 0.2], a, CachingAction([0, 1, 2], 2), 2, 3) == 0.0

    def test_hand_value(self):
        prm = VfaParams(C=2, beta=1.0, eta=np.ones(2), xi=np.zeros(2))
        q = vfa_qhat(prm, [2 / 3, 1 / 3], CachingAction([1, 0], 1), CachingAction([1, 0], 1),
                     d=2, L=2)
        assert q == pytest.approx(2 / 3, abs=1e-15)

    def test_zero_delta_drops_update_term(self):
        prm = VfaParams(C=2, beta=0.5, eta=np.zeros(2), xi=np.array([3.0, 4.0]))
        a = CachingAction([1, 1], 1)
        assert vfa_qhat(prm, [0.5, 0.5], a, a, 2, 2) == 0.5

    @pytest.mark.parametrize("seed", range(20))
    def test_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        sys = SystemParams(p=10, C=6, K=2, d=2, L=3)
        space = ActionSpace(sys)
        prm = VfaParams(C=6, beta=rng.normal(), eta=rng.normal(size=6), xi=rng.normal(size=6))
        theta = rng.dirichlet(np.ones(6))
        a, a_prev = space[int(rng.integers(len(space)))], space[int(rng.integers(len(space)))]
        target = rng.normal() * 3

        def loss(beta, eta, xi):
            p = VfaParams(C=6, beta=beta, eta=eta, xi=xi)
            return (target - vfa_qhat(p, theta, a, a_prev, sys.d, sys.L)) ** 2

        gb, ge, gx = vfa_gradient(prm, theta, a, a_prev, target, sys.d, sys.L)
        h = 1e-6
        num_b = (loss(prm.beta + h, prm.eta, prm.xi) - loss(prm.beta - h, prm.eta, prm.xi)) / (2 * h)
        assert gb == pytest.approx(num_b, rel=1e-5, abs=1e-7)
        for i in range(6):
            e = np.zeros(6)
            e[i] = h
            num_e = (loss(prm.beta, prm.eta + e, prm.xi) - loss(prm.beta, prm.eta - e, prm.xi)) / (2 * h)
            num_x = (loss(prm.beta, prm.eta, prm.xi + e) - loss(prm.beta, prm.eta, prm.xi - e)) / (2 * h)
            assert ge[i] == pytest.approx(num_e, rel=1e-5, abs=1e-7)
            assert gx[i] == pytest.approx(num_x, rel=1e-5, abs=1e-7)


class TestVfaSelect:
    sys = SystemParams(p=20, C=3, K=1, d=2, L=3)

    def test_no_fine_tune(self):
        a = vfa_select(VfaParams(C=3, eta=np.ones(3)), [0.5, 0.3, 0.2], None, self.sys)
        assert tuple(a.levels) == (2, 1, 0)
        assert brute_force_penalty([0.5, 0.3, 0.2], self.sys) == pytest.approx(0.3)

    def test_fine_tune_fires(self):
        a = vfa_select(VfaParams(C=3, eta=np.ones(3)), [0.4, 0.35, 0.25], None, self.sys)
        assert tuple(a.levels) == (1, 1, 1)
        assert selection_penalty([0.4, 0.35, 0.25], a.levels, 3, 2) == pytest.approx(1 / 3)
        assert brute_force_penalty([0.4, 0.35, 0.25], self.sys) == pytest.approx(1 / 3)

    def test_table_two_blocks(self):
        sys = SystemParams(p=50, C=20, K=5, d=3, L=6)
        assert level_blocks(sys) == {2: 15, 1: 0}
        coeffs = np.linspace(1, 0.1, 20)
        levels, _, _ = coarse_assignment(coeffs, sys)
        assert list(levels) == [2] * 15 + [0] * 5

    def test_full_content_space(self):
        sys = SystemParams(p=20, C=6, K=2, d=1, L=3, full_content=True)
        a = vfa_select(VfaParams(C=6, eta=np.ones(6)), [0.1, 0.3, 0.05, 0.25, 0.2, 0.1], None, sys)
        assert tuple(a.levels) == (0, 3, 0, 3, 0, 0)
        assert validate(a, sys)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 2), st.integers(1, 4), st.integers(1, 3),
           st.integers(0, 2**32 - 1))
    def test_valid_and_no_worse_than_coarse(self, C, K, L, d, seed):
        from coopcache.core import lmax
        if K * L > C * lmax(L, d):
            return
        sys = SystemParams(p=5, C=C, K=K, d=d, L=L)
        coeffs = np.random.default_rng(seed).random(C)
        levels, order, z = coarse_assignment(coeffs, sys)
        tuned = fine_tune(levels, order, z, coeffs, sys)
        assert validate(CachingAction(levels, sys.l_max), sys)
        assert validate(CachingAction(tuned, sys.l_max), sys)
        base = selection_penalty(coeffs, levels, L, d)
        after = selection_penalty(coeffs, tuned, L, d)
        if not np.array_equal(levels, tuned):
            assert after < base
        assert after >= brute_force_penalty(coeffs, sys) - 1e-12

    @given(st.integers(1, 30), st.integers(1, 8), st.integers(1, 6), st.integers(1, 4))
    def test_level_blocks_spend_budget(self, C, K, L, d):
        from coopcache.core import lmax
        if K * L > C * lmax(L, d):
            return
        sys = SystemParams(p=5, C=C, K=K, d=d, L=L)
        z = level_blocks(sys)
        assert sum(level * n for level, n in z.items()) == K * L
        assert sum(z.values()) <= C


class TestVfaUpdate:
    sys = SystemParams(p=20, C=3, K=1, d=2, L=3)

    def test_beta_step(self):
        prm = VfaParams(C=3, gamma=0.0, delta=0.01)
        a = CachingAction([2, 1, 0], 2)
        e = vfa_update(prm, ([0.5, 0.3, 0.2], a), a, 2.0, ([0.5, 0.3, 0.2], a), self.sys)
        assert e == 2.0
        assert prm.beta == pytest.approx(0.04)

    def test_covered_content_keeps_eta(self):
        prm = VfaParams(C=3, gamma=0.0, eta=np.array([1.0, 2.0, 3.0]))
        a = CachingAction([2, 1, 0], 2)    # content 0 fully covered: d*a = 4/3 >= 1
        vfa_update(prm, ([0.5, 0.3, 0.2], a), a, 5.0, ([0.5, 0.3, 0.2], a), self.sys)
        assert prm.eta[0] == 1.0
        assert prm.eta[1] != 2.0 and prm.eta[2] != 3.0

    def test_zero_error_no_change(self):
        prm = VfaParams(C=3, gamma=0.0)
        a = CachingAction([2, 1, 0], 2)
        e = vfa_update(prm, ([0.5, 0.3, 0.2], a), a, 0.0, ([0.5, 0.3, 0.2], a), self.sys)
        assert e == 0.0 and prm.beta == 0.0
        assert not prm.eta.any() and not prm.xi.any()

    def test_update_matches_gradient_step(self):
        rng = np.random.default_rng(3)
        prm = VfaParams(C=3, gamma=0.9, beta=1.0, eta=rng.random(3), xi=rng.random(3))
        a, prev = CachingAction([1, 1, 1], 2), CachingAction([2, 1, 0], 2)
        theta, theta2 = [0.5, 0.3, 0.2], [0.2, 0.5, 0.3]
        a_t = vfa_select(prm, theta2, a, self.sys)
        target = 3.0 + 0.9 * vfa_qhat(prm, theta2, a_t, a, 2, 3)
        gb, ge, gx = vfa_gradient(prm, theta, a, prev, target, 2, 3)
        before = (prm.beta, prm.eta.copy(), prm.xi.copy())
        vfa_update(prm, (theta, prev), a, 3.0, (theta2, a), self.sys)
        assert prm.beta == pytest.approx(before[0] - prm.delta * gb)
        np.testing.assert_allclose(prm.eta, before[1] - prm.delta * ge)
        np.testing.assert_allclose(prm.xi, before[2] - prm.delta * gx)

    def test_weights_ordering(self):
        with pytest.raises(ValueError):
            VfaParams(C=3, omega1=0.01, omega2=1.0)


class TestMpcc:
    def test_examples(self):
        sys = SystemParams(p=20, C=3, K=1, d=2, L=3)
        assert tuple(mpcc_select([0.5, 0.3, 0.2], sys).levels) == (2, 1, 0)
        # fine-tune would move a level here; the myopic baseline does not
        assert tuple(mpcc_select([0.4, 0.35, 0.25], sys).levels) == (2, 1, 0)
        assert tuple(mpcc_select([1 / 3] * 3, sys).levels) == (2, 1, 0)

    def test_zipf_top_two(self):
        from coopcache.env import zipf_profile
        sys = SystemParams(p=20, C=10, K=1, d=2, L=3)
        assert list(mpcc_select(zipf_profile(10, 1.36), sys).levels) == [2, 1] + [0] * 8

    @given(st.lists(st.floats(0.001, 1.0), min_size=5, max_size=5), st.floats(0.01, 100))
    def test_scale_invariant(self, w, s):
        sys = SystemParams(p=20, C=5, K=2, d=2, L=3)
        theta = np.array(w)
        assert mpcc_select(theta, sys) == mpcc_select(theta * s, sys)

    def test_agent_never_learns(self):
        sys = SystemParams(p=20, C=3, K=1, d=2, L=3)
        agent = MpccAgent(sys)
        env = CachingEnv(EnvConfig(sys))
        obs = env.reset(0)
        assert agent.select(obs, None) == mpcc_select(obs.theta, sys)
        agent.update(obs, None, 0.0, obs)


class TestOracleAgent:
    def test_replays_policy(self):
        prm = SystemParams(p=20, C=4, K=1, d=2, L=2)
        env = CachingEnv(EnvConfig(prm))
        space = ActionSpace(prm)
        _, pi = value_iteration(env.exact_model(space), 0.9)
        agent = OracleAgent(pi, space)
        obs = env.reset(0)
        for _ in range(20):
            a = agent.select(obs, None)
            assert space.index(a) == pi[obs.candidate_index * len(space)
                                        + space.index(obs.prev_action)]
            obs, _ = env.step(a)


class TestVfaAgent:
    def test_explores_then_exploits(self):
        sys = SystemParams(p=20, C=5, K=1, d=2, L=3)
        agent = VfaAgent(sys, VfaParams(C=5), epsilon=1.0)
        env = CachingEnv(EnvConfig(sys))
        obs = env.reset(0)
        rng = np.random.default_rng(0)
        picks = {agent.select(obs, rng) for _ in range(50)}
        assert len(picks) > 1 and all(validate(a, sys) for a in picks)
        agent.epsilon = 0.0
        assert agent.select(obs, rng) == agent.greedy(obs)


class TestSnapshots:
    def test_qtable_roundtrip(self, tmp_path):
        t = QTable(2, 3, np.random.default_rng(0).normal(size=(6, 3)) * 1e3)
        save_qtable(t, tmp_path / "q.txt")
        back = load_qtable(tmp_path / "q.txt")
        np.testing.assert_array_equal(back.values, t.values)
        assert (back.n_candidates, back.n_actions) == (2, 3)
        assert (tmp_path / "q.txt").read_text().startswith("coopcache-snapshot qtable\n")

    def test_vfa_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        p = VfaParams(C=4, omega1=2.0, omega2=0.5, delta=0.003, gamma=0.8,
                      beta=rng.normal(), eta=rng.normal(size=4), xi=rng.normal(size=4))
        save_vfa(p, tmp_path / "v.txt")
        back = load_vfa(tmp_path / "v.txt")
        assert back.beta == p.beta and back.delta == p.delta and back.gamma == p.gamma
        np.testing.assert_array_equal(back.eta, p.eta)
        np.testing.assert_array_equal(back.xi, p.xi)

    def test_wrong_kind(self, tmp_path):
        save_qtable(QTable(1, 1), tmp_path / "q.txt")
        with pytest.raises(ValueError):
            load_vfa(tmp_path / "q.txt")
