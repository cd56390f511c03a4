import itertools

import numpy as np
import pytest

import avgmdp as am
from avgmdp.criteria import ALL_KEYS, EXPECTED_KEYS, PATHWISE_KEYS
from conftest import random_mdp, random_stationary


def tree_n_stage(mdp, policy, x, n, j):
    """Brute-force expectation over all length-(n+j) trajectories."""
    total = 0.0
    level = [((x,), 1.0, 0.0)]
    for stage in range(n + j):
        nxt = []
        for hist, pr, acc in level:
            xs = hist[-1]
            dist = policy.action_dist(hist)
            for i in range(mdp.n_actions(xs)):
                if dist[i] <= 0:
                    continue
                add = mdp.cost(xs, i) if j <= stage < j + n else 0.0
                row = mdp.q_row(xs, i)
                for y in range(mdp.n_states):
                    if row[y] > 0:
                        nxt.append((hist + (i, y), pr * dist[i] * row[y], acc + add))
        level = nxt
    return sum(pr * acc for _, pr, acc in level)


class TestNStageCost:
    def test_unit_cost_counts_stages(self):
        rng = np.random.default_rng(0)
        mdp = am.FiniteMdp([[0, 1]] * 3,
                           [[list(r) for r in rng.dirichlet(np.ones(3), 2)]
                            for _ in range(3)],
                           [[1.0, 1.0]] * 3)
        pol = random_stationary(rng, mdp)
        for n, j, x in ((1, 0, 0), (7, 3, 1), (25, 0, 2)):
            assert am.n_stage_cost(mdp, pol, x, n, j) == pytest.approx(n)

    def test_absorbing_chain_linear_cost(self):
        # from k, E[c(x_m)] = k at every stage while the walk cannot
        # touch the truncation boundary
        K = 64
        mdp = am.paper_chain().truncated(K)
        pol = am.uniform_stationary(mdp)
        for k in (1, 3, 5):
            for n in (1, 10, 30):
                value = am.n_stage_cost(mdp, pol, k, n)
                assert value == pytest.approx(n * k, rel=1e-12)

    def test_markov_policy_tree_oracle(self):
        rng = np.random.default_rng(1)
        mdp = random_mdp(rng, 4, 2)
        stages = [[list(rng.dirichlet(np.ones(2))) for _ in range(4)]
                  for _ in range(5)]
        pol = am.Policy.markov(stages)
        got = am.n_stage_cost(mdp, pol, 2, 3, 2)
        want = tree_n_stage(mdp, pol, 2, 3, 2)
        assert got == pytest.approx(want, abs=1e-10)

    def test_exhaustive_small_against_tree(self):
        rng = np.random.default_rng(2)
        for n_states, n_actions in itertools.product((1, 2, 3, 4), (1, 2)):
            for _ in range(3):
                mdp = random_mdp(rng, n_states, n_actions)
                pol = random_stationary(rng, mdp)
                for horizon in range(1, 6):
                    got = am.n_stage_cost(mdp, pol, 0, horizon)
                    want = tree_n_stage(mdp, pol, 0, horizon, 0)
                    assert got == pytest.approx(want, abs=1e-9)

    def test_semi_markov_policies(self):
        rng = np.random.default_rng(3)
        mdp = random_mdp(rng, 3, 2)
        table = [[list(rng.dirichlet(np.ones(2))) for _ in range(3)]
                 for _ in range(3)]
        pol = am.Policy.semi_stationary(table)
        got = am.n_stage_cost(mdp, pol, 1, 4)
        want = tree_n_stage(mdp, pol, 1, 4, 0)
        assert got == pytest.approx(want, abs=1e-10)

    def test_history_policy(self):
        rng = np.random.default_rng(4)
        mdp = random_mdp(rng, 2, 2)

        def fn(history):
            # favor the first action after an even number of stages
            stage = (len(history) - 1) // 2
            return [0.8, 0.2] if stage % 2 == 0 else [0.3, 0.7]

        pol = am.Policy.history(fn, 8)
        got = am.n_stage_cost(mdp, pol, 0, 3, 1)
        want = tree_n_stage(mdp, pol, 0, 3, 1)
        assert got == pytest.approx(want, abs=1e-10)

    def test_horizon_overflow(self):
        mdp = am.uncontrolled_mdp([[1.0]], [0.0])
        with pytest.raises(am.HorizonOverflow):
            am.n_stage_cost(mdp, am.uniform_stationary(mdp), 0, 10**7, 1)


class TestStationary:
    def test_absorbing_zero(self):
        mdp = am.uncontrolled_mdp([[1.0]], [0.0])
        rep = am.avg_cost_stationary(mdp, am.uniform_stationary(mdp))
        assert all(rep.values[k][0] == 0.0 for k in ALL_KEYS)

    def test_two_cycle(self):
        mdp = am.uncontrolled_mdp([[0.0, 1.0], [1.0, 0.0]], [0.0, 1.0])
        rep = am.avg_cost_stationary(mdp, am.uniform_stationary(mdp))
        assert np.allclose(rep.values["J1"], 0.5)

    def test_absorbing_bounded_cost_vanishes(self):
        mdp = am.paper_chain(cost=lambda k: 0 if k == 0 else 1).truncated(50)
        rep = am.avg_cost_stationary(mdp, am.uniform_stationary(mdp))
        for key in ALL_KEYS:
            assert np.max(np.abs(rep.values[key])) <= 1e-12

    def test_all_eight_coincide(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            mdp = random_mdp(rng, 6, 3, dense=False)
            rep = am.avg_cost_stationary(mdp, random_stationary(rng, mdp))
            base = rep.values["J1"]
            for key in ALL_KEYS:
                assert np.max(np.abs(rep.values[key] - base)) <= 1e-9
            assert rep.check_chain()


class TestMarkov:
    def test_stationary_consistency(self):
        rng = np.random.default_rng(6)
        mdp = random_mdp(rng, 4, 2)
        table = [list(rng.dirichlet(np.ones(2))) for _ in range(4)]
        exact = am.avg_cost_stationary(mdp, am.Policy.stationary(table))
        as_markov = am.avg_cost_markov(mdp, am.Policy.markov([table]))
        assert np.max(np.abs(as_markov.values["J1"] - exact.values["J1"])) <= 1e-9

    def test_alternating_cost_stream(self):
        mdp = am.FiniteMdp([[0, 1]], [[[1.0], [1.0]]], [[0.0, 1.0]])
        pol = am.Policy.markov([], cycle=[[[1.0, 0.0]], [[0.0, 1.0]]])
        rep = am.avg_cost_markov(mdp, pol, horizon=2048)
        assert rep.method == "Estimated"
        assert rep.values["J1"][0] == pytest.approx(0.5, abs=1e-9)
        assert rep.values["J2"][0] == pytest.approx(0.5, abs=1e-3)
        assert rep.values["J3"][0] == pytest.approx(0.5, abs=1e-9)
        assert rep.values["J4"][0] == pytest.approx(0.5, abs=1e-9)
        assert rep.check_chain()

    def test_eventually_stationary_matches_tail(self):
        rng = np.random.default_rng(7)
        mdp = random_mdp(rng, 4, 2)  # dense rows -> unichain tail
        tail = [list(rng.dirichlet(np.ones(2))) for _ in range(4)]
        stages = [[list(rng.dirichlet(np.ones(2))) for _ in range(4)]
                  for _ in range(5)]
        pol = am.Policy.markov(stages, tail=tail)
        rep = am.avg_cost_markov(mdp, pol)
        assert rep.method == "Exact"
        oracle = am.avg_cost_stationary(mdp, am.Policy.stationary(tail))
        assert np.max(np.abs(rep.values["J1"] - oracle.values["J1"])) <= 1e-9

    def test_horizon_precondition(self):
        mdp = am.uncontrolled_mdp([[1.0]], [0.0])
        with pytest.raises(ValueError):
            am.avg_cost_markov(mdp, am.Policy.markov([], cycle=[[[1.0]], [[1.0]]]),
                               horizon=100)


class TestPathwiseExact:
    def test_unichain_equals_pi_c(self):
        rng = np.random.default_rng(8)
        mdp = random_mdp(rng, 4, 2)
        mu = random_stationary(rng, mdp)
        rep = am.pathwise_exact(mdp, mu)
        chain = am.induced_chain(mdp, mu)
        limit = am.cesaro_matrix(chain, am.decompose(chain))
        c_mu = np.array([float(np.asarray(mu.table[x]) @ mdp.cost_block(x))
                         for x in range(4)])
        assert np.max(np.abs(rep.values["Jt1"] - limit.p_star @ c_mu)) <= 1e-12

    def test_absorption_mixture(self):
        # two absorbing states at costs 0 and 1, absorption split 0.3/0.7
        p = [[0.0, 0.3, 0.7], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        mdp = am.uncontrolled_mdp(p, [0.0, 0.0, 1.0])
        rep = am.pathwise_exact(mdp, am.uniform_stationary(mdp))
        assert rep.values["Jt1"][0] == pytest.approx(0.7)

    def test_multichain_equals_expected(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            mdp = random_mdp(rng, 5, 2, dense=False)
            mu = random_stationary(rng, mdp)
            a = am.pathwise_exact(mdp, mu).values["Jt1"]
            b = am.avg_cost_stationary(mdp, mu).values["J1"]
            assert np.max(np.abs(a - b)) <= 1e-10


class TestSimulate:
    def test_constant_cost_exact(self):
        mdp = am.uncontrolled_mdp([[0.4, 0.6], [0.5, 0.5]], [7.0, 7.0])
        res = am.simulate_pathwise(mdp, am.uniform_stationary(mdp), 0,
                                   n_traj=8, horizon=500, seed=1)
        assert res.mean["Jt1"] == 7.0
        assert res.stderr["Jt1"] == 0.0
        assert res.mean["Jt3"] == 7.0

    def test_matches_exact_within_three_stderr(self):
        rng = np.random.default_rng(10)
        mdp = random_mdp(rng, 5, 2)
        mu = random_stationary(rng, mdp)
        exact = am.pathwise_exact(mdp, mu).values["Jt1"][0]
        res = am.simulate_pathwise(mdp, mu, 0, n_traj=60, horizon=20000, seed=3)
        assert abs(res.mean["Jt1"] - exact) <= 3 * max(res.stderr["Jt1"], 1e-6)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(11)
        mdp = random_mdp(rng, 4, 2)
        mu = random_stationary(rng, mdp)
        r1 = am.simulate_pathwise(mdp, mu, 0, 10, 3000, seed=42)
        r2 = am.simulate_pathwise(mdp, mu, 0, 10, 3000, seed=42)
        assert r1.per_trajectory == r2.per_trajectory
        r3 = am.simulate_pathwise(mdp, mu, 0, 10, 3000, seed=43)
        assert r1.per_trajectory != r3.per_trajectory

    def test_countable_absorbing_estimate(self):
        chain = am.paper_chain(cost=lambda k: 0 if k == 0 else 1)
        res = am.simulate_pathwise(chain.to_countable(), None, 5,
                                   n_traj=100, horizon=30000, seed=7)
        assert abs(res.mean["Jt1"]) <= 3 * max(res.stderr["Jt1"], 1e-5)


class TestReportCsv:
    def test_csv_shape_and_determinism(self):
        rng = np.random.default_rng(12)
        mdp = random_mdp(rng, 3, 2)
        rep = am.avg_cost_stationary(mdp, random_stationary(rng, mdp))
        s1 = rep.to_csv_string()
        s2 = rep.to_csv_string()
        assert s1 == s2
        lines = s1.splitlines()
        assert lines[0] == "state," + ",".join(ALL_KEYS) + ",method,est_error"
        assert len(lines) == 4
