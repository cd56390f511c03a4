import numpy as np
import pytest

import avgmdp as am
from conftest import random_mdp, random_stationary


def random_chain(rng, n):
    return am.MarkovChain(rng.dirichlet(np.ones(n), size=n))


class TestInducedChain:
    def test_deterministic_on_deterministic(self):
        mdp = am.FiniteMdp([[0], [0]], [[[0, 1]], [[1, 0]]], [[0], [0]])
        chain = am.induced_chain(mdp, am.uniform_stationary(mdp))
        assert np.array_equal(chain.p, [[0, 1], [1, 0]])

    def test_uniform_mixture(self):
        mdp = am.FiniteMdp([[0, 1]], [[[1.0], [1.0]]], [[0, 1]])
        mdp2 = am.FiniteMdp([[0, 1], [0, 1]],
                            [[[1, 0], [0, 1]], [[1, 0], [0, 1]]],
                            [[0, 0], [0, 0]])
        chain = am.induced_chain(mdp2, am.uniform_stationary(mdp2))
        assert np.allclose(chain.p, 0.5)

    def test_absorbing_chain_rows(self):
        mdp = am.paper_chain().truncated(8)
        chain = am.induced_chain(mdp, am.uniform_stationary(mdp))
        for k in range(1, 8):
            assert chain.p[k, 0] == pytest.approx(1.0 / (k + 1))
            assert chain.p[k, k + 1] == pytest.approx(k / (k + 1))

    def test_policy_support_checked(self):
        mdp = am.FiniteMdp([[0, 1]], [[[1.0], [1.0]]], [[0, 1]])
        markov = am.Policy.markov([[[1.0, 0.0]]])
        with pytest.raises(am.PolicySupportError):
            am.induced_chain(mdp, markov)


class TestDecompose:
    def test_identity_three_singletons(self):
        d = am.decompose(am.MarkovChain(np.eye(3)))
        assert d.recurrent_classes == [[0], [1], [2]]
        assert d.transient == []
        assert d.periods == [1, 1, 1]

    def test_absorbing_truncation(self):
        mdp = am.paper_chain().truncated(10)
        chain = am.induced_chain(mdp, am.uniform_stationary(mdp))
        d = am.decompose(chain)
        assert d.recurrent_classes == [[0]]
        assert d.transient == list(range(1, 11))

    def test_two_cycle_period(self):
        d = am.decompose(am.MarkovChain([[0, 1], [1, 0]]))
        assert d.recurrent_classes == [[0, 1]]
        assert d.periods == [2]

    def test_closedness_separates_transients(self):
        p = [[0.5, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        d = am.decompose(am.MarkovChain(p))
        assert d.recurrent_classes == [[1], [2]]
        assert d.transient == [0]


class TestCesaro:
    def test_irreducible_two_state(self):
        p = np.array([[0.5, 0.5], [0.25, 0.75]])
        limit = am.cesaro_matrix(am.MarkovChain(p), am.decompose(am.MarkovChain(p)))
        # oracle: solve pi P = pi, sum(pi) = 1 directly
        a = np.vstack([(p.T - np.eye(2))[:1], np.ones(2)])
        pi = np.linalg.solve(a, [0.0, 1.0])
        assert np.allclose(limit.p_star, np.tile(pi, (2, 1)), atol=1e-12)

    def test_two_cycle_average(self):
        p = np.array([[0.0, 1.0], [1.0, 0.0]])
        limit = am.cesaro_matrix(am.MarkovChain(p), am.decompose(am.MarkovChain(p)))
        assert np.allclose(limit.p_star, 0.5)

    def test_power_average_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(5):
            chain = random_chain(rng, 6)
            limit = am.cesaro_matrix(chain, am.decompose(chain))
            n_pow = 10**5
            acc = np.zeros((6, 6))
            pk = np.eye(6)
            for _ in range(n_pow):
                acc += pk
                pk = pk @ chain.p
            assert np.max(np.abs(acc / n_pow - limit.p_star)) <= 1e-4

    def test_projection_identities(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            mdp = random_mdp(rng, 5, 2, dense=False)
            chain = am.induced_chain(mdp, random_stationary(rng, mdp))
            limit = am.cesaro_matrix(chain, am.decompose(chain))
            ps = limit.p_star
            assert np.max(np.abs(ps @ chain.p - ps)) <= 1e-10
            assert np.max(np.abs(chain.p @ ps - ps)) <= 1e-10
            assert np.max(np.abs(ps @ ps - ps)) <= 1e-10
            assert np.max(np.abs(ps.sum(axis=1) - 1.0)) <= 1e-10

    def test_per_class_stationary(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            mdp = random_mdp(rng, 6, 2, dense=False)
            chain = am.induced_chain(mdp, random_stationary(rng, mdp))
            decomp = am.decompose(chain)
            limit = am.cesaro_matrix(chain, decomp)
            for members, pi in zip(decomp.recurrent_classes,
                                   limit.per_class_stationary):
                idx = np.asarray(members)
                sub = chain.p[idx[:, None], idx]
                assert np.max(np.abs(pi @ sub - pi)) <= 1e-10
                assert np.all(pi >= 0)
                assert np.sum(pi) == pytest.approx(1.0, abs=1e-12)


class TestHitting:
    def test_all_states_target(self):
        chain = am.MarkovChain([[0.3, 0.7], [0.5, 0.5]])
        assert np.array_equal(am.hitting_probability(chain, [0, 1]), [1.0, 1.0])

    def test_absorbing_truncation_certain(self):
        mdp = am.paper_chain().truncated(30)
        chain = am.induced_chain(mdp, am.uniform_stationary(mdp))
        h = am.hitting_probability(chain, [0])
        assert np.allclose(h, 1.0, atol=1e-12)

    def test_unreachable_zero(self):
        p = [[1.0, 0.0, 0.0], [0.0, 0.5, 0.5], [0.0, 0.5, 0.5]]
        h = am.hitting_probability(am.MarkovChain(p), [0])
        assert h[0] == 1.0
        assert h[1] == 0.0 and h[2] == 0.0

    def test_minimal_fixed_point(self):
        # value iteration from zero converges to the same vector
        rng = np.random.default_rng(13)
        for _ in range(5):
            mdp = random_mdp(rng, 5, 2, dense=False)
            chain = am.induced_chain(mdp, random_stationary(rng, mdp))
            h = am.hitting_probability(chain, [0])
            v = np.zeros(5)
            for _ in range(20000):
                new = chain.p @ v
                new[0] = 1.0
                if np.max(np.abs(new - v)) < 1e-14:
                    break
                v = new
            assert np.max(np.abs(v - h)) <= 1e-10

    def test_empty_target(self):
        chain = am.MarkovChain([[1.0]])
        with pytest.raises(am.EmptyTargetSet):
            am.hitting_probability(chain, [])


class TestExpectedHittingTime:
    def test_target_state_zero(self):
        chain = am.MarkovChain([[0.5, 0.5], [0.0, 1.0]])
        m = am.expected_hitting_time(chain, [1])
        assert m[1] == 0.0

    def test_geometric_escape(self):
        for p_esc in (0.1, 0.35, 0.8):
            chain = am.MarkovChain([[1 - p_esc, p_esc], [0.0, 1.0]])
            m = am.expected_hitting_time(chain, [1])
            assert m[0] == pytest.approx(1.0 / p_esc)

    def test_infinite_sentinel(self):
        p = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.4, 0.3, 0.3]]
        m = am.expected_hitting_time(am.MarkovChain(p), [0])
        assert m[1] == np.inf
        assert np.isfinite(m[0])

    def test_truncation_values_grow(self):
        values = []
        for K in (5, 10, 20, 40):
            mdp = am.paper_chain().truncated(K)
            chain = am.induced_chain(mdp, am.uniform_stationary(mdp))
            values.append(am.expected_hitting_time(chain, [0])[5 if K >= 5 else K])
        assert all(a < b for a, b in zip(values, values[1:]))


class TestWindowConvergence:
    def test_window_averages_reach_limit(self):
        # (1/n_win) sum_{k=j}^{j+n_win-1} (P^k c)(x) ~ (P* c)(x) for all
        # offsets j <= 10 n
        rng = np.random.default_rng(14)
        n, n_win = 6, 10**4
        for _ in range(3):
            chain = random_chain(rng, n)
            c = rng.uniform(0, 1, n)
            limit = am.cesaro_matrix(chain, am.decompose(chain))
            target = limit.p_star @ c
            j_max = 10 * n
            vecs = np.empty((j_max + n_win, n))
            v = c.copy()
            for k in range(j_max + n_win):
                vecs[k] = v
                v = chain.p @ v
            prefix = np.vstack([np.zeros(n), np.cumsum(vecs, axis=0)])
            for j in range(j_max + 1):
                window = (prefix[j + n_win] - prefix[j]) / n_win
                assert np.max(np.abs(window - target)) <= 1e-3


class TestSingularSolve:
    def test_ill_conditioned_raises(self):
        eps = 1e-10
        p = [[0.0, 1.0, 0.0], [1.0 - eps, 0.0, eps], [0.0, 0.0, 1.0]]
        chain = am.MarkovChain(p)
        with pytest.raises(am.SingularSolve):
            am.cesaro_matrix(chain, am.decompose(chain))
