import json

import numpy as np
import pytest

import avgmdp as am
from conftest import random_mdp


def minimal_doc():
    return {
        "n_states": 1,
        "actions": [["a"]],
        "q": {"0,a": [1]},
        "c": {"0,a": 0},
    }


class TestValidateMdp:
    def test_degenerate_absorbing(self):
        mdp = am.validate_mdp(minimal_doc())
        assert mdp.n_states == 1
        assert mdp.cost(0, 0) == 0.0
        assert mdp.q_row(0, 0)[0] == 1.0

    def test_row_sum_rejected(self):
        doc = minimal_doc()
        doc["q"]["0,a"] = [0.9]
        with pytest.raises(am.RowSumError):
            am.validate_mdp(doc)

    def test_negative_probability_rejected(self):
        doc = minimal_doc()
        doc["q"]["0,a"] = [1.5]
        doc["actions"] = [["a"]]
        doc["q"]["0,a"] = [-0.5]
        with pytest.raises(am.RowSumError):
            am.validate_mdp(doc)

    def test_empty_action_set(self):
        doc = minimal_doc()
        doc["actions"] = [[]]
        with pytest.raises(am.EmptyActionSet):
            am.validate_mdp(doc)

    def test_nonfinite_cost(self):
        doc = minimal_doc()
        doc["c"]["0,a"] = float("inf")
        with pytest.raises(am.NonFiniteCost):
            am.validate_mdp(doc)

    def test_unknown_keys_rejected(self):
        doc = minimal_doc()
        doc["extra"] = 1
        with pytest.raises(am.DimensionMismatch):
            am.validate_mdp(doc)

    def test_stray_pairs_rejected(self):
        doc = minimal_doc()
        doc["q"]["0,zz"] = [1]
        with pytest.raises(am.DimensionMismatch):
            am.validate_mdp(doc)

    def test_truncated_absorbing_chain_is_valid(self):
        mdp = am.paper_chain().truncated(10)
        assert mdp.n_states == 11
        # row-sum oracle: the serialized document re-validates
        again = am.validate_mdp(mdp.to_document())
        assert again == mdp


class TestRoundTrip:
    def test_rational_inputs_bit_exact(self):
        doc = {
            "n_states": 2,
            "actions": [["u", "v"], ["w"]],
            "q": {"0,u": ["1/3", "2/3"], "0,v": [0, 1], "1,w": ["1/7", "6/7"]},
            "c": {"0,u": "1/9", "0,v": 2, "1,w": "-3/2"},
        }
        mdp = am.validate_mdp(doc)
        assert mdp.exact
        dumped = mdp.to_document()
        assert am.validate_mdp(dumped) == mdp
        # survives a JSON round trip too
        assert am.validate_mdp(json.loads(json.dumps(dumped))) == mdp

    def test_float_inputs_round_trip(self):
        rng = np.random.default_rng(0)
        mdp = random_mdp(rng, 4, 2)
        assert not mdp.exact
        assert am.validate_mdp(mdp.to_document()) == mdp


class TestDrift:
    def test_zero_case(self):
        mdp = am.uncontrolled_mdp([[1.0]], [0.0])
        rep = am.check_drift(mdp, am.DriftCertificate([0.0], 0.0, 0.0))
        assert rep.verdict
        assert rep.bound == 0.0

    def test_linear_weight_fails_on_absorbing_chain(self):
        # w(k) = k gives E[w(next) | k] = k, which beats beta*k + b at
        # large k for any beta < 1
        K = 12
        mdp = am.paper_chain().truncated(K)
        cert = am.DriftCertificate(w=np.arange(K + 1, dtype=float), beta=0.5, b=2.0)
        rep = am.check_drift(mdp, cert)
        # independent arithmetic on both sides of the inequality
        for k in range(1, K):
            lhs = (1.0 - 1.0 / (k + 1)) * (k + 1)
            assert lhs == pytest.approx(k)
            assert rep.drift_slack[k] == pytest.approx(0.5 * k + 2.0 - lhs)
        assert not rep.verdict

    def test_bounded_cost_constant_weight(self):
        rng = np.random.default_rng(1)
        mdp = random_mdp(rng, 5, 2)
        cmax = max(float(np.max(np.abs(mdp.cost_block(x))))
                   for x in range(5))
        cert = am.DriftCertificate([cmax] * 5, 0.0, cmax)
        rep = am.check_drift(mdp, cert)
        assert rep.verdict
        assert rep.bound == pytest.approx(cmax)

    def test_scaling_preserves_verdict(self):
        rng = np.random.default_rng(2)
        mdp = random_mdp(rng, 4, 2)
        cmax = max(float(np.max(np.abs(mdp.cost_block(x)))) for x in range(4))
        base = am.DriftCertificate([cmax] * 4, 0.0, cmax)
        assert am.check_drift(mdp, base).verdict
        for t in (1.0, 2.0, 17.5):
            scaled = am.DriftCertificate([t * cmax] * 4, 0.0, t * cmax)
            assert am.check_drift(mdp, scaled).verdict

    def test_gain_below_certified_bound(self):
        # cross-module: a passing certificate bounds the optimal gain
        rng = np.random.default_rng(3)
        for _ in range(10):
            mdp = random_mdp(rng, 4, 2)
            cmax = max(float(np.max(np.abs(mdp.cost_block(x)))) for x in range(4))
            rep = am.check_drift(mdp, am.DriftCertificate([cmax] * 4, 0.0, cmax))
            assert rep.verdict
            g = am.optimal_gain_pi(mdp).g
            assert np.all(g <= rep.bound + 1e-9)

    def test_dimension_mismatch(self):
        mdp = am.uncontrolled_mdp([[1.0]], [0.0])
        with pytest.raises(am.DimensionMismatch):
            am.check_drift(mdp, am.DriftCertificate([0.0, 0.0], 0.0, 0.0))


class TestClassify:
    def test_sentinel_patterns(self):
        from avgmdp.model import AC_BOTH, AC_MINUS, AC_PLUS
        mdp = am.uncontrolled_mdp([[1.0]], [0.0])
        assert am.classify_cost_model(mdp) == AC_BOTH
        assert am.classify_cost_model(mdp, costs=[[np.inf]]) == AC_PLUS
        assert am.classify_cost_model(mdp, costs=[[-np.inf]]) == AC_MINUS
        with pytest.raises(am.BothSignsUnbounded):
            am.classify_cost_model(mdp, costs=[[np.inf, -np.inf]])


class TestTruncate:
    def test_boundary_self_loop(self):
        mdp = am.paper_chain().truncated(5)
        row = mdp.q_row(5, 0)
        assert row[0] == pytest.approx(1.0 / 6.0)
        assert row[5] == pytest.approx(5.0 / 6.0)
        assert mdp.exact

    def test_costs_from_original(self):
        mdp = am.paper_chain(cost=lambda k: 3 * k).truncated(4)
        assert [mdp.cost(k, 0) for k in range(5)] == [0, 3, 6, 9, 12]


class TestPolicy:
    def test_support_errors(self):
        rng = np.random.default_rng(4)
        mdp = random_mdp(rng, 3, 2)
        with pytest.raises(am.PolicySupportError):
            am.Policy.stationary([[1.0], [1.0, 0.0], [0.5, 0.5]], mdp)
        with pytest.raises(am.PolicySupportError):
            am.Policy.stationary([[0.7, 0.7], [1, 0], [1, 0]], mdp)

    def test_markov_tail_defaults_to_last_stage(self):
        p = am.Policy.markov([[[1.0, 0.0]], [[0.0, 1.0]]])
        assert p.eventually_stationary
        assert p.markov_kernel(10) == [[0.0, 1.0]]

    def test_cycle_kernels(self):
        p = am.Policy.markov([], cycle=[[[1.0, 0.0]], [[0.0, 1.0]]])
        assert not p.eventually_stationary
        assert p.markov_kernel(0) == [[1.0, 0.0]]
        assert p.markov_kernel(3) == [[0.0, 1.0]]
