import numpy as np
import pytest

from helpers import GUESS2, guess_instance, guess_rule, random_multi, random_rule
from infoadvert import (
    AdvertisingRule,
    DecisionProblem,
    MultiTypeInstance,
    ResourceCapError,
    ValidationError,
    cost_of_uncertainty,
    enumerate_lambda_candidates,
    evaluate_rule_multi,
    merge_duplicate_signals,
    realized_purchase_set,
    solve_concave_closure,
    solve_grid_lp,
)
from infoadvert.multi_solver import LambdaCandidate, price_grid, reoptimize_prices


def two_type(theta_firsts=(0.3, 0.7)):
    types = np.array([[t, 1 - t] for t in theta_firsts])
    joint = np.full((2, len(types)), 1 / (2 * len(types)))
    return MultiTypeInstance(DecisionProblem(GUESS2), types, joint)


class TestPriceGrid:
    def test_endpoints(self):
        g = price_grid(1 / 4)
        np.testing.assert_allclose(g, [0, 0.25, 0.5, 0.75, 1.0])

    def test_non_divisor_appends_one(self):
        g = price_grid(0.3)
        assert g[0] == 0.0 and g[-1] == 1.0
        assert np.all(np.diff(g) > 0)

    def test_bad_epsilon(self):
        with pytest.raises(ValidationError):
            price_grid(0.0)


class TestCandidates:
    def test_subsets_two_types(self):
        c = enumerate_lambda_candidates(two_type(), "subsets")
        assert sorted(x.sorted() for x in c) == [[0], [0, 1], [1]]

    def test_intervals_three_types(self):
        inst = two_type((0.8, 0.2, 0.5))
        c = enumerate_lambda_candidates(inst, "intervals")
        assert len(c) == 6
        # contiguous in theta_0 order: 0.2 (type 1), 0.5 (type 2), 0.8 (type 0)
        assert frozenset({1, 0}) not in {x.members for x in c}

    @pytest.mark.parametrize("mode", ["subsets", "intervals"])
    def test_single_type(self, mode):
        inst = MultiTypeInstance.from_single(guess_instance())
        assert [x.sorted() for x in enumerate_lambda_candidates(inst, mode)] == [[0]]

    def test_auto_mode(self):
        rng = np.random.default_rng(0)
        assert len(enumerate_lambda_candidates(random_multi(rng, 2, 2, 4))) == 10
        assert len(enumerate_lambda_candidates(random_multi(rng, 3, 2, 3))) == 7

    def test_subset_cap(self):
        rng = np.random.default_rng(1)
        with pytest.raises(ResourceCapError):
            enumerate_lambda_candidates(random_multi(rng, 3, 2, 17))

    def test_intervals_need_binary(self):
        with pytest.raises(ValidationError):
            enumerate_lambda_candidates(random_multi(np.random.default_rng(2), 3, 2, 2), "intervals")

    def test_empty_set_rejected(self):
        with pytest.raises(ValidationError):
            LambdaCandidate(frozenset())


class TestGridLP:
    def test_guess_wrap(self):
        res = solve_grid_lp(MultiTypeInstance.from_single(guess_instance()), 1 / 16, mode="subsets")
        assert res.lp_value == pytest.approx(0.3125, abs=1e-7)
        assert res.realized_revenue >= res.lp_value - 1e-7

    def test_constant_utility(self):
        inst = MultiTypeInstance(DecisionProblem(np.full((2, 2), 0.5)), [[0.3, 0.7], [0.6, 0.4]], np.full((2, 2), 0.25))
        assert solve_grid_lp(inst).lp_value == pytest.approx(0.0, abs=1e-9)

    def test_default_epsilon(self):
        res = solve_grid_lp(two_type())
        assert res.epsilon == 1 / 64

    @pytest.mark.parametrize("seed", range(6))
    def test_invariants(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 4))
        inst = random_multi(rng, n, int(rng.integers(2, 4)), int(rng.integers(1, 4)))
        res = solve_grid_lp(inst, 1 / 16)
        rule = res.rule
        np.testing.assert_allclose(rule.pi.sum(axis=0), 1.0, atol=1e-9)
        assert rule.pi.min() >= 0.0
        assert res.lp_value <= res.realized_revenue + 1e-7
        for s, lam in enumerate(res.declared):
            for k in lam.members:
                theta = inst.types[k]
                phi = theta @ rule.pi[s]
                if phi > 1e-9:
                    eta = theta * rule.pi[s] / phi
                    assert cost_of_uncertainty(inst.problem, eta) >= rule.prices[s] - 1e-7

    @pytest.mark.parametrize("seed", range(5))
    def test_halving_epsilon(self, seed):
        inst = random_multi(np.random.default_rng(10 + seed), 2, 3, 3)
        values = [solve_grid_lp(inst, eps).lp_value for eps in (1 / 8, 1 / 16, 1 / 32)]
        assert values[0] <= values[1] + 1e-9 <= values[2] + 2e-9

    @pytest.mark.parametrize("seed", range(5))
    def test_single_type_consistency(self, seed):
        from helpers import random_single

        single = random_single(np.random.default_rng(20 + seed), 3, 3)
        eps = 1 / 32
        lp = solve_grid_lp(MultiTypeInstance.from_single(single), eps).lp_value
        assert lp >= solve_concave_closure(single).revenue - eps - 1e-7

    def test_reoptimize_never_hurts(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            inst = random_multi(rng, 2, 3, 3)
            base = solve_grid_lp(inst, 1 / 8)
            better = solve_grid_lp(inst, 1 / 8, reoptimize=True)
            assert better.realized_revenue >= base.realized_revenue - 1e-9
            assert better.lp_value == pytest.approx(base.lp_value, abs=1e-9)


class TestPurchaseSets:
    def test_guess_instance_signal_s(self):
        inst = MultiTypeInstance.from_single(guess_instance())
        assert realized_purchase_set(inst, guess_rule(), 0).sorted() == [0]

    def test_price_zero(self):
        inst = two_type((0.2, 0.5, 0.8))
        rule = AdvertisingRule([[0.4, 0.9], [0.6, 0.1]], [0.0, 0.0])
        assert realized_purchase_set(inst, rule, 0).sorted() == [0, 1, 2]

    def test_price_above_every_cost(self):
        inst = two_type()
        rule = AdvertisingRule([[1.0, 1.0]], [1.0])
        assert realized_purchase_set(inst, rule, 0) is None


class TestMerge:
    def test_identical_signals(self):
        inst = two_type()
        rule = AdvertisingRule([[0.2, 0.4], [0.2, 0.4], [0.6, 0.2]], [0.3, 0.3, 0.1])
        merged = merge_duplicate_signals(inst, rule)
        assert merged.n_signals < rule.n_signals
        assert evaluate_rule_multi(inst, merged) == pytest.approx(evaluate_rule_multi(inst, rule), abs=1e-12)

    def test_distinct_columns_same_key(self):
        inst = two_type()
        rule = AdvertisingRule([[0.3, 0.25], [0.2, 0.3], [0.5, 0.45]], [0.2, 0.2, 0.0])
        keys = [realized_purchase_set(inst, rule, s) for s in range(2)]
        assert keys[0] == keys[1]
        merged = merge_duplicate_signals(inst, rule)
        assert merged.n_signals == 2
        assert evaluate_rule_multi(inst, merged) >= evaluate_rule_multi(inst, rule) - 1e-9

    def test_all_distinct_unchanged(self):
        inst = two_type()
        rule = AdvertisingRule([[0.8, 0.1], [0.2, 0.9]], [0.1, 0.2])
        assert merge_duplicate_signals(inst, rule) is rule

    def test_random_rules(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            inst = random_multi(rng, 2, 3, 3)
            rule = random_rule(rng, 2, 6)
            rule = AdvertisingRule(rule.pi, np.round(rule.prices * 4) / 8)
            merged = merge_duplicate_signals(inst, rule)
            assert evaluate_rule_multi(inst, merged) >= evaluate_rule_multi(inst, rule) - 1e-9


def test_reoptimize_prices_is_pointwise_best():
    inst = two_type((0.2, 0.6))
    rule = AdvertisingRule([[0.5, 0.5], [0.5, 0.5]], [0.0, 0.0])
    out = reoptimize_prices(inst, rule)
    assert evaluate_rule_multi(inst, out) >= evaluate_rule_multi(inst, rule)
