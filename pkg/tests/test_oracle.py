import math

import numpy as np
import pytest

from helpers import GUESS2, dirichlet, guess_instance, random_multi, random_single
from infoadvert import (
    DecisionProblem,
    MultiTypeInstance,
    ResourceCapError,
    SingleTypeInstance,
    brute_force_multi,
    grid_concave_closure,
    simplex_grid,
    solve_concave_closure,
    solve_grid_lp,
)
from infoadvert.oracle import grid_size


class TestSimplexGrid:
    @pytest.mark.parametrize("n,m", [(1, 3), (2, 5), (3, 4), (4, 6)])
    def test_count_and_sums(self, n, m):
        g = simplex_grid(n, m)
        assert len(g) == math.comb(m + n - 1, n - 1) == grid_size(n, m)
        np.testing.assert_allclose(g.sum(axis=1), 1.0)
        assert g.min() >= 0.0
        assert len({tuple(r) for r in np.round(g * m).astype(int)}) == len(g)

    def test_lexicographic_order(self):
        g = simplex_grid(3, 3)
        assert [tuple(r) for r in g] == sorted(tuple(r) for r in g)

    def test_cap(self):
        with pytest.raises(ResourceCapError, match="cap"):
            simplex_grid(5, 200)


class TestGridClosure:
    def test_guess_instance_exact(self):
        assert grid_concave_closure(guess_instance(), 10) == pytest.approx(0.3125, abs=1e-9)

    def test_common_prior_on_grid(self):
        inst = SingleTypeInstance(DecisionProblem(np.eye(3)), [0.2, 0.3, 0.5], [0.2, 0.3, 0.5])
        assert grid_concave_closure(inst, 10) == pytest.approx(inst.C(inst.theta), abs=1e-9)

    def test_vertices_only(self):
        inst = random_single(np.random.default_rng(0), 3, 3)
        assert grid_concave_closure(inst, 1) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(6))
    def test_lower_bound_and_nesting(self, seed):
        inst = random_single(np.random.default_rng(seed), 3, 3)
        top = solve_concave_closure(inst).revenue
        vals = [grid_concave_closure(inst, m) for m in (6, 12, 24)]
        for v in vals:
            assert v <= top + 1e-6
        assert vals[0] <= vals[1] + 1e-9 <= vals[2] + 2e-9


class TestBruteForce:
    def test_guess_wrap(self):
        inst = MultiTypeInstance.from_single(guess_instance())
        assert brute_force_multi(inst, 2, 20) == pytest.approx(0.3125, abs=1e-9)

    def test_constant_utility(self):
        inst = MultiTypeInstance(DecisionProblem(np.full((2, 2), 0.5)), [[0.3, 0.7], [0.6, 0.4]], np.full((2, 2), 0.25))
        assert brute_force_multi(inst, 2, 10) == 0.0

    def test_uninformative_by_hand(self):
        types = np.array([[0.3, 0.7], [0.6, 0.4]])
        joint = np.array([[0.1, 0.3], [0.4, 0.2]])
        inst = MultiTypeInstance(DecisionProblem(GUESS2), types, joint)
        mass = joint.sum(axis=0)
        costs = types.min(axis=1)
        want = max(p * mass[costs >= p - 1e-12].sum() for p in costs)
        assert brute_force_multi(inst, 1, 10) == pytest.approx(want, abs=1e-12)

    @pytest.mark.parametrize("kwargs", [dict(n_signals=3, g=10), dict(n_signals=2, g=51)])
    def test_limits(self, kwargs):
        inst = MultiTypeInstance.from_single(guess_instance())
        with pytest.raises(ResourceCapError):
            brute_force_multi(inst, **kwargs)

    def test_limits_states_and_types(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ResourceCapError):
            brute_force_multi(random_multi(rng, 3, 2, 2), 2, 10)
        with pytest.raises(ResourceCapError):
            brute_force_multi(random_multi(rng, 2, 2, 5), 2, 10)

    @pytest.mark.parametrize("seed", range(5))
    def test_bracket_with_lp(self, seed):
        inst = random_multi(np.random.default_rng(seed), 2, 3, 3)
        eps = 1 / 64
        brute = brute_force_multi(inst, 2, 20)
        res = solve_grid_lp(inst, eps)
        assert brute <= res.realized_revenue + eps + 5e-2


def test_grid_respects_symmetry_pruning():
    """Pruned enumeration gives the same maximum as the full product grid."""
    rng = np.random.default_rng(3)
    inst = MultiTypeInstance(DecisionProblem(rng.random((2, 3))), [dirichlet(rng, 2, 0.1), dirichlet(rng, 2, 0.1)], np.full((2, 2), 0.25))
    from infoadvert.oracle import _best_price_revenue

    g = 12
    t = np.arange(g + 1) / g
    a, b = [x.ravel() for x in np.meshgrid(t, t, indexing="ij")]
    first = np.column_stack([a, b])
    full = (_best_price_revenue(inst, first) + _best_price_revenue(inst, 1 - first)).max()
    assert brute_force_multi(inst, 2, g) == pytest.approx(full, abs=1e-12)
