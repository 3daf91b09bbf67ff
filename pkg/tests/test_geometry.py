import math

import numpy as np
import pytest
from scipy.optimize import nnls
from scipy.spatial import ConvexHull, QhullError

from helpers import guess_instance, random_problem, random_single
from infoadvert import DecisionProblem, ResourceCapError, SingleTypeInstance, all_vertices, build_segments, enumerate_vertices
from infoadvert.geometry import basis_count, in_polytope
from infoadvert.oracle import simplex_grid


def as_set(points):
    return sorted(tuple(np.round(p, 9)) for p in points)


class TestEnumerateVertices:
    def test_two_state_guess(self):
        assert as_set(enumerate_vertices(DecisionProblem(np.eye(2)), 0)) == as_set([[1, 0], [0.5, 0.5]])

    def test_three_state_guess(self):
        got = enumerate_vertices(DecisionProblem(np.eye(3)), 0)
        want = [[1, 0, 0], [0.5, 0.5, 0], [0.5, 0, 0.5], [1 / 3, 1 / 3, 1 / 3]]
        assert as_set(got) == as_set(want)

    def test_single_action(self):
        got = enumerate_vertices(DecisionProblem(np.array([[0.3], [0.9], [0.1]])), 0)
        assert as_set(got) == as_set(np.eye(3))

    def test_duplicate_action_shares_polytope(self):
        u = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        p = DecisionProblem(u)
        assert as_set(enumerate_vertices(p, 0)) == as_set(enumerate_vertices(p, 1))

    def test_strictly_dominated_action_is_empty(self):
        u = np.array([[1.0, 0.2], [0.9, 0.1]])
        assert enumerate_vertices(DecisionProblem(u), 1) == []

    def test_cap(self):
        p = random_problem(np.random.default_rng(0), 6, 4)
        with pytest.raises(ResourceCapError, match="cap"):
            enumerate_vertices(p, 0, cap=basis_count(p) - 1)


class TestAllVertices:
    def test_guess_game_tags(self):
        vs = all_vertices(DecisionProblem(np.eye(2)))
        assert len(vs) == 3
        tags = {tuple(np.round(v.point, 9)): v.actions for v in vs.vertices}
        assert tags[(0.5, 0.5)] == frozenset({0, 1})
        assert tags[(1.0, 0.0)] == frozenset({0})

    def test_single_action(self):
        vs = all_vertices(DecisionProblem(np.full((4, 1), 0.5)))
        assert as_set(vs.points) == as_set(np.eye(4))

    @pytest.mark.parametrize("seed", range(10))
    def test_properties(self, seed):
        rng = np.random.default_rng(seed)
        n, m = int(rng.integers(2, 6)), int(rng.integers(1, 5))
        p = random_problem(rng, n, m)
        vs = all_vertices(p)
        assert len(vs) <= m * basis_count(p)
        pts = vs.points
        for v in vs.vertices:
            assert v.nnz <= m
            costs = p.action_costs(v.point)
            for a in v.actions:
                assert np.all(costs[a] <= costs + 1e-9)
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                assert np.max(np.abs(pts[i] - pts[j])) > 1e-9

    def test_degenerate_inputs_counted(self):
        # equal regret columns make basis systems singular
        u = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.5]])
        vs = all_vertices(DecisionProblem(u))
        assert vs.diagnostics["singular"] > 0
        assert len(vs) > 0


def _hull_area(points2d):
    try:
        return ConvexHull(points2d).volume
    except (QhullError, ValueError):
        return 0.0


@pytest.mark.parametrize("seed", range(12))
def test_vertices_match_grid_hull(seed):
    """Vertices of P_a against the hull of a fine simplex grid filtered by P_a's constraints."""
    rng = np.random.default_rng(100 + seed)
    m_actions = int(rng.integers(1, 4))
    p = random_problem(rng, 3, m_actions)
    res = 90
    grid = simplex_grid(3, res)
    costs = p.action_costs(grid)
    for a in range(m_actions):
        verts = np.array(enumerate_vertices(p, a)).reshape(-1, 3)
        inside = grid[costs[:, a] <= costs.min(axis=1) + 1e-12]
        if len(verts) == 0:
            assert len(inside) <= 3  # at most a sliver below grid resolution
            continue
        for v in verts:
            assert in_polytope(p, v, a)
        # every grid point of P_a is a convex combination of the vertices
        M = np.vstack([verts.T, np.ones(len(verts))])
        for x in inside:
            _, resid = nnls(M, np.append(x, 1.0))
            assert resid <= 1e-8
        # and the grid hull converges to the vertex hull
        gap = _hull_area(verts[:, :2]) - _hull_area(inside[:, :2]) if len(inside) >= 3 else 0.0
        assert -1e-9 <= gap <= 4.0 / res


class TestSegments:
    def test_guess_instance_pairs(self):
        inst = guess_instance()
        seg = build_segments(inst, all_vertices(inst.problem))
        pts = seg.vertex_set.points
        idx = {tuple(np.round(p, 9)): i for i, p in enumerate(pts)}
        a, b, c = idx[(1.0, 0.0)], idx[(0.5, 0.5)], idx[(0.0, 1.0)]
        stored = {frozenset((q.i, q.j)) for q in seg.strict_pairs()}
        assert frozenset((a, b)) not in stored
        assert frozenset((c, b)) in stored
        k = (seg.R[a] - seg.R[b]) * (seg.C[a] - seg.C[b])
        assert k == pytest.approx(0.46875)

    def test_singletons_present(self):
        inst = guess_instance()
        seg = build_segments(inst, all_vertices(inst.problem))
        assert len(seg.singletons()) == len(seg.vertex_set)
        assert all(q.slope_product == 0.0 for q in seg.singletons())

    def test_single_action_keeps_all_pairs(self):
        p = DecisionProblem(np.full((3, 1), 0.2))
        inst = SingleTypeInstance(p, [0.2, 0.3, 0.5], [0.4, 0.4, 0.2])
        seg = build_segments(inst, all_vertices(p))
        assert len(seg.strict_pairs()) == math.comb(3, 2)

    @pytest.mark.parametrize("seed", range(8))
    def test_pair_properties(self, seed):
        inst = random_single(np.random.default_rng(seed), 3, 3)
        seg = build_segments(inst, all_vertices(inst.problem))
        for q in seg.pairs:
            assert q.slope_product <= 1e-9
            for v in (q.i, q.j):
                assert in_polytope(inst.problem, seg.vertex_set.vertices[v].point, q.action)
