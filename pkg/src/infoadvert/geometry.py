"""Vertices of the best-response polytopes and the vertex-pair segment set.

For an action ``a`` the polytope ``P_a`` of beliefs under which ``a`` is a
best response is written in standard form

    sum(eta) = 1
    C_a(eta) - C_b(eta) + s_b = 0      for every b != a
    eta >= 0, s >= 0

with ``|A|`` equations in ``|Omega| + |A| - 1`` variables.  Its vertices are
the basic feasible solutions, found by enumerating index sets of size
``|A|`` and solving the basis systems in batches.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ResourceCapError
from .model import DecisionProblem, FloatArray, SingleTypeInstance

DEFAULT_BASIS_CAP = 2_000_000
VERTEX_TOL = 1e-9
COND_LIMIT = 1e12
_BATCH = 4096


@dataclass
class Vertex:
    point: FloatArray
    actions: frozenset[int]

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.point > VERTEX_TOL))


@dataclass
class VertexSet:
    vertices: list[Vertex]
    diagnostics: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def points(self) -> FloatArray:
        return np.array([v.point for v in self.vertices])


@dataclass(frozen=True)
class SegmentPair:
    i: int
    j: int
    action: int
    slope_product: float


@dataclass
class SegmentSet:
    """Vertex pairs that may carry one posterior of an optimal rule.

    ``R`` and ``C`` hold the likelihood ratio and cost of uncertainty at each
    vertex of ``vertex_set``.
    """

    vertex_set: VertexSet
    pairs: list[SegmentPair]
    R: FloatArray
    C: FloatArray

    def singletons(self) -> list[SegmentPair]:
        return [p for p in self.pairs if p.i == p.j]

    def strict_pairs(self) -> list[SegmentPair]:
        return [p for p in self.pairs if p.i != p.j]


def basis_count(problem: DecisionProblem) -> int:
    """Number of candidate index sets per action, ``C(n + |A| - 1, |A|)``."""
    return math.comb(problem.n_states + problem.n_actions - 1, problem.n_actions)


def _standard_form(problem: DecisionProblem, action: int) -> tuple[FloatArray, FloatArray]:
    n, m = problem.n_states, problem.n_actions
    others = [b for b in range(m) if b != action]
    A = np.zeros((m, n + m - 1))
    A[0, :n] = 1.0
    for row, b in enumerate(others, start=1):
        A[row, :n] = problem.regret[:, action] - problem.regret[:, b]
        A[row, n + row - 1] = 1.0
    rhs = np.zeros(m)
    rhs[0] = 1.0
    return A, rhs


def _dedup(points: list[FloatArray], tol: float = VERTEX_TOL) -> list[FloatArray]:
    if not points:
        return []
    # lexicographic sort brings near-equal points next to each other only coordinate-wise,
    # so compare against every kept point (vertex counts are small)
    ordered = sorted(points, key=lambda p: tuple(np.round(p, 9)))
    kept: list[FloatArray] = []
    for p in ordered:
        if not any(np.max(np.abs(p - q)) <= tol for q in kept):
            kept.append(p)
    return kept


def _enumerate(problem: DecisionProblem, action: int, cap: int, stats: dict) -> list[FloatArray]:
    n, m = problem.n_states, problem.n_actions
    total = basis_count(problem)
    if total > cap:
        raise ResourceCapError(
            f"vertex enumeration needs {total} basis systems per action, above the cap of {cap}"
        )
    A, rhs = _standard_form(problem, action)
    found: list[FloatArray] = []
    combos = itertools.combinations(range(n + m - 1), m)
    while True:
        chunk = list(itertools.islice(combos, _BATCH))
        if not chunk:
            break
        idx = np.array(chunk)
        mats = A[:, idx].transpose(1, 0, 2)  # (batch, m, m)
        stats["bases"] = stats.get("bases", 0) + len(chunk)
        sv = np.linalg.svd(mats, compute_uv=False)
        smax, smin = sv[:, 0], sv[:, -1]
        singular = smin <= 1e-14 * np.maximum(smax, 1.0)
        near = ~singular & (smax > COND_LIMIT * smin)
        stats["singular"] = stats.get("singular", 0) + int(singular.sum())
        stats["near_singular"] = stats.get("near_singular", 0) + int(near.sum())
        ok = ~(singular | near)
        if not np.any(ok):
            continue
        sol = np.linalg.solve(mats[ok], np.broadcast_to(rhs, (int(ok.sum()), m))[..., None])[..., 0]
        feasible = np.all(sol >= -VERTEX_TOL, axis=1)
        for basis, x_b in zip(idx[ok][feasible], sol[feasible]):
            x = np.zeros(n + m - 1)
            x[basis] = np.clip(x_b, 0.0, None)
            eta = x[:n]
            s = eta.sum()
            if s <= 0.0:
                continue
            found.append(eta / s)
    return _dedup(found)


def enumerate_vertices(problem: DecisionProblem, action: int, *, cap: int = DEFAULT_BASIS_CAP) -> list[FloatArray]:
    """Vertices of ``P_action`` as basic feasible solutions (empty if ``P_action`` is empty)."""
    if not 0 <= action < problem.n_actions:
        raise IndexError(f"action {action} out of range")
    return _enumerate(problem, action, cap, {})


def in_polytope(problem: DecisionProblem, eta: FloatArray, action: int, tol: float = VERTEX_TOL) -> bool:
    costs = problem.action_costs(eta)
    return bool(costs[action] <= costs.min() + tol)


def all_vertices(problem: DecisionProblem, *, cap: int = DEFAULT_BASIS_CAP) -> VertexSet:
    """Union of the vertex sets of every ``P_a``, each vertex tagged with all containing actions."""
    stats: dict = {}
    points: list[FloatArray] = []
    for a in range(problem.n_actions):
        points.extend(_enumerate(problem, a, cap, stats))
    vertices = []
    for p in _dedup(points):
        costs = problem.action_costs(p)
        tags = frozenset(int(a) for a in np.flatnonzero(costs <= costs.min() + VERTEX_TOL))
        vertices.append(Vertex(p, tags))
    stats["vertices"] = len(vertices)
    return VertexSet(vertices, stats)


def build_segments(instance: SingleTypeInstance, vs: VertexSet, *, tol: float = 1e-9) -> SegmentSet:
    """All singletons plus every same-polytope pair with ``(R_i - R_j)(C_i - C_j) <= tol``."""
    pts = vs.points
    R = np.asarray(instance.R(pts), dtype=float)
    C = np.asarray(instance.C(pts), dtype=float)
    pairs = [SegmentPair(i, i, min(v.actions), 0.0) for i, v in enumerate(vs.vertices)]
    for i, j in itertools.combinations(range(len(vs.vertices)), 2):
        shared = vs.vertices[i].actions & vs.vertices[j].actions
        if not shared:
            continue
        k = float((R[i] - R[j]) * (C[i] - C[j]))
        if k <= tol:
            pairs.append(SegmentPair(i, j, min(shared), k))
    return SegmentSet(vs, pairs, R, C)
