"""Brute-force references used to certify the solvers on desk-scale inputs."""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog

from .errors import ResourceCapError, SolverError, ValidationError
from .model import FloatArray, MultiTypeInstance, SingleTypeInstance, cost_of_uncertainty

DEFAULT_GRID_CAP = 200_000


def grid_size(n: int, m: int) -> int:
    return math.comb(m + n - 1, n - 1)


def simplex_grid(n: int, m: int, *, cap: int = DEFAULT_GRID_CAP) -> FloatArray:
    """All points ``k / m`` with nonnegative integer ``k`` summing to ``m``, in lexicographic order."""
    if m < 1 or n < 1:
        raise ValidationError("simplex grid needs n >= 1 and m >= 1")
    count = grid_size(n, m)
    if count > cap:
        raise ResourceCapError(f"simplex grid with n={n}, m={m} has {count} points, above the cap of {cap}")
    out = np.empty((count, n))
    # stars and bars: bar positions among m + n - 1 slots
    for row, bars in enumerate(itertools.combinations(range(m + n - 1), n - 1)):
        prev = -1
        for col, b in enumerate(bars):
            out[row, col] = b - prev - 1
            prev = b
        out[row, n - 1] = m + n - 2 - prev
    return out / m


def grid_concave_closure(instance: SingleTypeInstance, m: int, *, cap: int = DEFAULT_GRID_CAP) -> float:
    """Concave closure of ``f = R C`` at ``theta`` restricted to grid posteriors.

    A lower bound on the optimal single-type revenue that is non-decreasing
    under grid nesting.
    """
    pts = simplex_grid(instance.problem.n_states, m, cap=cap)
    fvals = np.asarray(instance.f(pts), dtype=float)
    res = linprog(
        -fvals,
        A_eq=pts.T,
        b_eq=instance.theta,
        bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9},
    )
    if res.status != 0:
        raise SolverError(f"grid closure LP failed: {res.message}")
    return float(-res.fun)


def _best_price_revenue(instance: MultiTypeInstance, cols: FloatArray) -> FloatArray:
    """Best single-price revenue of each signal column ``cols[g, omega]``."""
    types, joint = instance.types, instance.joint
    G = cols.shape[0]
    costs = np.zeros((G, instance.n_types))
    alive = np.zeros((G, instance.n_types), dtype=bool)
    mass = cols @ joint  # (G, types): seller-view mass of each type receiving the signal
    for k, theta in enumerate(types):
        phi = cols @ theta
        alive[:, k] = phi > 0.0
        eta = np.divide(cols * theta, phi[:, None], out=np.zeros_like(cols), where=phi[:, None] > 0)
        costs[:, k] = np.where(alive[:, k], cost_of_uncertainty(instance.problem, eta), -np.inf)
    best = np.zeros(G)
    for k in range(instance.n_types):
        p = np.where(alive[:, k], costs[:, k], 0.0)[:, None]
        buys = alive & (costs >= p - 1e-9)
        best = np.maximum(best, p[:, 0] * np.sum(mass * buys, axis=1))
    return best


def brute_force_multi(instance: MultiTypeInstance, n_signals: int, g: int) -> float:
    """Best revenue over grid signaling schemes with exact per-signal best prices.

    Limited to two states, at most two signals, four types and ``g <= 50``.
    """
    if instance.problem.n_states != 2:
        raise ResourceCapError("brute_force_multi supports two states only")
    if n_signals not in (1, 2):
        raise ResourceCapError("brute_force_multi supports one or two signals")
    if instance.n_types > 4:
        raise ResourceCapError("brute_force_multi supports at most four types")
    if not 1 <= g <= 50:
        raise ResourceCapError("brute_force_multi grid resolution must lie in [1, 50]")
    if n_signals == 1:
        return float(_best_price_revenue(instance, np.ones((1, 2)))[0])
    ticks = np.arange(g + 1) / g
    a, b = np.meshgrid(ticks, ticks, indexing="ij")
    a, b = a.ravel(), b.ravel()
    # (a, b) and (1 - a, 1 - b) describe the same scheme with signals swapped
    keep = (a < 1 - a) | ((a == 1 - a) & (b <= 1 - b))
    a, b = a[keep], b[keep]
    first = np.column_stack([a, b])
    second = 1.0 - first
    total = _best_price_revenue(instance, first) + _best_price_revenue(instance, second)
    return float(total.max())
