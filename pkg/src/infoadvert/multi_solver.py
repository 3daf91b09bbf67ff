"""Multi-type solver: a linear program over a price grid and purchase sets.

Every signal is indexed by a grid price ``p`` and a candidate purchase set
``Lambda`` of buyer types.  The LP chooses the scheme columns so that all
types in ``Lambda`` weakly prefer buying at ``p``; the constraints are linear
because the posterior normalizer cancels.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import ResourceCapError, SolverError, ValidationError
from .model import (
    PURCHASE_TOL,
    AdvertisingRule,
    FloatArray,
    MultiTypeInstance,
    cost_of_uncertainty,
    evaluate_rule_multi,
)

DEFAULT_EPSILON = 1.0 / 64
DEFAULT_SUBSET_CAP = 16
_PRUNE_TOL = 1e-12


@dataclass(frozen=True)
class LambdaCandidate:
    members: frozenset[int]

    def __post_init__(self) -> None:
        if not self.members:
            raise ValidationError("a purchase set must be non-empty")

    def sorted(self) -> list[int]:
        return sorted(self.members)


@dataclass
class GridLPResult:
    rule: AdvertisingRule
    lp_value: float
    realized_revenue: float
    epsilon: float
    declared: list[LambdaCandidate]
    diagnostics: dict = field(default_factory=dict)


def price_grid(epsilon: float) -> FloatArray:
    """``{0, eps, 2 eps, ...}`` up to 1, with 1 appended when it is not a multiple."""
    if not 0.0 < epsilon <= 1.0:
        raise ValidationError(f"epsilon must lie in (0, 1], got {epsilon}")
    k = int(np.floor(1.0 / epsilon + 1e-12))
    grid = np.arange(k + 1) * epsilon
    grid = np.minimum(grid, 1.0)
    if grid[-1] < 1.0 - 1e-12:
        grid = np.append(grid, 1.0)
    return grid


def resolve_mode(instance: MultiTypeInstance, mode: str, cap: int = DEFAULT_SUBSET_CAP) -> str:
    if mode != "auto":
        return mode
    if instance.problem.n_states == 2:
        return "intervals"
    if instance.n_types <= cap:
        return "subsets"
    raise ResourceCapError(f"{instance.n_types} types exceed the subset cap of {cap} and states are not binary")


def enumerate_lambda_candidates(
    instance: MultiTypeInstance, mode: str = "auto", *, cap: int = DEFAULT_SUBSET_CAP
) -> list[LambdaCandidate]:
    """Candidate purchase sets: all non-empty subsets, or contiguous runs in ``theta_0`` order."""
    mode = resolve_mode(instance, mode, cap)
    T = instance.n_types
    if mode == "subsets":
        if T > cap:
            raise ResourceCapError(f"{T} types exceed the subset cap of {cap}")
        return [
            LambdaCandidate(frozenset(c)) for r in range(1, T + 1) for c in itertools.combinations(range(T), r)
        ]
    if mode == "intervals":
        if instance.problem.n_states != 2:
            raise ValidationError("interval candidates require exactly two states")
        order = np.argsort(instance.types[:, 0], kind="stable")
        firsts = instance.types[order, 0]
        if np.any(np.diff(firsts) <= 1e-12):
            raise ValidationError("binary-state types must have distinct first coordinates")
        return [
            LambdaCandidate(frozenset(int(k) for k in order[lo : hi + 1])) for lo in range(T) for hi in range(lo, T)
        ]
    raise ValidationError(f"unknown lambda mode {mode!r}")


def realized_purchase_set(instance: MultiTypeInstance, rule: AdvertisingRule, signal_index: int) -> LambdaCandidate | None:
    """Types that receive the signal with positive probability and buy at its price.

    Returns ``None`` when no type buys.
    """
    col = rule.pi[signal_index]
    price = rule.prices[signal_index]
    members = set()
    for k, theta in enumerate(instance.types):
        phi = float(theta @ col)
        if phi <= 0.0:
            continue
        if cost_of_uncertainty(instance.problem, theta * col / phi) >= price - PURCHASE_TOL:
            members.add(k)
    return LambdaCandidate(frozenset(members)) if members else None


def merge_duplicate_signals(instance: MultiTypeInstance, rule: AdvertisingRule) -> AdvertisingRule:
    """Sum the columns of signals that share a price and a realized purchase set.

    Every type in the shared set still buys after the merge (the merged
    posterior mixes the two and ``C`` is concave), so revenue cannot drop.
    """
    groups: dict[tuple, list[int]] = {}
    order: list[tuple] = []
    for s in range(rule.n_signals):
        lam = realized_purchase_set(instance, rule, s)
        key = (round(float(rule.prices[s]), 9), lam.members if lam else frozenset())
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(s)
    if len(order) == rule.n_signals:
        return rule
    pi = np.array([rule.pi[groups[k]].sum(axis=0) for k in order])
    prices = np.array([rule.prices[groups[k][0]] for k in order])
    return AdvertisingRule(pi, prices)


def reoptimize_prices(instance: MultiTypeInstance, rule: AdvertisingRule) -> AdvertisingRule:
    """Give every signal the revenue-maximizing price among the types' posterior costs."""
    prices = rule.prices.copy()
    for s in range(rule.n_signals):
        col = rule.pi[s]
        mass = col @ instance.joint
        costs = np.full(instance.n_types, -np.inf)
        for k, theta in enumerate(instance.types):
            phi = float(theta @ col)
            if phi > 0.0:
                costs[k] = cost_of_uncertainty(instance.problem, theta * col / phi)
        best_p, best_r = prices[s], -1.0
        for p in np.concatenate([[prices[s]], costs[np.isfinite(costs)]]):
            p = float(np.clip(p, 0.0, 1.0))
            r = p * float(mass[costs >= p - PURCHASE_TOL].sum())
            if r > best_r + 1e-15:
                best_p, best_r = p, r
        prices[s] = best_p
    return AdvertisingRule(rule.pi, prices)


def solve_grid_lp(
    instance: MultiTypeInstance,
    epsilon: float = DEFAULT_EPSILON,
    candidates: list[LambdaCandidate] | None = None,
    *,
    mode: str = "auto",
    reoptimize: bool = False,
) -> GridLPResult:
    """Epsilon-suboptimal rule from the price-grid LP.

    Args:
        instance: multi-type instance.
        epsilon: price grid step.
        candidates: purchase sets to index signals by; enumerated from ``mode``
            when omitted.
        reoptimize: re-price each returned signal at its exact best price.
            The LP value is unaffected; only the returned rule changes.
    """
    prices = price_grid(epsilon)
    if candidates is None:
        candidates = enumerate_lambda_candidates(instance, mode)
    if not candidates:
        raise ValidationError("at least one purchase-set candidate is required")
    problem = instance.problem
    n, A = problem.n_states, problem.n_actions
    regret = problem.regret
    signals = [(p, lam) for p in prices for lam in candidates]
    S = len(signals)

    # variable index of pi(omega, s) is s * n + omega
    c = np.zeros(S * n)
    rows, cols, vals = [], [], []
    r = 0
    for s, (p, lam) in enumerate(signals):
        members = lam.sorted()
        c[s * n : (s + 1) * n] = -p * instance.joint[:, members].sum(axis=1)
        if p <= 0.0:
            continue
        for k in members:
            theta = instance.types[k]
            for a in range(A):
                # sum_w theta_w pi(w, s) (p - regret(w, a)) <= 0
                coef = theta * (p - regret[:, a])
                nz = np.flatnonzero(coef != 0.0)
                rows.extend([r] * nz.size)
                cols.extend((s * n + nz).tolist())
                vals.extend(coef[nz].tolist())
                r += 1
    A_ub = sparse.csr_matrix((vals, (rows, cols)), shape=(r, S * n)) if r else None
    b_ub = np.zeros(r) if r else None
    eq = sparse.csr_matrix(
        (np.ones(S * n), (np.tile(np.arange(n), S), np.arange(S * n))), shape=(n, S * n)
    )
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=eq,
        b_eq=np.ones(n),
        bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9},
    )
    if res.status != 0:
        raise SolverError(f"grid LP failed: {res.message}")
    pi = np.clip(res.x.reshape(S, n), 0.0, None)
    keep = pi.sum(axis=1) > _PRUNE_TOL
    pi = pi[keep]
    pi = pi / pi.sum(axis=0)
    kept = [signals[s] for s in np.flatnonzero(keep)]
    rule = AdvertisingRule(pi, np.array([p for p, _ in kept]))
    if reoptimize:
        rule = reoptimize_prices(instance, rule)
    lp_value = float(-res.fun)
    return GridLPResult(
        rule=rule,
        lp_value=lp_value,
        realized_revenue=evaluate_rule_multi(instance, rule),
        epsilon=float(epsilon),
        declared=[lam for _, lam in kept],
        diagnostics={
            "status": res.message,
            "iterations": int(getattr(res, "nit", 0)),
            "n_candidates": len(candidates),
            "n_prices": int(prices.size),
            "n_variables": S * n,
            "n_constraints": r + n,
            "reoptimized_prices": reoptimize,
        },
    )
