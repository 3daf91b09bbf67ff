"""Core domain types and the primitive quantities of the advertising model.

Beliefs are plain 1-D numpy arrays validated through :func:`as_belief`.
Utilities are stored state-major: ``utility[omega, a]``.  Signaling schemes
are stored signal-major: ``pi[s, omega]`` is the probability of sending
signal ``s`` when the state is ``omega``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import UndefinedPosteriorError, ValidationError

FloatArray = NDArray[np.float64]

SIMPLEX_TOL = 1e-9
PURCHASE_TOL = 1e-9


def as_belief(x: ArrayLike, *, full_support: bool = False, name: str = "belief") -> FloatArray:
    """Validate ``x`` as a point of the probability simplex.

    Vectors within ``SIMPLEX_TOL`` of the simplex are clipped and
    re-normalized; anything farther away is rejected.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{name}: expected a non-empty vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name}: entries must be finite")
    if arr.min() < -SIMPLEX_TOL:
        raise ValidationError(f"{name}: negative entry {arr.min():.3g}")
    total = arr.sum()
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise ValidationError(f"{name}: entries sum to {total:.12g}, expected 1")
    arr = np.clip(arr, 0.0, None)
    arr = arr / arr.sum()
    if full_support and arr.min() <= 0.0:
        raise ValidationError(f"{name}: full support required, entry {int(arr.argmin())} is zero")
    return arr


@dataclass(frozen=True, eq=False)
class DecisionProblem:
    """States, actions and the buyer's utility ``u(omega, a)`` in [0, 1].

    A problem built by :meth:`from_linear_cost` replaces the regret matrix by
    a single column ``v`` so that the cost of uncertainty becomes the linear
    functional ``eta @ v``.  Such problems skip the ``C(e_omega) = 0`` check.
    """

    utility: FloatArray
    linear_cost: FloatArray | None = None
    regret: FloatArray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        u = np.array(self.utility, dtype=float)
        if u.ndim != 2 or u.shape[0] < 1 or u.shape[1] < 1:
            raise ValidationError(f"utility: expected an n_states x n_actions matrix, got shape {u.shape}")
        if not np.all(np.isfinite(u)):
            raise ValidationError("utility: entries must be finite")
        if u.min() < 0.0 or u.max() > 1.0:
            raise ValidationError("utility: entries must lie in [0, 1]")
        u.setflags(write=False)
        object.__setattr__(self, "utility", u)
        if self.linear_cost is not None:
            v = np.array(self.linear_cost, dtype=float)
            if v.shape != (u.shape[0],):
                raise ValidationError(f"linear_cost: expected length {u.shape[0]}, got shape {v.shape}")
            if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
                raise ValidationError("linear_cost: entries must lie in [0, 1]")
            v.setflags(write=False)
            object.__setattr__(self, "linear_cost", v)
            regret = v[:, None].copy()
        else:
            regret = u.max(axis=1, keepdims=True) - u
        regret.setflags(write=False)
        object.__setattr__(self, "regret", regret)

    @classmethod
    def from_linear_cost(cls, v: ArrayLike) -> "DecisionProblem":
        v = np.asarray(v, dtype=float)
        return cls(utility=np.zeros((v.size, 1)), linear_cost=v)

    @property
    def n_states(self) -> int:
        return self.utility.shape[0]

    @property
    def n_actions(self) -> int:
        return self.regret.shape[1]

    @property
    def is_linear(self) -> bool:
        return self.linear_cost is not None

    @property
    def best_utility(self) -> FloatArray:
        """``u*(omega) = max_a u(omega, a)``."""
        return self.utility.max(axis=1)

    def action_costs(self, eta: ArrayLike) -> FloatArray:
        """Expected regret ``C_a(eta)`` of every action (vectorised over leading axes)."""
        eta = np.asarray(eta, dtype=float)
        if eta.shape[-1] != self.n_states:
            raise ValidationError(f"belief length {eta.shape[-1]} does not match n_states={self.n_states}")
        return eta @ self.regret


def best_action(problem: DecisionProblem, eta: ArrayLike) -> int:
    """Best response to ``eta``; ties go to the lowest action index."""
    costs = problem.action_costs(eta)
    if costs.ndim != 1:
        raise ValidationError("best_action expects a single belief")
    # argmin over regret equals argmax over expected utility; np.argmin keeps the first tie
    return int(np.argmin(costs))


def cost_of_uncertainty(problem: DecisionProblem, eta: ArrayLike) -> float | FloatArray:
    """Expected loss of acting without knowing the state, ``min_a C_a(eta)``."""
    costs = problem.action_costs(eta)
    out = costs.min(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def likelihood_ratio(mu: ArrayLike, theta: ArrayLike, eta: ArrayLike) -> float | FloatArray:
    """``R(eta) = sum_w mu_w eta_w / theta_w``; linear in ``eta``."""
    mu = np.asarray(mu, dtype=float)
    theta = np.asarray(theta, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if mu.shape != theta.shape or eta.shape[-1] != theta.shape[0]:
        raise ValidationError("likelihood_ratio: dimension mismatch")
    if np.any(theta <= 0.0):
        raise ValidationError("likelihood_ratio: theta must have full support")
    out = eta @ (mu / theta)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class SingleTypeInstance:
    """A decision problem, the true state distribution and one targeted prior."""

    problem: DecisionProblem
    mu: FloatArray
    theta: FloatArray

    def __post_init__(self) -> None:
        mu = as_belief(self.mu, name="mu")
        theta = as_belief(self.theta, full_support=True, name="theta")
        n = self.problem.n_states
        if mu.size != n or theta.size != n:
            raise ValidationError(f"mu/theta must have length n_states={n}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "theta", theta)

    @property
    def ratio_weights(self) -> FloatArray:
        """Coefficients ``mu_w / theta_w`` of the likelihood ratio."""
        return self.mu / self.theta

    def R(self, eta: ArrayLike) -> float | FloatArray:
        return likelihood_ratio(self.mu, self.theta, eta)

    def C(self, eta: ArrayLike) -> float | FloatArray:
        return cost_of_uncertainty(self.problem, eta)

    def f(self, eta: ArrayLike) -> float | FloatArray:
        """The function whose concave closure at ``theta`` is the optimal revenue."""
        return self.R(eta) * self.C(eta)


@dataclass(frozen=True, eq=False)
class MultiTypeInstance:
    """Buyer types ``types[k]`` with joint distribution ``joint[omega, k]``."""

    problem: DecisionProblem
    types: FloatArray
    joint: FloatArray

    def __post_init__(self) -> None:
        n = self.problem.n_states
        types = np.asarray(self.types, dtype=float)
        if types.ndim != 2 or types.shape[1] != n or types.shape[0] < 1:
            raise ValidationError(f"types: expected a |Theta| x {n} matrix, got shape {types.shape}")
        types = np.vstack([as_belief(t, full_support=True, name=f"types[{k}]") for k, t in enumerate(types)])
        for i in range(len(types)):
            for j in range(i + 1, len(types)):
                if np.max(np.abs(types[i] - types[j])) <= 1e-12:
                    raise ValidationError(f"types[{i}] and types[{j}] coincide")
        joint = np.asarray(self.joint, dtype=float)
        if joint.shape != (n, len(types)):
            raise ValidationError(f"joint: expected shape ({n}, {len(types)}), got {joint.shape}")
        if not np.all(np.isfinite(joint)) or joint.min() < 0.0:
            raise ValidationError("joint: entries must be finite and nonnegative")
        total = joint.sum()
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise ValidationError(f"joint: entries sum to {total:.12g}, expected 1")
        joint = joint / total
        types.setflags(write=False)
        joint.setflags(write=False)
        object.__setattr__(self, "types", types)
        object.__setattr__(self, "joint", joint)

    @classmethod
    def from_single(cls, instance: SingleTypeInstance) -> "MultiTypeInstance":
        return cls(instance.problem, instance.theta[None, :], instance.mu[:, None])

    @property
    def n_types(self) -> int:
        return self.types.shape[0]

    @property
    def mu(self) -> FloatArray:
        return self.joint.sum(axis=1)


@dataclass(frozen=True, eq=False)
class AdvertisingRule:
    """Signaling scheme ``pi[s, omega]`` plus a posted price per signal."""

    pi: FloatArray
    prices: FloatArray

    def __post_init__(self) -> None:
        pi = np.array(self.pi, dtype=float)
        prices = np.array(self.prices, dtype=float).reshape(-1)
        if pi.ndim != 2 or pi.shape[0] < 1:
            raise ValidationError(f"pi: expected an n_signals x n_states matrix, got shape {pi.shape}")
        if prices.shape != (pi.shape[0],):
            raise ValidationError(f"prices: expected {pi.shape[0]} entries, got {prices.size}")
        if not np.all(np.isfinite(pi)) or not np.all(np.isfinite(prices)):
            raise ValidationError("rule entries must be finite")
        if pi.min() < -SIMPLEX_TOL:
            raise ValidationError(f"pi: negative entry {pi.min():.3g}")
        pi = np.clip(pi, 0.0, None)
        sums = pi.sum(axis=0)
        bad = np.flatnonzero(np.abs(sums - 1.0) > SIMPLEX_TOL)
        if bad.size:
            w = int(bad[0])
            raise ValidationError(f"pi: signal probabilities for state {w} sum to {sums[w]:.12g}, expected 1")
        pi = pi / sums
        if prices.min() < 0.0 or prices.max() > 1.0:
            raise ValidationError("prices must lie in [0, 1]")
        pi.setflags(write=False)
        prices.setflags(write=False)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "prices", prices)

    @property
    def n_signals(self) -> int:
        return self.pi.shape[0]

    @property
    def n_states(self) -> int:
        return self.pi.shape[1]

    @classmethod
    def uninformative(cls, n_states: int, price: float) -> "AdvertisingRule":
        return cls(np.ones((1, n_states)), [price])

    @classmethod
    def fully_revealing(cls, n_states: int, price: float = 0.0) -> "AdvertisingRule":
        return cls(np.eye(n_states), np.full(n_states, price))


@dataclass(frozen=True, eq=False)
class PosteriorDecomposition:
    """Buyer-view signal probabilities ``phi[s]`` and posteriors ``etas[s]``."""

    phi: FloatArray
    etas: FloatArray

    def __post_init__(self) -> None:
        phi = np.array(self.phi, dtype=float).reshape(-1)
        etas = np.array(self.etas, dtype=float)
        if etas.ndim != 2 or etas.shape[0] != phi.size:
            raise ValidationError("decomposition: phi and etas disagree in length")
        if phi.size and phi.min() < -SIMPLEX_TOL:
            raise ValidationError("decomposition: phi must be nonnegative")
        if abs(phi.sum() - 1.0) > SIMPLEX_TOL:
            raise ValidationError(f"decomposition: phi sums to {phi.sum():.12g}, expected 1")
        etas = np.vstack([as_belief(e, name=f"etas[{k}]") for k, e in enumerate(etas)])
        phi = np.clip(phi, 0.0, None)
        phi.setflags(write=False)
        etas.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "etas", etas)

    def __len__(self) -> int:
        return self.phi.size

    def barycenter(self) -> FloatArray:
        return self.phi @ self.etas

    def revenue(self, instance: SingleTypeInstance) -> float:
        """``sum_s phi_s R(eta^s) C(eta^s)``."""
        return float(self.phi @ instance.f(self.etas))


def _check_rule(rule: AdvertisingRule, n_states: int) -> None:
    if rule.n_states != n_states:
        raise ValidationError(f"rule has {rule.n_states} states, instance has {n_states}")


def posterior(theta: ArrayLike, rule: AdvertisingRule, signal_index: int) -> tuple[float, FloatArray]:
    """Buyer-view probability of ``signal_index`` and the Bayes posterior after it."""
    theta = np.asarray(theta, dtype=float)
    _check_rule(rule, theta.size)
    joint = theta * rule.pi[signal_index]
    phi = float(joint.sum())
    if phi <= 0.0:
        raise UndefinedPosteriorError(f"signal {signal_index} has zero probability under the prior")
    return phi, joint / phi


def _buys(cost: FloatArray | float, price: FloatArray | float) -> FloatArray | bool:
    return cost >= np.asarray(price) - PURCHASE_TOL


def evaluate_rule_single(instance: SingleTypeInstance, rule: AdvertisingRule) -> float:
    """Expected revenue when every buyer holds the targeted prior ``theta``."""
    _check_rule(rule, instance.problem.n_states)
    phi_theta = rule.pi @ instance.theta
    phi_mu = rule.pi @ instance.mu
    active = phi_theta > 0.0
    revenue = 0.0
    if np.any(active):
        etas = rule.pi[active] * instance.theta / phi_theta[active, None]
        costs = instance.C(etas)
        prices = rule.prices[active]
        revenue = float(np.sum(phi_mu[active] * prices * _buys(costs, prices)))
    return revenue


def evaluate_rule_multi(instance: MultiTypeInstance, rule: AdvertisingRule) -> float:
    """Expected revenue per buyer summed over the joint distribution of states and types."""
    _check_rule(rule, instance.problem.n_states)
    revenue = 0.0
    for k, theta in enumerate(instance.types):
        phi_theta = rule.pi @ theta
        active = phi_theta > 0.0
        if not np.any(active):
            continue
        etas = rule.pi[active] * theta / phi_theta[active, None]
        costs = cost_of_uncertainty(instance.problem, etas)
        prices = rule.prices[active]
        mass = rule.pi[active] @ instance.joint[:, k]
        revenue += float(np.sum(mass * prices * _buys(costs, prices)))
    return revenue


def decomposition_to_rule(
    instance: SingleTypeInstance, decomp: PosteriorDecomposition, *, tol: float = 1e-6
) -> AdvertisingRule:
    """Turn ``(phi, eta)`` pairs into a row-stochastic scheme priced at ``C(eta)``.

    The scheme rows are re-normalized after construction and prices are taken
    at the posteriors of the normalized scheme, so the returned rule is
    self-consistent even when the decomposition is only feasible up to ``tol``.
    """
    theta = instance.theta
    if decomp.etas.shape[1] != theta.size:
        raise ValidationError("decomposition dimension does not match the instance")
    gap = np.max(np.abs(decomp.barycenter() - theta))
    if gap > tol:
        raise ValidationError(f"decomposition does not average to theta (max deviation {gap:.3g})")
    keep = decomp.phi > 0.0
    pi = decomp.phi[keep, None] * decomp.etas[keep] / theta
    pi = pi / pi.sum(axis=0)
    joint = pi * theta
    etas = joint / joint.sum(axis=1, keepdims=True)
    prices = np.clip(instance.C(etas), 0.0, 1.0)
    return AdvertisingRule(pi, np.atleast_1d(prices))


def rule_to_decomposition(instance: SingleTypeInstance, rule: AdvertisingRule) -> PosteriorDecomposition:
    """Buyer-view decomposition of a rule; zero-probability signals are dropped."""
    _check_rule(rule, instance.problem.n_states)
    phi = rule.pi @ instance.theta
    keep = phi > 0.0
    etas = rule.pi[keep] * instance.theta / phi[keep, None]
    return PosteriorDecomposition(phi[keep], etas)


@dataclass(frozen=True)
class Prospect:
    """A sender prospect: realization probability, sender profit, receiver value."""

    p: float
    pi: float
    v: float


def convert_disclosure(prospects: Sequence[Prospect | tuple[float, float, float]]) -> tuple[SingleTypeInstance, float]:
    """Recast an information-disclosure problem as a common-prior advertising problem.

    Returns the instance and the scale factor ``M`` with
    ``sum_i p_i pi_i M = 1``.  For any scheme the sender payoff equals the
    advertising revenue divided by ``M``.
    """
    rows = [pr if isinstance(pr, Prospect) else Prospect(*pr) for pr in prospects]
    if not rows:
        raise ValidationError("prospects: at least one prospect required")
    p = np.array([r.p for r in rows], dtype=float)
    profit = np.array([r.pi for r in rows], dtype=float)
    v = np.array([r.v for r in rows], dtype=float)
    for i, r in enumerate(rows):
        if not r.p > 0.0:
            raise ValidationError(f"prospects[{i}].p must be positive")
        if r.pi < 0.0:
            raise ValidationError(f"prospects[{i}].pi must be nonnegative")
        if not 0.0 <= r.v <= 1.0:
            raise ValidationError(f"prospects[{i}].v must lie in [0, 1]")
    theta = as_belief(p, full_support=True, name="prospects.p")
    normalizer = float(theta @ profit)
    if not normalizer > 0.0:
        raise ValidationError("prospects: sum_i p_i pi_i must be positive")
    scale = 1.0 / normalizer
    mu = theta * profit * scale
    instance = SingleTypeInstance(DecisionProblem.from_linear_cost(v), mu / mu.sum(), theta)
    return instance, scale


def sender_payoff(prospects: Sequence[Prospect | tuple[float, float, float]], sigma: ArrayLike) -> float:
    """Sender payoff ``E_s[E[pi|s] E[v|s]]`` of a disclosure scheme ``sigma[s, i]``."""
    rows = [pr if isinstance(pr, Prospect) else Prospect(*pr) for pr in prospects]
    p = np.array([r.p for r in rows])
    profit = np.array([r.pi for r in rows])
    v = np.array([r.v for r in rows])
    sigma = np.asarray(sigma, dtype=float)
    total = 0.0
    for col in sigma:
        w = p * col
        mass = w.sum()
        if mass > 0.0:
            total += mass * (w @ profit / mass) * (w @ v / mass)
    return float(total)
