"""Random instance generators shared by the test modules."""

from __future__ import annotations

import numpy as np

from infoadvert import AdvertisingRule, DecisionProblem, MultiTypeInstance, SingleTypeInstance

GUESS2 = np.eye(2)
GUESS_MU = np.array([0.5, 0.5])
GUESS_THETA = np.array([0.8, 0.2])
GUESS_PI = np.array([[0.25, 1.0], [0.75, 0.0]])
GUESS_PRICES = np.array([0.5, 0.0])


def guess_instance() -> SingleTypeInstance:
    return SingleTypeInstance(DecisionProblem(GUESS2), GUESS_MU, GUESS_THETA)


def guess_rule() -> AdvertisingRule:
    return AdvertisingRule(GUESS_PI, GUESS_PRICES)


def dirichlet(rng: np.random.Generator, n: int, floor: float = 0.02) -> np.ndarray:
    """A full-support belief bounded away from the boundary."""
    x = rng.dirichlet(np.ones(n))
    x = floor / n + (1 - floor) * x
    return x / x.sum()


def random_problem(rng: np.random.Generator, n: int, m: int) -> DecisionProblem:
    return DecisionProblem(rng.random((n, m)))


def random_single(rng: np.random.Generator, n: int, m: int, *, common: bool = False) -> SingleTypeInstance:
    mu = dirichlet(rng, n)
    theta = mu if common else dirichlet(rng, n)
    return SingleTypeInstance(random_problem(rng, n, m), mu, theta)


def random_multi(rng: np.random.Generator, n: int, m: int, n_types: int) -> MultiTypeInstance:
    types = np.array([dirichlet(rng, n, floor=0.1) for _ in range(n_types)])
    joint = rng.random((n, n_types)) + 0.05
    return MultiTypeInstance(random_problem(rng, n, m), types, joint / joint.sum())


def random_rule(rng: np.random.Generator, n: int, n_signals: int, *, price_scale: float = 0.6) -> AdvertisingRule:
    pi = rng.random((n_signals, n)) + 1e-3
    return AdvertisingRule(pi / pi.sum(axis=0), price_scale * rng.random(n_signals))
