"""Random formula/trajectory corpus shared by the property tests."""

import numpy as np

from stlccp.formula import (Always, And, Eventually, Or, Pred, Predicate, Until,
                            formula_length)
from stlccp.robustness import Trajectory
from stlccp.systems import LinearSystem

DIM = 2
# x_{t+1} = x_t + u_t, so any state sequence is consistent with some inputs
SHIFT = LinearSystem(np.eye(DIM), np.eye(DIM))


def random_predicate(rng) -> Predicate:
    a = np.round(rng.uniform(-1, 1, DIM), 3)
    return Predicate(tuple(a), float(np.round(rng.uniform(-1, 1), 3)))


def random_formula(rng, depth: int = 4, budget: int = 12):
    """NNF formula of depth <= ``depth`` with formula length <= ``budget``."""
    if depth == 0 or rng.random() < 0.2:
        return Pred(random_predicate(rng))
    op = rng.integers(5)
    if op in (0, 1):
        args = tuple(random_formula(rng, depth - 1, budget) for _ in range(rng.integers(2, 4)))
        return And(args) if op == 0 else Or(args)
    t1 = int(rng.integers(0, 3))
    t2 = int(t1 + rng.integers(1, 4))
    if t2 > budget:
        return Pred(random_predicate(rng))
    if op == 4:
        return Until(t1, t2, random_formula(rng, depth - 1, budget - t2),
                     random_formula(rng, depth - 1, budget - t2))
    inner = random_formula(rng, depth - 1, budget - t2)
    return (Always if op == 2 else Eventually)(t1, t2, inner)


def random_pair(rng, T_max: int = 12):
    """(formula, trajectory) with horizon T = formula length + slack <= T_max."""
    f = random_formula(rng, 4, T_max)
    while isinstance(f, Pred):
        f = random_formula(rng, 4, T_max)
    assert formula_length(f) <= T_max
    T = int(min(T_max, formula_length(f) + rng.integers(0, 3)))
    x = rng.uniform(-2, 2, (T + 1, DIM))
    return f, Trajectory(x, np.diff(x, axis=0))


def corpus(n: int = 200, seed: int = 2024):
    rng = np.random.default_rng(seed)
    return [random_pair(rng) for _ in range(n)]
