"""Exact and smoothed robustness of STL formulas over discrete trajectories."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .formula import (Always, And, Eventually, Formula, Or, Pred, Until,
                      formula_length)
from .smoothers import ExactMin, SmootherKind

UNTIL_MODES = ("standard", "literal")


class HorizonError(ValueError):
    """The trajectory is too short for the formula."""


@dataclass(frozen=True)
class Trajectory:
    """States ``x_0..x_T`` (shape ``(T+1, n)``) and inputs ``u_0..u_{T-1}``."""

    states: np.ndarray
    inputs: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.states, dtype=float))
        u = np.asarray(self.inputs, dtype=float)
        if u.size == 0:
            u = u.reshape(max(x.shape[0] - 1, 0), 0)
        u = u.reshape(u.shape[0], -1) if u.ndim == 1 else u
        if u.shape[0] != x.shape[0] - 1:
            raise ValueError(
                f"need T inputs for T+1 states, got {u.shape[0]} and {x.shape[0]}")
        x.setflags(write=False)
        u.setflags(write=False)
        object.__setattr__(self, "states", x)
        object.__setattr__(self, "inputs", u)

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1

    @classmethod
    def from_states(cls, states, m: int = 0) -> "Trajectory":
        states = np.atleast_2d(np.asarray(states, dtype=float))
        return cls(states, np.zeros((states.shape[0] - 1, m)))


def _check_horizon(f, traj, t):
    need = t + formula_length(f)
    if t < 0 or need > traj.horizon:
        raise HorizonError(
            f"formula needs horizon {need} from t={t}, trajectory has T={traj.horizon}")


def _until_windows(f, t, until):
    """Yield ``(t', rhs_times)`` pairs for the inner max/min of an Until.

    Standard: rhs(t') combined with lhs over ``[t, t']``.
    Literal: roles swapped, lhs(t') combined with
    rhs over ``[t+t1, t']``.
    """
    for tp in range(t + f.t1, t + f.t2 + 1):
        if until == "standard":
            yield tp, f.rhs, f.lhs, range(t, tp + 1)
        else:
            yield tp, f.lhs, f.rhs, range(t + f.t1, tp + 1)


def _rev(f, x, t, smin: Callable, until: str) -> float:
    if isinstance(f, Pred):
        return f.pred.g(x[t])
    if isinstance(f, And):
        return max(_rev(a, x, t, smin, until) for a in f.args)
    if isinstance(f, Or):
        return smin([_rev(a, x, t, smin, until) for a in f.args])
    if isinstance(f, Always):
        return max(_rev(f.arg, x, tp, smin, until)
                   for tp in range(t + f.t1, t + f.t2 + 1))
    if isinstance(f, Eventually):
        return smin([_rev(f.arg, x, tp, smin, until)
                     for tp in range(t + f.t1, t + f.t2 + 1)])
    if isinstance(f, Until):
        vals = []
        for tp, at_tp, over, window in _until_windows(f, t, until):
            head = _rev(at_tp, x, tp, smin, until)
            tail = [_rev(over, x, s, smin, until) for s in window]
            if until == "standard":
                vals.append(max(head, max(tail)))
            else:
                vals.append(smin([head, smin(tail)]) if len(tail) > 1
                            else smin([head, tail[0]]))
        return smin(vals) if until == "standard" else max(vals)
    raise TypeError(f"not a formula: {f!r}")


def eval_robustness_rev(f: Formula, traj: Trajectory, t: int = 0,
                        smoother: SmootherKind = ExactMin(),
                        until: str = "standard") -> float:
    """Reversed robustness (negative iff satisfied strictly).

    Conjunctions and Always map to ``max``; disjunctions and Eventually to
    ``min``, which ``smoother`` may replace by a smooth approximation.
    """
    if until not in UNTIL_MODES:
        raise ValueError(f"until must be one of {UNTIL_MODES}")
    _check_horizon(f, traj, t)
    return _rev(f, traj.states, t, smoother.min, until)


def _orig(f, x, t, until) -> float:
    if isinstance(f, Pred):
        return -f.pred.g(x[t])
    if isinstance(f, And):
        return min(_orig(a, x, t, until) for a in f.args)
    if isinstance(f, Or):
        return max(_orig(a, x, t, until) for a in f.args)
    if isinstance(f, Always):
        return min(_orig(f.arg, x, tp, until)
                   for tp in range(t + f.t1, t + f.t2 + 1))
    if isinstance(f, Eventually):
        return max(_orig(f.arg, x, tp, until)
                   for tp in range(t + f.t1, t + f.t2 + 1))
    if isinstance(f, Until):
        if until == "standard":
            return max(min(_orig(f.rhs, x, tp, until),
                           min(_orig(f.lhs, x, s, until) for s in window))
                       for tp, _, _, window in _until_windows(f, t, until))
        return min(max(_orig(f.lhs, x, tp, until),
                       max(_orig(f.rhs, x, s, until) for s in window))
                   for tp, _, _, window in _until_windows(f, t, until))
    raise TypeError(f"not a formula: {f!r}")


def eval_robustness_orig(f: Formula, traj: Trajectory, t: int = 0,
                         until: str = "standard") -> float:
    """Original (unreversed) robustness; ``>= 0`` means satisfied."""
    if until not in UNTIL_MODES:
        raise ValueError(f"until must be one of {UNTIL_MODES}")
    _check_horizon(f, traj, t)
    return _orig(f, traj.states, t, until)


def _sat(f, x, t, until) -> bool:
    if isinstance(f, Pred):
        return f.pred.g(x[t]) <= 0.0
    if isinstance(f, And):
        return all(_sat(a, x, t, until) for a in f.args)
    if isinstance(f, Or):
        return any(_sat(a, x, t, until) for a in f.args)
    if isinstance(f, Always):
        return all(_sat(f.arg, x, tp, until)
                   for tp in range(t + f.t1, t + f.t2 + 1))
    if isinstance(f, Eventually):
        return any(_sat(f.arg, x, tp, until)
                   for tp in range(t + f.t1, t + f.t2 + 1))
    if isinstance(f, Until):
        if until == "standard":
            return any(_sat(f.rhs, x, tp, until)
                       and all(_sat(f.lhs, x, s, until) for s in window)
                       for tp, _, _, window in _until_windows(f, t, until))
        return all(_sat(f.lhs, x, tp, until)
                   or any(_sat(f.rhs, x, s, until) for s in window)
                   for tp, _, _, window in _until_windows(f, t, until))
    raise TypeError(f"not a formula: {f!r}")


def satisfies(f: Formula, traj: Trajectory, t: int = 0,
              until: str = "standard") -> bool:
    """Boolean semantics, evaluated directly (no robustness involved)."""
    _check_horizon(f, traj, t)
    return _sat(f, traj.states, t, until)
