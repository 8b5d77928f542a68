"""Discrete-time linear systems and box constraints."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LinearSystem:
    """``x_{t+1} = A x_t + B u_t``."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float).reshape(A.shape[0], -1)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def step(self, x, u) -> np.ndarray:
        return self.A @ np.asarray(x, dtype=float) + self.B @ np.asarray(u, dtype=float)

    def rollout(self, x0, inputs) -> np.ndarray:
        inputs = np.asarray(inputs, dtype=float).reshape(-1, self.m)
        xs = [np.asarray(x0, dtype=float)]
        for u in inputs:
            xs.append(self.step(xs[-1], u))
        return np.array(xs)

    def __eq__(self, other):
        return (isinstance(other, LinearSystem)
                and np.array_equal(self.A, other.A)
                and np.array_equal(self.B, other.B))

    def __hash__(self):
        return hash((self.A.tobytes(), self.B.tobytes()))


def double_integrator() -> LinearSystem:
    """Planar double integrator with state ``[px, py, vx, vy]``, input ``[ax, ay]``."""
    I2, Z2 = np.eye(2), np.zeros((2, 2))
    return LinearSystem(np.block([[I2, I2], [Z2, I2]]), np.vstack([Z2, I2]))


@dataclass(frozen=True)
class Box:
    """Per-coordinate interval bounds on states and inputs (``inf`` = free)."""

    x_lo: tuple[float, ...]
    x_hi: tuple[float, ...]
    u_lo: tuple[float, ...]
    u_hi: tuple[float, ...]

    def __post_init__(self):
        for name in ("x_lo", "x_hi", "u_lo", "u_hi"):
            object.__setattr__(self, name,
                               tuple(float(v) for v in getattr(self, name)))
        if len(self.x_lo) != len(self.x_hi) or len(self.u_lo) != len(self.u_hi):
            raise ValueError("lower and upper bounds differ in length")
        if any(lo > hi for lo, hi in zip(self.x_lo + self.u_lo,
                                         self.x_hi + self.u_hi)):
            raise ValueError("box has a lower bound above its upper bound")

    @classmethod
    def free(cls, n: int, m: int) -> "Box":
        inf = float("inf")
        return cls((-inf,) * n, (inf,) * n, (-inf,) * m, (inf,) * m)

    def contains(self, states, inputs, tol: float = 1e-7) -> bool:
        x = np.asarray(states, dtype=float)
        u = np.asarray(inputs, dtype=float)
        ok = np.all(x >= np.array(self.x_lo) - tol) and np.all(x <= np.array(self.x_hi) + tol)
        if u.size:
            ok = ok and np.all(u >= np.array(self.u_lo) - tol) and np.all(u <= np.array(self.u_hi) + tol)
        return bool(ok)
