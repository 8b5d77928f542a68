"""Smooth approximations of ``min``.

Two families are provided:

* ``mellowmin``: ``-(1/k) log((1/r) sum exp(-k a_i))``, a concave,
  strictly increasing *over*-approximation of ``min`` with error at most
  ``log(r)/k``.
* ``lse_min``: ``-(1/k) log(sum exp(-k a_i))``, a concave *under*-
  approximation of ``min`` with the same error bound.

Every exp-sum is shifted by ``min(a)`` so that large ``k`` cannot overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _check(a, k):
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("smoothers need a nonempty 1-d vector")
    if not (k > 0 and math.isfinite(k)):
        raise ValueError(f"smoothing parameter must be positive and finite, got {k}")
    return a


def mellowmin(a, k: float) -> float:
    a = _check(a, k)
    m = a.min()
    # log(mean(exp(-k(a-m)))) via expm1/log1p keeps precision for tiny k
    s = np.mean(np.expm1(-k * (a - m)))
    return float(m - math.log1p(s) / k)


def mellowmin_grad(a, k: float) -> np.ndarray:
    """Softmax weights ``exp(-k a_i) / sum_j exp(-k a_j)``; positive, sum 1."""
    a = _check(a, k)
    w = np.exp(-k * (a - a.min()))
    return w / w.sum()


def mellowmin_hessian(a, k: float) -> np.ndarray:
    p = mellowmin_grad(a, k)
    return -k * (np.diag(p) - np.outer(p, p))


def lse_max(a, k: float) -> float:
    a = _check(a, k)
    m = a.max()
    return float(m + math.log(np.sum(np.exp(k * (a - m)))) / k)


def lse_min(a, k: float) -> float:
    return -lse_max(-np.asarray(a, dtype=float), k)


def lse_min_grad(a, k: float) -> np.ndarray:
    # identical weights to mellowmin: the two differ by the constant log(r)/k
    return mellowmin_grad(a, k)


@dataclass
class HessianReport:
    k: float
    quad_forms: np.ndarray
    lower_bounds: np.ndarray
    ok: bool


def mellowmin_hessian_bound_check(a, k: float, v=None, n_dirs: int = 16,
                                  rng=None, tol: float = 1e-8) -> HessianReport:
    """Check ``-k |v|^2 <= v' H v <= 0`` for the analytic mellowmin Hessian.

    ``v`` may be a single direction or a stack of directions (rows); when
    omitted, ``n_dirs`` random unit vectors are drawn.
    """
    a = _check(a, k)
    if v is None:
        rng = np.random.default_rng(rng)
        v = rng.standard_normal((n_dirs, a.size))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
    v = np.atleast_2d(np.asarray(v, dtype=float))
    H = mellowmin_hessian(a, k)
    q = np.einsum("ij,jk,ik->i", v, H, v)
    lo = -k * np.sum(v * v, axis=1)
    ok = bool(np.all(q <= tol) and np.all(q >= lo - tol))
    return HessianReport(k, q, lo, ok)


# Smoother kinds ------------------------------------------------------------

@dataclass(frozen=True)
class ExactMin:
    name: str = field(default="exact", init=False)

    def min(self, a) -> float:
        return float(np.min(a))


@dataclass(frozen=True)
class LseMin:
    k: float = 10.0
    name: str = field(default="lse", init=False)

    def __post_init__(self):
        _check([0.0], self.k)

    def min(self, a) -> float:
        return lse_min(a, self.k)

    def grad(self, a) -> np.ndarray:
        return lse_min_grad(a, self.k)


@dataclass(frozen=True)
class Mellowmin:
    k: float = 1000.0
    name: str = field(default="mellowmin", init=False)

    def __post_init__(self):
        _check([0.0], self.k)

    def min(self, a) -> float:
        return mellowmin(a, self.k)

    def grad(self, a) -> np.ndarray:
        return mellowmin_grad(a, self.k)


SmootherKind = ExactMin | LseMin | Mellowmin
