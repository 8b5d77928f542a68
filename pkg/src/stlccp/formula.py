"""STL formulas in negation normal form.

Formulas are immutable trees of frozen dataclasses.  Negation does not
appear anywhere: a negated predicate is simply another affine predicate,
and the complement of a rectangle is a disjunction of half-planes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


class FormulaError(ValueError):
    """Raised for malformed formulas (bad intervals, bad dimensions)."""


@dataclass(frozen=True)
class Predicate:
    """Affine predicate ``g(x) = a.x - b``; satisfied when ``g(x) <= 0``."""

    a: tuple[float, ...]
    b: float
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", float(self.b))

    @property
    def dim(self) -> int:
        return len(self.a)

    def g(self, x) -> float:
        return float(np.dot(self.a, x) - self.b)

    def negated(self, label: str | None = None) -> "Predicate":
        # not(a.x - b <= 0)  ->  -a.x + b <= 0 (boundary shared by convention)
        return Predicate(tuple(-v for v in self.a), -self.b,
                         label if label is not None else f"!{self.label}")

    def __str__(self):
        if self.label:
            return self.label
        terms = " + ".join(f"{c:g}*x{i}" for i, c in enumerate(self.a) if c)
        return f"({terms or '0'} <= {self.b:g})"


@dataclass(frozen=True)
class Pred:
    pred: Predicate

    def __str__(self):
        return str(self.pred)


@dataclass(frozen=True)
class And:
    args: tuple["Formula", ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if not self.args:
            raise FormulaError("And needs at least one argument")

    def __str__(self):
        return "(" + " & ".join(map(str, self.args)) + ")"


@dataclass(frozen=True)
class Or:
    args: tuple["Formula", ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if not self.args:
            raise FormulaError("Or needs at least one argument")

    def __str__(self):
        return "(" + " | ".join(map(str, self.args)) + ")"


def _check_interval(t1, t2):
    if int(t1) != t1 or int(t2) != t2:
        raise FormulaError(f"interval bounds must be integers, got [{t1},{t2}]")
    if t1 < 0:
        raise FormulaError(f"negative interval bound in [{t1},{t2}]")
    if not t1 < t2:
        raise FormulaError(f"interval [{t1},{t2}] must satisfy t1 < t2")


@dataclass(frozen=True)
class Always:
    t1: int
    t2: int
    arg: "Formula"

    def __post_init__(self):
        _check_interval(self.t1, self.t2)

    def __str__(self):
        return f"G[{self.t1},{self.t2}] {self.arg}"


@dataclass(frozen=True)
class Eventually:
    t1: int
    t2: int
    arg: "Formula"

    def __post_init__(self):
        _check_interval(self.t1, self.t2)

    def __str__(self):
        return f"F[{self.t1},{self.t2}] {self.arg}"


@dataclass(frozen=True)
class Until:
    t1: int
    t2: int
    lhs: "Formula"
    rhs: "Formula"

    def __post_init__(self):
        _check_interval(self.t1, self.t2)

    def __str__(self):
        return f"({self.lhs} U[{self.t1},{self.t2}] {self.rhs})"


Formula = Union[Pred, And, Or, Always, Eventually, Until]


def conj(*args: Formula) -> Formula:
    """n-ary conjunction; a single argument is returned unchanged."""
    return args[0] if len(args) == 1 else And(tuple(args))


def disj(*args: Formula) -> Formula:
    return args[0] if len(args) == 1 else Or(tuple(args))


def formula_length(f: Formula) -> int:
    """Horizon needed to evaluate ``f`` at time 0."""
    if isinstance(f, Pred):
        return 0
    if isinstance(f, (And, Or)):
        return max(formula_length(a) for a in f.args)
    if isinstance(f, (Always, Eventually)):
        return f.t2 + formula_length(f.arg)
    if isinstance(f, Until):
        return f.t2 + max(formula_length(f.lhs), formula_length(f.rhs))
    raise TypeError(f"not a formula: {f!r}")


def predicates(f: Formula) -> list[Predicate]:
    """All predicates in ``f`` in left-to-right order (with repeats)."""
    if isinstance(f, Pred):
        return [f.pred]
    if isinstance(f, (And, Or)):
        return [p for a in f.args for p in predicates(a)]
    if isinstance(f, (Always, Eventually)):
        return predicates(f.arg)
    if isinstance(f, Until):
        return predicates(f.lhs) + predicates(f.rhs)
    raise TypeError(f"not a formula: {f!r}")


def check_dimension(f: Formula, n: int) -> None:
    for p in predicates(f):
        if p.dim != n:
            raise FormulaError(
                f"predicate {p} has dimension {p.dim}, expected {n}")


def depth(f: Formula) -> int:
    if isinstance(f, Pred):
        return 0
    if isinstance(f, (And, Or)):
        return 1 + max(depth(a) for a in f.args)
    if isinstance(f, (Always, Eventually)):
        return 1 + depth(f.arg)
    return 1 + max(depth(f.lhs), depth(f.rhs))


# JSON AST mirror ---------------------------------------------------------

def to_json(f: Formula) -> dict:
    if isinstance(f, Pred):
        return {"kind": "pred", "a": list(f.pred.a), "b": f.pred.b,
                "label": f.pred.label}
    if isinstance(f, And):
        return {"kind": "and", "args": [to_json(a) for a in f.args]}
    if isinstance(f, Or):
        return {"kind": "or", "args": [to_json(a) for a in f.args]}
    if isinstance(f, Always):
        return {"kind": "always", "t1": f.t1, "t2": f.t2, "arg": to_json(f.arg)}
    if isinstance(f, Eventually):
        return {"kind": "eventually", "t1": f.t1, "t2": f.t2,
                "arg": to_json(f.arg)}
    if isinstance(f, Until):
        return {"kind": "until", "t1": f.t1, "t2": f.t2,
                "lhs": to_json(f.lhs), "rhs": to_json(f.rhs)}
    raise TypeError(f"not a formula: {f!r}")


def from_json(d: dict) -> Formula:
    try:
        kind = d["kind"]
        if kind == "pred":
            return Pred(Predicate(tuple(d["a"]), d["b"], d.get("label", "")))
        if kind == "and":
            return And(tuple(from_json(a) for a in d["args"]))
        if kind == "or":
            return Or(tuple(from_json(a) for a in d["args"]))
        if kind == "always":
            return Always(int(d["t1"]), int(d["t2"]), from_json(d["arg"]))
        if kind == "eventually":
            return Eventually(int(d["t1"]), int(d["t2"]), from_json(d["arg"]))
        if kind == "until":
            return Until(int(d["t1"]), int(d["t2"]), from_json(d["lhs"]),
                         from_json(d["rhs"]))
    except (KeyError, TypeError) as exc:
        raise FormulaError(f"malformed formula JSON: {exc}") from exc
    raise FormulaError(f"unknown formula kind {kind!r}")
