"""Robustness trees of the reversed robustness function.

A tree node is either a ``MAX`` node (conjunction / always), a ``MIN``
node (disjunction / eventually) or a ``LEAF`` holding a predicate and the
absolute time step at which it is evaluated.  ``steps[i]`` is the time
offset of child ``i`` relative to its parent, so the absolute time of a
leaf is the sum of the offsets along its path from the root (plus the
root's own time).  Until produces negative offsets for the inner window.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .formula import (Always, And, Eventually, Formula, Or, Pred, Predicate,
                      Until, formula_length)
from .robustness import UNTIL_MODES, HorizonError
from .smoothers import ExactMin, SmootherKind


class NodeKind(enum.Enum):
    MAX = "max"
    MIN = "min"
    LEAF = "leaf"


@dataclass(frozen=True)
class RobustnessTree:
    kind: NodeKind
    children: tuple["RobustnessTree", ...] = ()
    steps: tuple[int, ...] = ()
    predicate: Predicate | None = None
    t: int | None = None
    time: int = field(default=0, compare=False)

    def __post_init__(self):
        if len(self.children) != len(self.steps):
            raise ValueError("children and steps must have equal length")
        if self.kind is NodeKind.LEAF and self.children:
            raise ValueError("leaves have no children")

    @property
    def is_leaf(self) -> bool:
        return self.kind is NodeKind.LEAF

    def walk(self) -> Iterator["RobustnessTree"]:
        """Pre-order traversal; the visiting order defines node ids."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self) -> list["RobustnessTree"]:
        return [n for n in self.walk() if n.is_leaf]

    def horizon(self) -> int:
        return max(leaf.t for leaf in self.leaves())


def leaf(pred: Predicate, t: int) -> RobustnessTree:
    return RobustnessTree(NodeKind.LEAF, predicate=pred, t=t, time=t)


def node(kind: NodeKind, children, time: int, child_times) -> RobustnessTree:
    children = tuple(children)
    if len(children) == 1:
        return children[0]
    steps = tuple(int(ct - time) for ct in child_times)
    return RobustnessTree(kind, children, steps, time=time)


def _build(f: Formula, t: int, until: str) -> RobustnessTree:
    if isinstance(f, Pred):
        return leaf(f.pred, t)
    if isinstance(f, (And, Or)):
        kind = NodeKind.MAX if isinstance(f, And) else NodeKind.MIN
        return node(kind, [_build(a, t, until) for a in f.args], t,
                    [t] * len(f.args))
    if isinstance(f, (Always, Eventually)):
        kind = NodeKind.MAX if isinstance(f, Always) else NodeKind.MIN
        times = range(t + f.t1, t + f.t2 + 1)
        return node(kind, [_build(f.arg, s, until) for s in times], t, times)
    if isinstance(f, Until):
        outer, inner = ((NodeKind.MIN, NodeKind.MAX) if until == "standard"
                        else (NodeKind.MAX, NodeKind.MIN))
        branches, times = [], []
        for tp in range(t + f.t1, t + f.t2 + 1):
            if until == "standard":
                head, over, start = f.rhs, f.lhs, t
            else:
                head, over, start = f.lhs, f.rhs, t + f.t1
            window = range(start, tp + 1)
            tail = node(inner, [_build(over, s, until) for s in window],
                        start, window)
            branches.append(node(inner, [_build(head, tp, until), tail], tp,
                                 [tp, start]))
            times.append(tp)
        return node(outer, branches, t, times)
    raise TypeError(f"not a formula: {f!r}")


def build_tree(f: Formula, t0: int = 0, horizon: int | None = None,
               until: str = "standard") -> RobustnessTree:
    """Robustness tree of ``f`` evaluated at ``t0``.

    Single-argument conjunctions/disjunctions and one-step windows collapse
    into their only child, so every internal node has at least two children.
    """
    if until not in UNTIL_MODES:
        raise ValueError(f"until must be one of {UNTIL_MODES}")
    if horizon is not None and t0 + formula_length(f) > horizon:
        raise HorizonError(
            f"formula needs horizon {t0 + formula_length(f)}, got {horizon}")
    return _build(f, t0, until)


@dataclass
class TreeStats:
    n_disj: int
    n_leaves: int
    n_leaves_under_max: int
    n_leaves_under_min: int
    leaf_count_per_node: dict[int, int]
    # deepest number of MIN nodes on any root-leaf path and largest MIN arity;
    # together they bound the error of a smoothed evaluation
    min_depth: int = 0
    max_min_arity: int = 0
    # smallest leaf count over the MIN nodes (0 when there are none)
    min_disj_weight: int = 0


def tree_stats(tree: RobustnessTree) -> TreeStats:
    nodes = list(tree.walk())
    ids = {id(n): i for i, n in enumerate(nodes)}
    counts: dict[int, int] = {}
    under_max = under_min = 0
    # post-order accumulation over the pre-order list
    for n in reversed(nodes):
        if n.is_leaf:
            counts[ids[id(n)]] = 1
        else:
            counts[ids[id(n)]] = sum(counts[ids[id(c)]] for c in n.children)
            for c in n.children:
                if c.is_leaf:
                    if n.kind is NodeKind.MAX:
                        under_max += 1
                    else:
                        under_min += 1
    if tree.is_leaf:
        under_max += 1  # a bare predicate behaves as a one-child max node

    def min_depth(n):
        if n.is_leaf:
            return 0
        d = max(min_depth(c) for c in n.children)
        return d + (n.kind is NodeKind.MIN)

    arities = [len(n.children) for n in nodes if n.kind is NodeKind.MIN]
    return TreeStats(
        n_disj=sum(n.kind is NodeKind.MIN for n in nodes),
        n_leaves=sum(n.is_leaf for n in nodes),
        n_leaves_under_max=under_max,
        n_leaves_under_min=under_min,
        leaf_count_per_node=counts,
        min_depth=min_depth(tree),
        max_min_arity=max(arities, default=0),
        min_disj_weight=min((counts[i] for i, n in enumerate(nodes)
                             if n.kind is NodeKind.MIN), default=0),
    )


def node_ids(tree: RobustnessTree) -> dict[int, int]:
    """Map ``id(node)`` to its pre-order index."""
    return {id(n): i for i, n in enumerate(tree.walk())}


def eval_tree(tree: RobustnessTree, states, smoother: SmootherKind = ExactMin()
              ) -> float:
    """Evaluate the reversed robustness encoded by ``tree`` on ``states``."""
    x = np.asarray(states, dtype=float)

    def ev(n):
        if n.is_leaf:
            return n.predicate.g(x[n.t])
        vals = [ev(c) for c in n.children]
        return max(vals) if n.kind is NodeKind.MAX else smoother.min(vals)

    return ev(tree)


def node_values(tree: RobustnessTree, states, smoother: SmootherKind = ExactMin()
                ) -> dict[int, float]:
    """Value of every node, keyed by ``id(node)``."""
    x = np.asarray(states, dtype=float)
    out: dict[int, float] = {}

    def ev(n):
        if n.is_leaf:
            v = n.predicate.g(x[n.t])
        else:
            vals = [ev(c) for c in n.children]
            v = max(vals) if n.kind is NodeKind.MAX else smoother.min(vals)
        out[id(n)] = v
        return v

    ev(tree)
    return out


def leaf_multiset(tree: RobustnessTree) -> dict[tuple, int]:
    out: dict[tuple, int] = {}
    for lf in tree.leaves():
        key = (lf.predicate, lf.t)
        out[key] = out.get(key, 0) + 1
    return out


def structure(tree: RobustnessTree):
    """Hashable structural fingerprint (used for idempotence checks)."""
    if tree.is_leaf:
        return ("leaf", tree.predicate, tree.t)
    return (tree.kind.value, tree.steps,
            tuple(structure(c) for c in tree.children))
