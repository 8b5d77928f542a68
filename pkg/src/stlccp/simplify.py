"""Fusion of consecutive same-type nodes of a robustness tree.

``simplify`` repeats a single top-down fusion pass until nothing changes.
A non-leaf child whose kind equals its parent's is removed and its
children are appended to the parent, each with its step shifted by the
removed child's step.  ``max``/``min`` are associative, so the exact
robustness value is unchanged.
"""

from __future__ import annotations

from .tree import NodeKind, RobustnessTree


def simplify_once(tree: RobustnessTree) -> tuple[RobustnessTree, bool]:
    if tree.is_leaf:
        return tree, False
    changed = False
    kids: list[RobustnessTree] = []
    steps: list[int] = []
    for child, step in zip(tree.children, tree.steps):
        if not child.is_leaf and child.kind is tree.kind:
            kids.extend(child.children)
            steps.extend(s + step for s in child.steps)
            changed = True
        else:
            kids.append(child)
            steps.append(step)
    out = []
    for child in kids:
        new, ch = simplify_once(child)
        out.append(new)
        changed = changed or ch
    if not changed:
        return tree, False
    return RobustnessTree(tree.kind, tuple(out), tuple(steps),
                          time=tree.time), True


def simplify(tree: RobustnessTree) -> RobustnessTree:
    changed = True
    while changed:
        tree, changed = simplify_once(tree)
    return tree


def same_kind_pairs(tree: RobustnessTree) -> list[tuple[RobustnessTree, RobustnessTree]]:
    """Parent-child pairs of internal nodes that share a node kind."""
    bad = []
    for n in tree.walk():
        for c in n.children:
            if not c.is_leaf and c.kind is n.kind:
                bad.append((n, c))
    return bad


def is_simplified(tree: RobustnessTree) -> bool:
    return not same_kind_pairs(tree)


__all__ = ["simplify", "simplify_once", "is_simplified", "same_kind_pairs",
           "NodeKind"]
