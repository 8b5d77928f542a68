"""Scenario to solution: build the tree, simplify, decompose, solve."""

from __future__ import annotations

from dataclasses import dataclass

from .ccp import CcpConfig, SolveResult, solve
from .dc import DcProgram, decompose
from .formula import Formula
from .qp import QpBackend
from .scenarios import Scenario, build_scenario_spec
from .simplify import simplify
from .tree import RobustnessTree, build_tree


@dataclass
class Prepared:
    scenario: Scenario
    formula: Formula
    tree: RobustnessTree
    program: DcProgram
    until: str


def prepare(s: Scenario, until: str = "standard") -> Prepared:
    f = build_scenario_spec(s)
    tree = simplify(build_tree(f, horizon=s.T, until=until))
    p = decompose(tree, s.system, s.x0, s.T, s.bounds, s.quad_cost, pin=s.pin_mask)
    return Prepared(s, f, tree, p, until)


def synthesize(s: Scenario, cfg: CcpConfig, until: str = "standard",
               backend: QpBackend | None = None) -> tuple[Prepared, SolveResult]:
    prep = prepare(s, until)
    return prep, solve(prep.program, cfg, backend)
