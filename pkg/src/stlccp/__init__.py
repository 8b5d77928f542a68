"""STL trajectory synthesis by DC decomposition and tree-weighted penalty CCP."""

from .ccp import CcpConfig, SolveResult, run_ccp, warm_start_pipeline
from .dc import DcProgram, decompose, min_sxi_for_fixed_traj, structural_audit
from .formula import (Always, And, Eventually, Or, Pred, Predicate, Until,
                      formula_length)
from .parser import ParseError, parse_formula
from .qp import QpProblem, QpSolution, solve_qp
from .robustness import (Trajectory, eval_robustness_orig, eval_robustness_rev,
                         satisfies)
from .simplify import simplify
from .smoothers import ExactMin, LseMin, Mellowmin, lse_min, mellowmin
from .systems import Box, LinearSystem, double_integrator
from .tree import build_tree, tree_stats

__version__ = "0.1.0"

__all__ = [
    "Always", "And", "Box", "CcpConfig", "DcProgram", "Eventually", "ExactMin",
    "LinearSystem", "LseMin", "Mellowmin", "Or", "ParseError", "Pred",
    "Predicate", "QpProblem", "QpSolution", "SolveResult", "Trajectory", "Until",
    "build_tree", "decompose", "double_integrator", "eval_robustness_orig",
    "eval_robustness_rev", "formula_length", "lse_min", "mellowmin",
    "min_sxi_for_fixed_traj", "parse_formula", "run_ccp", "satisfies",
    "simplify", "solve_qp", "structural_audit", "tree_stats",
    "warm_start_pipeline",
]
