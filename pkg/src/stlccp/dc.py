"""Decomposition of a simplified robustness tree into a DC program.

The robustness function is pulled out of the cost recursively:

* the root gets the cost variable ``s_xi`` with ``s_xi <= 0``;
* a max node bounded by ``s`` emits one affine row ``child <= s`` per child,
  where a min-node child is represented by a fresh ``s_min`` variable;
* a min node bounded by ``s`` emits one concave constraint
  ``min(args) <= s``; predicate children stay inline as affine arguments,
  max-node children are replaced by a fresh ``s_max`` variable.

Together with the dynamics and box rows this yields a linear program
except for exactly one concave constraint per min node of the tree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .robustness import Trajectory
from .simplify import same_kind_pairs
from .systems import Box, LinearSystem
from .tree import NodeKind, RobustnessTree, TreeStats, node_ids, tree_stats


class DecompositionError(ValueError):
    pass


class AuditError(AssertionError):
    pass


@dataclass(frozen=True)
class VarId:
    role: str            # state | input | sxi | smax | smin
    index: tuple[int, ...]
    ordinal: int

    def __str__(self):
        idx = ",".join(map(str, self.index))
        return f"{self.role}[{idx}]" if idx else self.role


@dataclass
class AffExpr:
    """``sum coeffs[j] * z[j] + constant`` over variable ordinals."""

    coeffs: dict[int, float] = field(default_factory=dict)
    constant: float = 0.0

    def __post_init__(self):
        self.coeffs = {int(j): float(c) for j, c in self.coeffs.items() if c != 0.0}
        self.constant = float(self.constant)

    @classmethod
    def var(cls, j: int, coef: float = 1.0) -> "AffExpr":
        return cls({j: coef})

    def __sub__(self, other: "AffExpr") -> "AffExpr":
        c = dict(self.coeffs)
        for j, v in other.coeffs.items():
            c[j] = c.get(j, 0.0) - v
        return AffExpr(c, self.constant - other.constant)

    def value(self, z) -> float:
        return float(sum(c * z[j] for j, c in self.coeffs.items()) + self.constant)

    def to_json(self) -> dict:
        return {"coeffs": {str(j): c for j, c in sorted(self.coeffs.items())},
                "constant": self.constant}


@dataclass
class ConcaveConstraint:
    """``min(args) <= bound``; ``weight`` is the leaf count of ``node_id``."""

    args: list[AffExpr]
    bound: AffExpr
    weight: int
    node_id: int

    @property
    def bound_var(self) -> int:
        (j,) = self.bound.coeffs
        return j


def _rows_to_matrix(rows: list[AffExpr], h: int):
    data, ri, ci = [], [], []
    for r, e in enumerate(rows):
        for j, c in e.coeffs.items():
            ri.append(r)
            ci.append(j)
            data.append(c)
    M = sp.csr_matrix((data, (ri, ci)), shape=(len(rows), h))
    return M, -np.array([e.constant for e in rows], dtype=float)


@dataclass
class DcProgram:
    vars: list[VarId]
    cost_linear: AffExpr
    cost_quadratic: sp.csr_matrix | None
    eq_constraints: list[AffExpr]
    eq_origin: list[str]
    ineq_constraints: list[AffExpr]
    ineq_origin: list[str]
    concave_constraints: list[ConcaveConstraint]
    top_kind: str
    tree: RobustnessTree
    stats: TreeStats
    n: int
    m: int
    T: int
    state_index: np.ndarray
    input_index: np.ndarray
    sxi_index: int
    meta: dict = field(default_factory=dict)

    @property
    def h(self) -> int:
        return len(self.vars)

    @cached_property
    def eq_matrices(self):
        """``(A_eq, b_eq)`` with rows ``A_eq z = b_eq``."""
        return _rows_to_matrix(self.eq_constraints, self.h)

    @cached_property
    def ineq_matrices(self):
        """``(G, h)`` with rows ``G z <= h``."""
        return _rows_to_matrix(self.ineq_constraints, self.h)

    @cached_property
    def concave_matrices(self):
        """Per concave constraint: ``(A_args, c_args, bound_index)``."""
        out = []
        for cc in self.concave_constraints:
            A, negc = _rows_to_matrix(cc.args, self.h)
            out.append((A, -negc, cc.bound_var))
        return out

    @cached_property
    def cost_vector(self) -> np.ndarray:
        q = np.zeros(self.h)
        for j, c in self.cost_linear.coeffs.items():
            q[j] = c
        return q

    @property
    def quad_matrix(self) -> sp.csr_matrix:
        if self.cost_quadratic is None:
            return sp.csr_matrix((self.h, self.h))
        return self.cost_quadratic

    def trajectory(self, z) -> Trajectory:
        z = np.asarray(z, dtype=float)
        return Trajectory(z[self.state_index], z[self.input_index])

    def var_roles(self, role: str) -> list[int]:
        return [v.ordinal for v in self.vars if v.role == role]

    def to_json(self) -> dict:
        return {
            "schema": "stlccp.dcprogram/1",
            "top_kind": self.top_kind,
            "n": self.n, "m": self.m, "T": self.T,
            "vars": [{"ordinal": v.ordinal, "role": v.role,
                      "index": list(v.index)} for v in self.vars],
            "cost_linear": self.cost_linear.to_json(),
            "has_quadratic_cost": self.cost_quadratic is not None,
            "eq": [dict(e.to_json(), origin=o)
                   for e, o in zip(self.eq_constraints, self.eq_origin)],
            "ineq": [dict(e.to_json(), origin=o)
                     for e, o in zip(self.ineq_constraints, self.ineq_origin)],
            "concave": [{"args": [a.to_json() for a in c.args],
                         "bound": c.bound.to_json(), "weight": c.weight,
                         "node_id": c.node_id}
                        for c in self.concave_constraints],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


def robustness_floor(tree: RobustnessTree, box: Box) -> float | None:
    """Lower bound on any node value over the box, or None if unbounded.

    Every node value is a max/min of predicate values, so it is at least the
    smallest predicate value attainable inside the box.
    """
    lo = np.array(box.x_lo)
    hi = np.array(box.x_hi)
    worst = np.inf
    for lf in tree.leaves():
        a = np.array(lf.predicate.a)
        with np.errstate(invalid="ignore"):
            terms = np.where(a > 0, a * lo, np.where(a < 0, a * hi, 0.0))
        v = terms.sum() - lf.predicate.b
        if not np.isfinite(v):
            return None
        worst = min(worst, v)
    return float(worst)


def decompose(tree: RobustnessTree, system: LinearSystem, x0, T: int,
              bounds: Box | None = None, quad_cost=None,
              floor_margin: float = 1.0, pin=None) -> DcProgram:
    """Build the DC program of a simplified robustness tree.

    ``quad_cost`` is ``(Q, R, w_q)`` and adds ``w_q * sum(x'Qx + u'Ru)``.
    Auxiliary ``s_xi``/``s_min`` variables additionally get a floor row at
    the box-implied lower bound of the robustness; the floor is redundant
    for the DC program and only keeps penalty relaxations bounded.
    ``pin`` selects the components of ``x0`` fixed by equality rows
    (default: all of them).
    """
    bad = same_kind_pairs(tree)
    if bad:
        raise DecompositionError(
            f"tree is not simplified: {len(bad)} parent/child pairs share a node kind")
    leaves = tree.leaves()
    if any(lf.t < 0 or lf.t > T for lf in leaves):
        raise DecompositionError(
            f"tree needs time steps up to {max(lf.t for lf in leaves)}, horizon is {T}")
    n, m = system.n, system.m
    x0 = np.asarray(x0, dtype=float).reshape(n)
    if not np.all(np.isfinite(x0)):
        raise DecompositionError("initial state must be finite")
    if any(lf.predicate.dim != n for lf in leaves):
        raise DecompositionError("predicate dimension does not match the system")
    box = bounds or Box.free(n, m)

    vars_: list[VarId] = []

    def new(role, *index):
        v = VarId(role, tuple(index), len(vars_))
        vars_.append(v)
        return v.ordinal

    state_index = np.array([[new("state", t, i) for i in range(n)]
                            for t in range(T + 1)], dtype=int).reshape(T + 1, n)
    input_index = np.array([[new("input", t, j) for j in range(m)]
                            for t in range(T)], dtype=int).reshape(T, m)
    sxi = new("sxi")

    eq, eq_origin, ineq, ineq_origin = [], [], [], []
    pin = np.ones(n, dtype=bool) if pin is None else np.asarray(pin, dtype=bool)
    for i in np.flatnonzero(pin):
        eq.append(AffExpr({state_index[0, i]: 1.0}, -x0[i]))
        eq_origin.append("init")
    for t in range(T):
        for i in range(n):
            c = {state_index[t + 1, i]: 1.0}
            for k in range(n):
                if system.A[i, k]:
                    c[state_index[t, k]] = c.get(state_index[t, k], 0.0) - system.A[i, k]
            for j in range(m):
                if system.B[i, j]:
                    c[input_index[t, j]] = -system.B[i, j]
            eq.append(AffExpr(c))
            eq_origin.append("dynamics")

    def add_box(index, lo, hi):
        for t in range(index.shape[0]):
            for i in range(index.shape[1]):
                if np.isfinite(hi[i]):
                    ineq.append(AffExpr({index[t, i]: 1.0}, -hi[i]))
                    ineq_origin.append("box")
                if np.isfinite(lo[i]):
                    ineq.append(AffExpr({index[t, i]: -1.0}, lo[i]))
                    ineq_origin.append("box")

    add_box(state_index, box.x_lo, box.x_hi)
    add_box(input_index, box.u_lo, box.u_hi)
    ineq.append(AffExpr({sxi: 1.0}))
    ineq_origin.append("sxi")

    stats = tree_stats(tree)
    ids = node_ids(tree)
    concave: list[ConcaveConstraint] = []
    floored = [sxi]

    def pred_expr(lf):
        c = {state_index[lf.t, i]: a for i, a in enumerate(lf.predicate.a)}
        return AffExpr(c, -lf.predicate.b)

    def bound_max(nd, s):
        for child in nd.children:
            if child.is_leaf:
                ineq.append(pred_expr(child) - AffExpr.var(s))
            else:
                sm = new("smin", ids[id(child)])
                floored.append(sm)
                ineq.append(AffExpr({sm: 1.0, s: -1.0}))
                emit_min(child, sm)
            ineq_origin.append("max")

    def emit_min(nd, s):
        args = []
        for child in nd.children:
            if child.is_leaf:
                args.append(pred_expr(child))
            else:
                sm = new("smax", ids[id(child)])
                bound_max(child, sm)
                args.append(AffExpr.var(sm))
        nid = ids[id(nd)]
        concave.append(ConcaveConstraint(args, AffExpr.var(s),
                                         stats.leaf_count_per_node[nid], nid))

    if tree.is_leaf:
        ineq.append(pred_expr(tree) - AffExpr.var(sxi))
        ineq_origin.append("max")
        top = "max"
    elif tree.kind is NodeKind.MAX:
        bound_max(tree, sxi)
        top = "max"
    else:
        emit_min(tree, sxi)
        top = "min"

    floor = robustness_floor(tree, box)
    if floor is not None:
        for j in floored:
            ineq.append(AffExpr({j: -1.0}, floor - floor_margin))
            ineq_origin.append("floor")

    P = None
    if quad_cost is not None:
        Q, R, wq = quad_cost
        Q = np.asarray(Q, dtype=float).reshape(n, n)
        R = np.asarray(R, dtype=float).reshape(m, m)
        if wq:
            h = len(vars_)
            rows, cols, data = [], [], []
            for idx_block, M, count in ((state_index, Q, T + 1), (input_index, R, T)):
                for t in range(count):
                    for a in range(M.shape[0]):
                        for b in range(M.shape[1]):
                            if M[a, b]:
                                rows.append(idx_block[t, a])
                                cols.append(idx_block[t, b])
                                data.append(2.0 * wq * M[a, b])
            P = sp.csr_matrix((data, (rows, cols)), shape=(h, h))

    return DcProgram(
        vars=vars_, cost_linear=AffExpr.var(sxi), cost_quadratic=P,
        eq_constraints=eq, eq_origin=eq_origin,
        ineq_constraints=ineq, ineq_origin=ineq_origin,
        concave_constraints=concave, top_kind=top, tree=tree, stats=stats,
        n=n, m=m, T=T, state_index=state_index, input_index=input_index,
        sxi_index=sxi, meta={"x0": x0.tolist(), "floor": floor},
    )


@dataclass
class AuditReport:
    counts: dict[str, int]
    n_concave: int
    n_disj: int
    ok: bool = True

    @property
    def concave_share(self) -> float:
        total = sum(self.counts.values()) + self.n_concave
        return self.n_concave / total if total else 0.0


def structural_audit(p: DcProgram, stats: TreeStats | None = None) -> AuditReport:
    """Check the structural facts of a decomposed program.

    * equalities only touch state/input variables (no nonaffine equalities);
    * one concave constraint per min node, weighted by its leaf count;
    * everything else is affine, and the quadratic cost (if any) is PSD and
      only involves states/inputs.
    """
    stats = stats or tree_stats(p.tree)
    physical = {v.ordinal for v in p.vars if v.role in ("state", "input")}
    for k, e in enumerate(p.eq_constraints):
        extra = set(e.coeffs) - physical
        if extra:
            raise AuditError(f"equality row {k} ({p.eq_origin[k]}) references "
                             f"auxiliary variables {sorted(extra)}")
    if len(p.concave_constraints) != stats.n_disj:
        raise AuditError(f"{len(p.concave_constraints)} concave constraints but "
                         f"{stats.n_disj} disjunctive nodes")
    seen = set()
    for cc in p.concave_constraints:
        if len(cc.args) < 2:
            raise AuditError(f"concave constraint at node {cc.node_id} has "
                             f"{len(cc.args)} argument(s)")
        if cc.weight != stats.leaf_count_per_node.get(cc.node_id):
            raise AuditError(f"weight {cc.weight} of node {cc.node_id} differs "
                             "from its leaf count")
        if cc.node_id in seen:
            raise AuditError(f"node {cc.node_id} has two concave constraints")
        seen.add(cc.node_id)
    if set(p.cost_linear.coeffs) != {p.sxi_index}:
        raise AuditError("linear cost must be exactly s_xi")
    if p.cost_quadratic is not None:
        P = p.cost_quadratic.tocoo()
        touched = set(P.row) | set(P.col)
        if touched - physical:
            raise AuditError("quadratic cost touches auxiliary variables")
        dense = P.toarray()
        if not np.allclose(dense, dense.T):
            raise AuditError("quadratic cost is not symmetric")
        if dense.size and np.linalg.eigvalsh(dense).min() < -1e-9:
            raise AuditError("quadratic cost is not PSD")
    counts: dict[str, int] = {}
    for o in p.eq_origin + p.ineq_origin:
        counts[o] = counts.get(o, 0) + 1
    return AuditReport(counts, len(p.concave_constraints), stats.n_disj)


def min_sxi_for_fixed_traj(p: DcProgram, traj: Trajectory,
                           tol: float = 1e-7) -> float:
    """Smallest feasible ``s_xi`` once states and inputs are pinned to ``traj``.

    The ``s_xi <= 0`` row and the quadratic cost are dropped.  Each concave
    constraint ``min(args) <= s`` is a disjunction over its arguments, so a
    small MILP picks one argument per constraint; the residual linear
    program with those choices fixed is then re-solved for an exact value.
    """
    x = np.asarray(traj.states, dtype=float)
    u = np.asarray(traj.inputs, dtype=float)
    if x.shape != p.state_index.shape or u.size != p.input_index.size:
        raise ValueError("trajectory shape does not match the program")
    u = u.reshape(p.input_index.shape)
    z_fix = np.full(p.h, np.nan)
    z_fix[p.state_index] = x
    z_fix[p.input_index] = u
    fixed = ~np.isnan(z_fix)
    aux = np.flatnonzero(~fixed)
    col = {j: k for k, j in enumerate(aux)}
    n_aux = len(aux)

    A_eq, b_eq = p.eq_matrices
    if A_eq.shape[0] and np.max(np.abs(A_eq[:, fixed] @ z_fix[fixed] - b_eq)) > 1e-6:
        raise ValueError("trajectory violates the dynamics or initial state")

    rows, rhs = [], []
    for e, origin in zip(p.ineq_constraints, p.ineq_origin):
        if origin == "sxi":
            continue
        const = e.constant + sum(c * z_fix[j] for j, c in e.coeffs.items() if fixed[j])
        free = {col[j]: c for j, c in e.coeffs.items() if not fixed[j]}
        if not free:
            if const > tol:
                raise ValueError(f"fixed trajectory violates a {origin} row by {const:g}")
            continue
        rows.append(free)
        rhs.append(-const)

    gvals = [lf.predicate.g(x[lf.t]) for lf in p.tree.leaves()]
    lo, hi = min(gvals) - 1.0, max(gvals) + 1.0
    big = hi - lo

    disj = []   # per concave constraint: list of (free coeffs, constant)
    for cc in p.concave_constraints:
        opts = []
        for arg in cc.args:
            d = arg - cc.bound
            const = d.constant + sum(c * z_fix[j] for j, c in d.coeffs.items() if fixed[j])
            opts.append(({col[j]: c for j, c in d.coeffs.items() if not fixed[j]}, const))
        disj.append(opts)

    n_bin = sum(len(o) for o in disj)
    nv = n_aux + n_bin
    c = np.zeros(nv)
    c[col[p.sxi_index]] = 1.0

    def build(extra_rows, extra_rhs, extra_lo=None):
        data, ri, ci = [], [], []
        for r, coeffs in enumerate(extra_rows):
            for k, v in coeffs.items():
                ri.append(r)
                ci.append(k)
                data.append(v)
        M = sp.csr_matrix((data, (ri, ci)), shape=(len(extra_rows), nv))
        lo_v = np.full(len(extra_rows), -np.inf) if extra_lo is None else extra_lo
        return LinearConstraint(M, lo_v, np.asarray(extra_rhs, dtype=float))

    # MILP: arg_i - bound <= big * (1 - delta_i),  sum_i delta_i >= 1
    mrows, mrhs, mlo = list(rows), list(rhs), [-np.inf] * len(rows)
    k = n_aux
    for opts in disj:
        chooser = {}
        for coeffs, const in opts:
            r = dict(coeffs)
            r[k] = big
            mrows.append(r)
            mrhs.append(big - const)
            mlo.append(-np.inf)
            chooser[k] = 1.0
            k += 1
        mrows.append(chooser)
        mrhs.append(np.inf)
        mlo.append(1.0)
    integrality = np.r_[np.zeros(n_aux), np.ones(n_bin)]
    bounds = Bounds(np.r_[np.full(n_aux, lo), np.zeros(n_bin)],
                    np.r_[np.full(n_aux, hi), np.ones(n_bin)])
    cons = build(mrows, mrhs, np.array(mlo))
    res = milp(c, constraints=cons, integrality=integrality, bounds=bounds)
    if not res.success:
        # HiGHS presolve occasionally declares small feasible instances
        # infeasible; the selection is re-solved below, so retry without it
        res = milp(c, constraints=cons, integrality=integrality, bounds=bounds,
                   options={"presolve": False})
    if not res.success:
        raise RuntimeError(f"selection MILP failed: {res.message}")

    # residual LP with the selected argument of every concave constraint
    lrows, lrhs = list(rows), list(rhs)
    k = n_aux
    for opts in disj:
        pick = int(np.argmax(res.x[k:k + len(opts)]))
        coeffs, const = opts[pick]
        lrows.append(coeffs)
        lrhs.append(-const)
        k += len(opts)
    A_ub = sp.csr_matrix((len(lrows), n_aux))
    if lrows:
        data, ri, ci = [], [], []
        for r, coeffs in enumerate(lrows):
            for kk, v in coeffs.items():
                ri.append(r)
                ci.append(kk)
                data.append(v)
        A_ub = sp.csr_matrix((data, (ri, ci)), shape=(len(lrows), n_aux))
    lp = linprog(c[:n_aux], A_ub=A_ub, b_ub=np.asarray(lrhs, dtype=float),
                 bounds=list(zip(np.full(n_aux, lo), np.full(n_aux, hi))),
                 method="highs")
    if not lp.success:
        raise RuntimeError(f"residual LP failed: {lp.message}")
    return float(lp.x[col[p.sxi_index]])
