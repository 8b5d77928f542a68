"""Tree-weighted penalty convex-concave procedure.

Every concave constraint ``min(args) <= bound`` of a DC program is
smoothed, linearized at the current iterate and relaxed with a penalty
variable ``s_j >= 0``:

    smin(v) + sum_i w_i (a_i(z') - v_i) - bound(z') <= s_j

The penalty ``tau * weight_j * s_j`` enters the cost, where ``weight_j`` is
the leaf count of the min node (TWP), the smallest leaf count (Normal), or
an exponential blend of the two (Decay).  ``tau`` grows geometrically up to
``tau_max``.  The smoothed min is concave, so each linearization is a
global over-estimator and the relaxed subproblem is convex.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .dc import AffExpr, ConcaveConstraint, DcProgram
from .qp import (INFEASIBLE, UNBOUNDED, QpBackend, QpProblem, QpTolerances,
                 WarmStart, solve_qp)
from .robustness import Trajectory
from .smoothers import ExactMin, LseMin, Mellowmin, SmootherKind
from .tree import TreeStats, eval_tree, node_ids, node_values

log = logging.getLogger("stlccp.ccp")

MODES = ("twp", "normal", "decay")
CONVERGED = "Converged"
MAX_ITER_EXCEEDED = "MaxIterExceeded"
SUBPROBLEM_FAILED = "SubproblemFailed"


class CcpError(RuntimeError):
    def __init__(self, msg, stage: str | None = None):
        super().__init__(f"[{stage}] {msg}" if stage else msg)
        self.stage = stage


@dataclass(frozen=True)
class CcpConfig:
    tau0: float = 5e-3
    mu: float = 2.0
    tau_max: float = 1e3
    s_terminal: float = 1e-5
    cost_eps: float = 1e-2
    max_iter: int = 25
    mode: str = "twp"
    decay_r: float = 0.2
    smoother: SmootherKind = field(default_factory=Mellowmin)
    seed: int = 0
    sigma: float = 0.1
    warm_start: bool = False
    k_lse: float = 10.0
    k_mellow: float = 1000.0
    qp_tol: QpTolerances = field(default_factory=QpTolerances)

    def __post_init__(self):
        if not self.tau0 > 0:
            raise ValueError("tau0 must be positive")
        if not self.mu > 1:
            raise ValueError("mu must exceed 1")
        if self.tau_max < self.tau0:
            raise ValueError("tau_max must be at least tau0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    def tau(self, i: int) -> float:
        """Penalty weight at (0-based) iteration ``i``."""
        return min(self.mu ** i * self.tau0, self.tau_max)


@dataclass
class IterRecord:
    iter: int
    tau: float
    cost: float
    max_penalty: float
    qp_status: str
    qp_iters: int
    wall_ms: float
    sxi: float

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in
                ("iter", "tau", "cost", "max_penalty", "qp_status", "qp_iters",
                 "wall_ms", "sxi")}


@dataclass
class CcpState:
    z: np.ndarray
    tau: float
    iter: int = 0
    prev_cost: float | None = None
    history: list[IterRecord] = field(default_factory=list)
    warm: WarmStart | None = None


@dataclass
class SolveResult:
    trajectory: Trajectory
    robustness_orig: float | None
    status: str
    iterations: int
    history: list[IterRecord]
    z: np.ndarray
    sxi: float
    max_penalty: float
    certified: bool
    smoother: str
    wall_ms: float
    tau: float = 0.0
    cost: float | None = None
    stage1: "SolveResult | None" = None
    message: str = ""

    @property
    def success(self) -> bool:
        return (self.status == CONVERGED and self.robustness_orig is not None
                and self.robustness_orig >= 0.0)

    def history_jsonl(self) -> str:
        return "".join(json.dumps(r.to_json()) + "\n" for r in self.history)


# smoothed min over contiguous groups ------------------------------------

def _group_smin(v, starts, sizes, smoother):
    """Smoothed min per group and the softmax weights of every entry."""
    k = smoother.k
    m = np.minimum.reduceat(v, starts)
    rep = np.repeat(m, sizes)
    e = np.exp(-k * (v - rep))
    S = np.add.reduceat(e, starts)
    w = e / np.repeat(S, sizes)
    if isinstance(smoother, Mellowmin):
        val = m - np.log(S / sizes) / k
    else:
        val = m - np.log(S) / k
    return val, w


def _require_smooth(smoother):
    if not isinstance(smoother, (LseMin, Mellowmin)):
        raise ValueError("linearization needs a smooth min (LseMin or Mellowmin)")


def linearize_concave(c: ConcaveConstraint, z, smoother: SmootherKind) -> AffExpr:
    """First-order expansion of ``smin(args) - bound`` at ``z``.

    The returned expression ``r(z')`` is affine and ``r(z') <= s_j`` is the
    majorized row.  Because the smoothed min is concave, ``r`` over-estimates
    ``smin(args(z')) - bound(z')`` everywhere and matches it at ``z``.
    """
    _require_smooth(smoother)
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("linearization point must be finite")
    v = np.array([a.value(z) for a in c.args])
    w = smoother.grad(v)
    g0 = smoother.min(v)
    coeffs: dict[int, float] = {}
    const = g0
    for wi, a, vi in zip(w, c.args, v):
        for j, cj in a.coeffs.items():
            coeffs[j] = coeffs.get(j, 0.0) + wi * cj
        const += wi * (a.constant - vi)
    return AffExpr(coeffs, const) - c.bound


def penalty_weight(c: ConcaveConstraint, mode: str, iter: int, stats: TreeStats,
                   r: float = 0.2) -> float:
    """Penalty weight of ``c`` at (1-based) iteration ``iter``."""
    if iter < 1:
        raise ValueError("iter is 1-based")
    n_min = stats.min_disj_weight or c.weight
    if mode == "twp":
        return float(c.weight)
    if mode == "normal":
        return float(n_min)
    if mode == "decay":
        return float((c.weight - n_min) * math.exp(-r * (iter - 1)) + n_min)
    raise ValueError(f"unknown mode {mode!r}")


class _Assembler:
    """Caches the static rows of the subproblem; only concave rows change."""

    def __init__(self, p: DcProgram):
        self.p = p
        self.h = p.h
        self.nc = len(p.concave_constraints)
        self.nz = self.h + self.nc
        A_eq, b_eq = p.eq_matrices
        G, hv = p.ineq_matrices
        pad = sp.csr_matrix((G.shape[0], self.nc))
        self.A_eq = sp.hstack([A_eq, sp.csr_matrix((A_eq.shape[0], self.nc))], format="csr")
        self.b_eq = b_eq
        # static rows: program rows and -s_j <= 0
        neg_s = sp.hstack([sp.csr_matrix((self.nc, self.h)), -sp.identity(self.nc)],
                          format="csr")
        self.G_static = sp.vstack([sp.hstack([G, pad]), neg_s], format="csr")
        self.h_static = np.r_[hv, np.zeros(self.nc)]
        P = p.quad_matrix
        self.P = sp.block_diag([P, sp.csr_matrix((self.nc, self.nc))], format="csc")
        self.q_base = np.r_[p.cost_vector, np.zeros(self.nc)]
        mats = p.concave_matrices
        self.sizes = np.array([M.shape[0] for M, _, _ in mats], dtype=int)
        self.starts = np.r_[0, np.cumsum(self.sizes)[:-1]].astype(int)
        if self.nc:
            self.A_args = sp.vstack([M for M, _, _ in mats], format="csr")
            self.c_args = np.concatenate([c for _, c, _ in mats])
        else:
            self.A_args = sp.csr_matrix((0, self.h))
            self.c_args = np.zeros(0)
        self.bound_idx = np.array([b for _, _, b in mats], dtype=int)
        self.group = np.repeat(np.arange(self.nc), self.sizes)
        # rows "child - s_max <= 0" grouped by their s_max variable
        smax = np.array(p.var_roles("smax"), dtype=int)
        rows, owner = [], []
        if smax.size:
            Gc = sp.csc_matrix(G)
            is_max = np.array([o == "max" for o in p.ineq_origin])
            for j in smax:
                col = Gc[:, j]
                r = col.indices[(col.data == -1.0) & is_max[col.indices]]
                rows.extend(r)
                owner.extend([j] * len(r))
        order = np.argsort(owner, kind="stable")
        self.tight_rows = np.array(rows, dtype=int)[order]
        owner = np.array(owner, dtype=int)[order]
        self.tight_vars, self.tight_starts = np.unique(owner, return_index=True)
        self.G_prog, self.h_prog = G, hv

    def tighten(self, z) -> np.ndarray:
        """Lower every ``s_max`` to the largest of its children.

        Rows that bound an ``s_max`` from below stay feasible, and since
        ``s_max`` only enters concave constraints as an argument of a
        monotone min, those stay feasible too; the cost is unchanged.
        """
        if not self.tight_vars.size:
            return z
        z = z.copy()
        r = self.G_prog[self.tight_rows] @ z[:self.h] - self.h_prog[self.tight_rows]
        child = r + z[np.repeat(self.tight_vars, np.diff(np.r_[self.tight_starts, r.size]))]
        z[self.tight_vars] = np.maximum.reduceat(child, self.tight_starts)
        return z

    def concave_rows(self, z, smoother):
        """Linearized rows ``G_c z' <= h_c`` (penalty column included)."""
        v = self.A_args @ z[:self.h] + self.c_args
        val, w = _group_smin(v, self.starts, self.sizes, smoother)
        W = sp.csr_matrix((w, (self.group, np.arange(w.size))),
                          shape=(self.nc, w.size))
        lin = W @ self.A_args
        bnd = sp.csr_matrix((-np.ones(self.nc), (np.arange(self.nc), self.bound_idx)),
                            shape=(self.nc, self.h))
        Gc = sp.hstack([lin + bnd, -sp.identity(self.nc)], format="csr")
        # smin(v) + w'(A z' + c - v) - bound <= s  =>  w'A z' - bound - s <= w'v - w'c - smin
        hc = W @ (v - self.c_args) - val
        return Gc, hc

    def smoothed_violation(self, z, smoother):
        v = self.A_args @ z[:self.h] + self.c_args
        val, _ = _group_smin(v, self.starts, self.sizes, smoother)
        return val - z[self.bound_idx]


def assemble_subproblem(p: DcProgram, state: CcpState, cfg: CcpConfig,
                        _asm: _Assembler | None = None) -> QpProblem:
    """Convex subproblem at ``state``: program rows, linearized rows, penalties."""
    asm = _asm or _Assembler(p)
    q = asm.q_base.copy()
    it = state.iter + 1
    for j, c in enumerate(p.concave_constraints):
        q[asm.h + j] = state.tau * penalty_weight(c, cfg.mode, it, p.stats, cfg.decay_r)
    if asm.nc:
        _require_smooth(cfg.smoother)
        Gc, hc = asm.concave_rows(state.z, cfg.smoother)
        G = sp.vstack([asm.G_static, Gc], format="csr")
        h = np.r_[asm.h_static, hc]
    else:
        G, h = asm.G_static, asm.h_static
    return QpProblem(asm.P, q, asm.A_eq, asm.b_eq, G, h)


def initial_point(p: DcProgram, cfg: CcpConfig, smoother: SmootherKind | None = None,
                  ) -> np.ndarray:
    """Random trajectory around zero plus bottom-up smoothed auxiliaries."""
    smoother = smoother or cfg.smoother
    rng = np.random.default_rng(cfg.seed)
    z = np.zeros(p.h + len(p.concave_constraints))
    x = rng.normal(0.0, cfg.sigma, size=p.state_index.shape)
    x[0] = p.meta["x0"]
    u = rng.normal(0.0, cfg.sigma, size=p.input_index.shape)
    z[p.state_index] = x
    z[p.input_index] = u
    fill_auxiliaries(p, z, smoother)
    return z


def fill_auxiliaries(p: DcProgram, z, smoother) -> None:
    """Set ``s_xi``/``s_max``/``s_min`` to the smoothed node values at ``z``."""
    x = z[p.state_index]
    vals = node_values(p.tree, x, smoother)
    by_id = {i: vals[key] for key, i in node_ids(p.tree).items()}
    for v in p.vars:
        if v.role in ("smax", "smin"):
            z[v.ordinal] = by_id[v.index[0]]
    z[p.sxi_index] = eval_tree(p.tree, x, smoother)
    nc = len(p.concave_constraints)
    if nc and len(z) > p.h:
        z[p.h:] = 0.0


def dc_cost(p: DcProgram, z) -> float:
    zz = z[:p.h]
    c = float(p.cost_vector @ zz)
    if p.cost_quadratic is not None:
        c += 0.5 * float(zz @ (p.cost_quadratic @ zz))
    return c


def run_ccp(p: DcProgram, cfg: CcpConfig, z0=None, tau_start: float | None = None,
            prev_cost: float | None = None,
            backend: QpBackend | None = None) -> SolveResult:
    """One penalty CCP run on ``p``.

    ``z0`` overrides the random initialization (used by the warm start);
    ``tau_start`` and ``prev_cost`` continue a previous run's schedule.
    """
    t_start = time.perf_counter()
    asm = _Assembler(p)
    if asm.nc:
        _require_smooth(cfg.smoother)
    if z0 is None:
        z = initial_point(p, cfg)
    else:
        z = np.zeros(asm.nz)
        z0 = np.asarray(z0, dtype=float)
        z[:min(len(z0), asm.nz)] = z0[:asm.nz]
    i0 = 0
    if tau_start is not None:
        i0 = max(0, int(round(math.log(tau_start / cfg.tau0, cfg.mu))))
    state = CcpState(z=z, tau=cfg.tau(i0), prev_cost=prev_cost)
    status, message = MAX_ITER_EXCEEDED, ""
    for it in range(cfg.max_iter):
        t_it = time.perf_counter()
        qp = assemble_subproblem(p, state, cfg, asm)
        sol = solve_qp(qp, cfg.qp_tol, state.warm, backend)
        if sol.status in (INFEASIBLE, UNBOUNDED) or not np.all(np.isfinite(sol.z)):
            status = SUBPROBLEM_FAILED
            message = f"subproblem {it + 1}: {sol.status}"
            state.history.append(IterRecord(it + 1, state.tau, math.nan, math.nan,
                                            sol.status, sol.iterations,
                                            1e3 * (time.perf_counter() - t_it), math.nan))
            break
        state.z = asm.tighten(sol.z)
        state.warm = WarmStart(sol.z, sol.y_eq, sol.y_ineq)
        cost = dc_cost(p, sol.z)
        max_pen = float(np.max(sol.z[asm.h:], initial=0.0))
        rec = IterRecord(it + 1, state.tau, cost, max_pen, sol.status, sol.iterations,
                         1e3 * (time.perf_counter() - t_it), float(sol.z[p.sxi_index]))
        state.history.append(rec)
        log.debug("iter %d tau %.3g cost %.6g max_s %.3g qp %s/%d", rec.iter, rec.tau,
                  cost, max_pen, sol.status, sol.iterations)
        done = asm.nc == 0 or (
            max_pen <= cfg.s_terminal and state.prev_cost is not None
            and abs(cost - state.prev_cost) <= cfg.cost_eps)
        state.prev_cost = cost
        state.iter = it + 1
        if done:
            status = CONVERGED
            break
        state.tau = cfg.tau(i0 + it + 1)
    return _result(p, asm, cfg, state, state.z, status, message,
                   1e3 * (time.perf_counter() - t_start))


def _result(p, asm, cfg, state, z, status, message, wall_ms) -> SolveResult:
    traj = p.trajectory(z[:p.h])
    rob = None
    if status != SUBPROBLEM_FAILED:
        rob = -eval_tree(p.tree, traj.states, ExactMin())
    max_pen = float(np.max(z[asm.h:], initial=0.0)) if state.history else math.nan
    sxi = float(z[p.sxi_index])
    w = len(p.concave_constraints)
    certified = (isinstance(cfg.smoother, Mellowmin) and status == CONVERGED
                 and sxi < -w * cfg.s_terminal)
    return SolveResult(traj, rob, status, state.iter, state.history, z, sxi,
                       max_pen, certified, cfg.smoother.name, wall_ms,
                       tau=state.tau, cost=state.prev_cost, message=message)


def warm_start_pipeline(p: DcProgram, cfg: CcpConfig,
                        backend: QpBackend | None = None) -> SolveResult:
    """LSE-smoothed run followed by a mellowmin run started at its solution.

    The second stage continues the penalty schedule of the first, and
    re-evaluates the auxiliaries with the mellowmin smoother so that the
    starting point is consistent with the new smoothing.
    """
    cfg1 = replace(cfg, smoother=LseMin(cfg.k_lse))
    try:
        r1 = run_ccp(p, cfg1, backend=backend)
    except Exception as exc:           # propagate with the stage tag
        raise CcpError(str(exc), stage="lse") from exc
    if r1.status == SUBPROBLEM_FAILED:
        r1.message = f"[lse] {r1.message}"
        return r1
    z0 = r1.z.copy()
    cfg2 = replace(cfg, smoother=Mellowmin(cfg.k_mellow))
    try:
        r2 = run_ccp(p, cfg2, z0=z0, tau_start=r1.tau, prev_cost=r1.cost,
                     backend=backend)
    except Exception as exc:
        raise CcpError(str(exc), stage="mellowmin") from exc
    r2.stage1 = r1
    r2.wall_ms += r1.wall_ms
    if r2.message:
        r2.message = f"[mellowmin] {r2.message}"
    return r2


def solve(p: DcProgram, cfg: CcpConfig, backend: QpBackend | None = None) -> SolveResult:
    return warm_start_pipeline(p, cfg, backend) if cfg.warm_start else run_ccp(p, cfg, backend=backend)
