"""Convex quadratic programs and a reference operator-splitting solver.

Problems have the form::

    minimize    1/2 z'Pz + q'z
    subject to  A_e z  = b_e
                G z   <= h

The reference backend stacks the rows into ``l <= A z <= u`` and runs an
ADMM iteration in the style of OSQP (Ruiz equilibration, per-row step
sizes, over-relaxation, adaptive step size).  Once the iterates are
moderately accurate an active set is read off the duals and the reduced
KKT system is solved directly ("polish"), which gives solutions accurate
to the requested ``1e-8`` tolerances without running ADMM to that level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
MAX_ITER = "MaxIter"


class QpError(ValueError):
    pass


@dataclass
class QpProblem:
    P: sp.spmatrix
    q: np.ndarray
    A_eq: sp.spmatrix
    b_eq: np.ndarray
    G: sp.spmatrix
    h: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).ravel()
        n = self.q.size
        self.P = sp.csc_matrix(self.P if self.P is not None else (n, n), dtype=float)
        self.A_eq = sp.csr_matrix(self.A_eq if self.A_eq is not None else (0, n), dtype=float)
        self.G = sp.csr_matrix(self.G if self.G is not None else (0, n), dtype=float)
        self.b_eq = np.asarray(self.b_eq if self.b_eq is not None else [], dtype=float).ravel()
        self.h = np.asarray(self.h if self.h is not None else [], dtype=float).ravel()
        if self.P.shape != (n, n):
            raise QpError(f"P has shape {self.P.shape}, expected {(n, n)}")
        if self.A_eq.shape[1] != n or self.G.shape[1] != n:
            raise QpError("constraint matrices must have var_count columns")
        if self.A_eq.shape[0] != self.b_eq.size or self.G.shape[0] != self.h.size:
            raise QpError("row counts and right-hand sides disagree")
        if (abs(self.P - self.P.T) > 1e-12 * (1 + abs(self.P).max())).nnz:
            raise QpError("P must be symmetric")

    @property
    def var_count(self) -> int:
        return self.q.size

    def objective(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(0.5 * z @ (self.P @ z) + self.q @ z)


@dataclass
class QpTolerances:
    eps_primal: float = 1e-8
    eps_dual: float = 1e-8
    max_iter: int = 20000


@dataclass
class QpSolution:
    z: np.ndarray
    status: str
    objective: float
    primal_residual: float
    dual_residual: float
    iterations: int
    y_eq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    y_ineq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    polished: bool = False

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class WarmStart:
    z: np.ndarray
    y_eq: np.ndarray | None = None
    y_ineq: np.ndarray | None = None


class QpBackend(Protocol):
    def solve(self, p: QpProblem, tol: QpTolerances | None = None,
              warm: WarmStart | None = None) -> QpSolution: ...


def kkt_residuals(p: QpProblem, z, y_eq, y_ineq) -> tuple[float, float]:
    """Primal violation and stationarity residual, both in the inf-norm."""
    z = np.asarray(z, dtype=float)
    r_eq = p.A_eq @ z - p.b_eq
    r_in = np.maximum(p.G @ z - p.h, 0.0)
    prim = max(np.abs(r_eq).max(initial=0.0), r_in.max(initial=0.0))
    grad = p.P @ z + p.q + p.A_eq.T @ y_eq + p.G.T @ y_ineq
    return float(prim), float(np.abs(grad).max(initial=0.0))


def _inf_norm_cols(M: sp.csc_matrix) -> np.ndarray:
    M = abs(sp.csc_matrix(M))
    out = M.max(axis=0).toarray().ravel() if M.shape[0] else np.zeros(M.shape[1])
    return out


@dataclass
class AdmmSettings:
    rho: float = 0.1
    sigma: float = 1e-6
    alpha: float = 1.6
    eq_rho_scale: float = 1e3
    scaling_iters: int = 10
    check_every: int = 25
    adaptive_rho_tol: float = 5.0
    eps_infeasible: float = 1e-7
    polish_trigger: float = 1e-3
    polish_delta: float = 1e-9
    refine_iters: int = 5
    polish_rounds: int = 8


class AdmmBackend:
    """Reference backend: scaled ADMM followed by an active-set polish."""

    def __init__(self, settings: AdmmSettings | None = None):
        self.settings = settings or AdmmSettings()

    def solve(self, p: QpProblem, tol: QpTolerances | None = None,
              warm: WarmStart | None = None) -> QpSolution:
        return _AdmmRun(p, tol or QpTolerances(), self.settings, warm).run()


class _AdmmRun:
    def __init__(self, p, tol, st, warm):
        self.p, self.tol, self.st = p, tol, st
        n = p.var_count
        self.n = n
        self.n_eq = p.A_eq.shape[0]
        A = sp.vstack([p.A_eq, p.G], format="csc") if p.A_eq.shape[0] + p.G.shape[0] \
            else sp.csc_matrix((0, n))
        self.m = A.shape[0]
        l = np.r_[p.b_eq, np.full(p.G.shape[0], -np.inf)]
        u = np.r_[p.b_eq, p.h]
        self._scale(p.P, p.q, A, l, u)
        self.is_eq = np.zeros(self.m, dtype=bool)
        self.is_eq[:self.n_eq] = True
        self.rho = st.rho
        self.x = np.zeros(n)
        self.z = np.zeros(self.m)
        self.y = np.zeros(self.m)
        if warm is not None:
            self.x = np.asarray(warm.z, dtype=float) / self.D
            self.z = np.clip(self.Ad @ self.x, self.ls, self.us)
            if warm.y_eq is not None and warm.y_ineq is not None:
                yw = np.r_[warm.y_eq, warm.y_ineq]
                self.y = yw * self.c / self.E
        self._factor()

    # scaling ------------------------------------------------------------
    def _scale(self, P, q, A, l, u):
        n, m = self.n, A.shape[0]
        D, E = np.ones(n), np.ones(m)
        Ps, As, qs = sp.csc_matrix(P), sp.csc_matrix(A), q.copy()
        for _ in range(self.st.scaling_iters):
            col = np.maximum(_inf_norm_cols(Ps), _inf_norm_cols(As))
            row = _inf_norm_cols(sp.csc_matrix(As.T)) if m else np.zeros(0)
            dx = 1.0 / np.sqrt(np.where(col < 1e-4, 1.0, np.minimum(col, 1e4)))
            dy = 1.0 / np.sqrt(np.where(row < 1e-4, 1.0, np.minimum(row, 1e4)))
            Dx, Dy = sp.diags(dx), sp.diags(dy)
            Ps = sp.csc_matrix(Dx @ Ps @ Dx)
            As = sp.csc_matrix(Dy @ As @ Dx)
            qs = dx * qs
            D *= dx
            E *= dy
        pn = _inf_norm_cols(Ps).mean() if n else 0.0
        cost = max(pn, np.abs(qs).max(initial=0.0))
        c = 1.0 / min(max(cost, 1e-4), 1e4) if cost > 0 else 1.0
        self.D, self.E, self.c = D, E, c
        self.Pd = sp.csc_matrix(c * Ps)
        self.qd = c * qs
        self.Ad = As
        self.AdT = sp.csc_matrix(As.T)
        with np.errstate(invalid="ignore"):
            self.ls = E * l
            self.us = E * u

    def _rho_vec(self):
        r = np.full(self.m, self.rho)
        r[self.is_eq] *= self.st.eq_rho_scale
        return r

    def _factor(self):
        self.rv = self._rho_vec()
        K = self.Pd + self.st.sigma * sp.identity(self.n, format="csc") \
            + self.AdT @ sp.diags(self.rv) @ self.Ad
        self.lu = spla.splu(sp.csc_matrix(K), permc_spec="COLAMD")

    # residuals in original units -----------------------------------------
    def _unscaled(self, x, y):
        return self.D * x, self.E * y / self.c

    def _residuals(self):
        Ax = self.Ad @ self.x
        prim = np.abs((Ax - self.z) / self.E).max(initial=0.0)
        Px = self.Pd @ self.x
        Aty = self.AdT @ self.y
        dual = np.abs((Px + self.qd + Aty) / (self.c * self.D)).max(initial=0.0)
        return prim, dual, Ax, Px, Aty

    def _tolerances(self, Ax, Px, Aty):
        # relative parts are measured in the original units as well
        ax = np.abs(Ax / self.E).max(initial=0.0)
        zz = np.abs(self.z / self.E).max(initial=0.0)
        ep = self.tol.eps_primal * (1.0 + max(ax, zz))
        sc = self.c * self.D
        ed = self.tol.eps_dual * (1.0 + max(np.abs(Px / sc).max(initial=0.0),
                                            np.abs(Aty / sc).max(initial=0.0),
                                            np.abs(self.qd / sc).max(initial=0.0)))
        return ep, ed

    # main loop ----------------------------------------------------------
    def run(self) -> QpSolution:
        st, tol = self.st, self.tol
        alpha = st.alpha
        next_polish = 0
        x_prev, y_prev = self.x.copy(), self.y.copy()
        k = 0
        for k in range(1, tol.max_iter + 1):
            rhs = st.sigma * self.x - self.qd + self.AdT @ (self.rv * self.z - self.y)
            xt = self.lu.solve(rhs)
            zt = self.Ad @ xt
            x_new = alpha * xt + (1 - alpha) * self.x
            zr = alpha * zt + (1 - alpha) * self.z
            z_new = np.clip(zr + self.y / self.rv, self.ls, self.us)
            self.y = self.y + self.rv * (zr - z_new)
            self.x, self.z = x_new, z_new
            if k % st.check_every:
                continue
            prim, dual, Ax, Px, Aty = self._residuals()
            ep, ed = self._tolerances(Ax, Px, Aty)
            if prim <= ep and dual <= ed:
                return self._polish(k) or self._finish(OPTIMAL, k)
            rel = max(prim / (1.0 + np.abs(Ax / self.E).max(initial=0.0)),
                      dual / (1.0 + np.abs(self.qd / (self.c * self.D)).max(initial=0.0)))
            if k >= next_polish and rel <= st.polish_trigger:
                sol = self._polish(k)
                if sol is not None:
                    return sol
                next_polish = max(2 * k, k + 100)
            dx, dy = self.x - x_prev, self.y - y_prev
            if self._primal_infeasible(dy):
                return self._finish(INFEASIBLE, k)
            if self._dual_infeasible(dx):
                return self._finish(UNBOUNDED, k)
            x_prev, y_prev = self.x.copy(), self.y.copy()
            self._adapt_rho(Ax, Px, Aty)
        sol = self._polish(k)
        if sol is not None:
            return sol
        return self._finish(MAX_ITER, k)

    def _adapt_rho(self, Ax, Px, Aty):
        pr = np.abs(Ax - self.z).max(initial=0.0) / max(
            np.abs(Ax).max(initial=0.0), np.abs(self.z).max(initial=0.0), 1e-30)
        du = np.abs(Px + self.qd + Aty).max(initial=0.0) / max(
            np.abs(Px).max(initial=0.0), np.abs(Aty).max(initial=0.0),
            np.abs(self.qd).max(initial=0.0), 1e-30)
        if pr == 0.0 or du == 0.0:
            return
        new = float(np.clip(self.rho * math.sqrt(pr / du), 1e-6, 1e6))
        if new > self.rho * self.st.adaptive_rho_tol or new < self.rho / self.st.adaptive_rho_tol:
            self.rho = new
            self._factor()

    def _primal_infeasible(self, dy) -> bool:
        eps = self.st.eps_infeasible
        ndy = np.abs(self.E * dy).max(initial=0.0)
        if ndy <= 1e-30:
            return False
        if np.abs((self.AdT @ dy) / self.D).max(initial=0.0) > eps * ndy:
            return False
        pos, neg = np.maximum(dy, 0.0), np.minimum(dy, 0.0)
        if np.any((pos > 0) & ~np.isfinite(self.us)) or np.any((neg < 0) & ~np.isfinite(self.ls)):
            return False
        us = np.where(np.isfinite(self.us), self.us, 0.0)
        ls = np.where(np.isfinite(self.ls), self.ls, 0.0)
        return float(us @ pos + ls @ neg) < -eps * ndy

    def _dual_infeasible(self, dx) -> bool:
        eps = self.st.eps_infeasible
        ndx = np.abs(self.D * dx).max(initial=0.0)
        if ndx <= 1e-30:
            return False
        if np.abs((self.Pd @ dx) / (self.c * self.D)).max(initial=0.0) > eps * ndx:
            return False
        if float(self.qd @ dx) / self.c >= -eps * ndx:
            return False
        Adx = (self.Ad @ dx) / self.E
        lo_ok = np.where(np.isfinite(self.ls), Adx >= -eps * ndx, True)
        hi_ok = np.where(np.isfinite(self.us), Adx <= eps * ndx, True)
        return bool(np.all(lo_ok & hi_ok))

    # polish -------------------------------------------------------------
    def _polish(self, k) -> QpSolution | None:
        """Solve the KKT system of a guessed active set.

        The guess is corrected a few times: rows whose multiplier has the
        wrong sign are dropped (this happens at degenerate vertices, where
        the multipliers are not unique) and violated rows are added.
        """
        st = self.st
        lower = (self.z - self.ls < -self.y) & np.isfinite(self.ls) & ~self.is_eq
        upper = (self.us - self.z < self.y) & np.isfinite(self.us) & ~self.is_eq
        for _ in range(st.polish_rounds):
            x, y = self._polish_solve(lower, upper)
            if x is None:
                return None
            scale_y = self.E / self.c
            wrong = (lower & (y * scale_y > 0)) | (upper & (y * scale_y < 0))
            Ax = self.Ad @ x
            viol_hi = ~upper & np.isfinite(self.us) & ~self.is_eq & \
                (Ax - self.us > self.tol.eps_primal * self.E)
            viol_lo = ~lower & np.isfinite(self.ls) & ~self.is_eq & \
                (self.ls - Ax > self.tol.eps_primal * self.E)
            if not (wrong.any() or viol_hi.any() or viol_lo.any()):
                return self._polish_accept(x, y, k)
            lower = (lower & ~wrong) | viol_lo
            upper = (upper & ~wrong) | viol_hi
        return None

    def _polish_solve(self, lower, upper):
        n = self.n
        idx = np.flatnonzero(self.is_eq | lower | upper)
        target = np.where(lower[idx], self.ls[idx], self.us[idx])
        Ar = self.Ad[idx]
        delta = self.st.polish_delta
        K = sp.bmat([[self.Pd, Ar.T], [Ar, None]], format="csc")
        Kreg = K + sp.block_diag([delta * sp.identity(n), -delta * sp.identity(len(idx))],
                                 format="csc")
        rhs = np.r_[-self.qd, target]
        try:
            lu = spla.splu(sp.csc_matrix(Kreg), permc_spec="COLAMD")
        except RuntimeError:
            return None, None
        sol = lu.solve(rhs)
        for _ in range(self.st.refine_iters):
            sol = sol + lu.solve(rhs - K @ sol)
        if not np.all(np.isfinite(sol)):
            return None, None
        y = np.zeros(self.m)
        y[idx] = sol[n:]
        return sol[:n], y

    def _polish_accept(self, x, y, k) -> QpSolution | None:
        xu, yu = self._unscaled(x, y)
        ye, yi = yu[:self.n_eq], yu[self.n_eq:]
        prim, dual = kkt_residuals(self.p, xu, ye, yi)
        scale_p = 1.0 + np.abs(self.p.G @ xu).max(initial=0.0) + np.abs(self.p.b_eq).max(initial=0.0)
        scale_d = 1.0 + np.abs(self.p.q).max(initial=0.0)
        if prim > self.tol.eps_primal * scale_p or dual > self.tol.eps_dual * scale_d:
            return None
        return QpSolution(xu, OPTIMAL, self.p.objective(xu), prim, dual, k,
                          y_eq=ye, y_ineq=yi, polished=True)

    def _finish(self, status, k) -> QpSolution:
        xu, yu = self._unscaled(self.x, self.y)
        ye, yi = yu[:self.n_eq], yu[self.n_eq:]
        prim, dual = kkt_residuals(self.p, xu, ye, np.maximum(yi, 0.0))
        obj = self.p.objective(xu) if status != INFEASIBLE else math.inf
        if status == UNBOUNDED:
            obj = -math.inf
        return QpSolution(xu, status, obj, prim, dual, k, y_eq=ye, y_ineq=yi)


def polish_active_set(p: QpProblem, active, tol: QpTolerances, k: int = 0,
                      rounds: int = 8, delta: float = 1e-9,
                      refine: int = 5) -> QpSolution | None:
    """Solve the equality-constrained QP of the inequality rows in ``active``.

    Rows with a negative multiplier are dropped and violated rows added,
    for at most ``rounds`` corrections.  Returns None when no consistent
    active set was found.
    """
    n, me = p.var_count, p.A_eq.shape[0]
    active = np.asarray(active, dtype=bool).copy()
    A_eq, G = sp.csr_matrix(p.A_eq), sp.csr_matrix(p.G)
    P = sp.csc_matrix(p.P)
    for _ in range(rounds):
        idx = np.flatnonzero(active)
        Ar = sp.vstack([A_eq, G[idx]], format="csc")
        ma = Ar.shape[0]
        K = sp.bmat([[P, Ar.T], [Ar, None]], format="csc") if ma else P
        Kreg = K + sp.block_diag([delta * sp.identity(n), -delta * sp.identity(ma)],
                                 format="csc") if ma else P + delta * sp.identity(n)
        rhs = np.r_[-p.q, p.b_eq, p.h[idx]]
        try:
            lu = spla.splu(sp.csc_matrix(Kreg), permc_spec="COLAMD")
        except RuntimeError:
            return None
        sol = lu.solve(rhs)
        for _ in range(refine):
            sol = sol + lu.solve(rhs - K @ sol)
        if not np.all(np.isfinite(sol)):
            return None
        x = sol[:n]
        ye = sol[n:n + me]
        yi = np.zeros(G.shape[0])
        yi[idx] = sol[n + me:]
        wrong = active & (yi < 0)
        viol = ~active & (G @ x - p.h > tol.eps_primal * (1 + np.abs(p.h)))
        if not (wrong.any() or viol.any()):
            prim, dual = kkt_residuals(p, x, ye, yi)
            scale_p = 1.0 + np.abs(G @ x).max(initial=0.0) + np.abs(p.b_eq).max(initial=0.0)
            scale_d = 1.0 + np.abs(p.q).max(initial=0.0)
            if prim > tol.eps_primal * scale_p or dual > tol.eps_dual * scale_d:
                return None
            return QpSolution(x, OPTIMAL, p.objective(x), prim, dual, k,
                              y_eq=ye, y_ineq=yi, polished=True)
        active = (active & ~wrong) | viol
    return None


@dataclass
class IpmSettings:
    max_iter: int = 100
    step_fraction: float = 0.99
    reg: float = 1e-10
    refine_iters: int = 3
    infeasible_scale: float = 1e8
    polish: bool = True


class IpmBackend:
    """Primal-dual interior-point backend (Mehrotra predictor-corrector).

    Works on ``Gz + s = h, s >= 0`` and factors the quasi-definite reduced
    system ``[[P + G'WG, A'], [A, -reg I]]`` once per iteration.  Far more
    robust than ADMM on degenerate LP-like subproblems.
    """

    def __init__(self, settings: IpmSettings | None = None):
        self.settings = settings or IpmSettings()

    def solve(self, p: QpProblem, tol: QpTolerances | None = None,
              warm: WarmStart | None = None) -> QpSolution:
        tol = tol or QpTolerances()
        st = self.settings
        n, me, mi = p.var_count, p.A_eq.shape[0], p.G.shape[0]
        P, q = sp.csc_matrix(p.P), p.q
        A, b = sp.csc_matrix(p.A_eq), p.b_eq
        G, h = sp.csc_matrix(p.G), p.h
        GT, AT = sp.csc_matrix(G.T), sp.csc_matrix(A.T)
        reg = st.reg

        def factor(w):
            H = P + GT @ sp.diags(w) @ G + reg * sp.identity(n, format="csc")
            K = sp.bmat([[H, AT], [A, -reg * sp.identity(me)]], format="csc") if me \
                else sp.csc_matrix(H)
            Kx = sp.bmat([[H - reg * sp.identity(n), AT], [A, None]], format="csc") if me \
                else sp.csc_matrix(H - reg * sp.identity(n))
            return spla.splu(K, permc_spec="COLAMD"), Kx

        def kkt_solve(lu, Kx, rx, ry):
            rhs = np.r_[rx, ry]
            sol = lu.solve(rhs)
            for _ in range(st.refine_iters):
                sol = sol + lu.solve(rhs - Kx @ sol)
            return sol[:n], sol[n:]

        # initial point: least-squares fit with unit weights, then shift
        try:
            lu, Kx = factor(np.ones(mi))
        except RuntimeError:
            return QpSolution(np.zeros(n), MAX_ITER, math.nan, math.inf, math.inf, 0)
        x, y = kkt_solve(lu, Kx, -q + GT @ h, b)
        s = h - G @ x
        z = np.ones(mi)
        if mi:
            a_p = -s.min()
            s = s + max(0.0, a_p) + 1.0 if a_p >= -1.0 else s
            z = np.maximum(np.abs(G @ x - h), 1.0)
        nb, nh, nq = (np.abs(v).max(initial=0.0) for v in (b, h, q))
        k = 0
        for k in range(1, st.max_iter + 1):
            rd = P @ x + q + AT @ y + GT @ z
            rp = A @ x - b
            rg = G @ x + s - h
            mu = float(s @ z) / mi if mi else 0.0
            obj = 0.5 * float(x @ (P @ x)) + float(q @ x)
            pres = max(np.abs(rp).max(initial=0.0) / (1 + nb),
                       np.abs(rg).max(initial=0.0) / (1 + nh))
            dres = np.abs(rd).max(initial=0.0) / (1 + nq)
            gap = mu * mi
            if pres <= tol.eps_primal and dres <= tol.eps_dual and \
                    gap <= tol.eps_dual * (1 + abs(obj)):
                if st.polish:
                    pol = polish_active_set(p, s < z, tol, k)
                    if pol is not None:
                        return pol
                return self._result(p, x, y, z, OPTIMAL, k)
            cert = self._certificate(p, x, y, z, tol)
            if cert is not None:
                return self._result(p, x, y, z, cert, k)
            w = z / s
            try:
                lu, Kx = factor(w)
            except RuntimeError:
                break

            def direction(rc):
                # rc is the complementarity target: s*z - target
                rx = -rd + GT @ ((rc - z * rg) / s)
                dx, dy = kkt_solve(lu, Kx, rx, -rp)
                ds = -rg - G @ dx
                dz = -(rc + z * ds) / s
                return dx, dy, ds, dz

            def max_step(v, dv):
                neg = dv < 0
                return min(1.0, float(np.min(-v[neg] / dv[neg]))) if neg.any() else 1.0

            dx, dy, ds, dz = direction(s * z)
            a_aff = min(max_step(s, ds), max_step(z, dz))
            if mi:
                mu_aff = float((s + a_aff * ds) @ (z + a_aff * dz)) / mi
                sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
                dx, dy, ds, dz = direction(s * z + ds * dz - sigma * mu)
            alpha = min(1.0, st.step_fraction * min(max_step(s, ds), max_step(z, dz)))
            x, y, s, z = x + alpha * dx, y + alpha * dy, s + alpha * ds, z + alpha * dz
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
                break
        return self._result(p, x, y, z, MAX_ITER, k)

    def _certificate(self, p, x, y, z, tol):
        big = self.settings.infeasible_scale
        ny = max(np.abs(y).max(initial=0.0), np.abs(z).max(initial=0.0))
        if ny > big:
            yy, zz = y / ny, z / ny
            lhs = np.abs(p.A_eq.T @ yy + p.G.T @ zz).max(initial=0.0)
            if lhs <= 1e-6 and float(p.b_eq @ yy + p.h @ zz) < -1e-6:
                return INFEASIBLE
        nx = np.abs(x).max(initial=0.0)
        if nx > big:
            xx = x / nx
            if (np.abs(p.P @ xx).max(initial=0.0) <= 1e-6 and float(p.q @ xx) < -1e-6
                    and np.abs(p.A_eq @ xx).max(initial=0.0) <= 1e-6
                    and (p.G @ xx).max(initial=0.0) <= 1e-6):
                return UNBOUNDED
        return None

    def _result(self, p, x, y, z, status, k):
        prim, dual = kkt_residuals(p, x, y, z)
        obj = p.objective(x)
        if status == INFEASIBLE:
            obj = math.inf
        elif status == UNBOUNDED:
            obj = -math.inf
        return QpSolution(x, status, obj, prim, dual, k, y_eq=y, y_ineq=z)


BACKENDS = {"ipm": IpmBackend, "admm": AdmmBackend}


def make_backend(name: str) -> QpBackend:
    try:
        return BACKENDS[name]()
    except KeyError:
        raise QpError(f"unknown QP backend {name!r}; choose from {sorted(BACKENDS)}") from None


_DEFAULT = IpmBackend()


def solve_qp(p: QpProblem, tol: QpTolerances | None = None,
             warm: WarmStart | None = None,
             backend: QpBackend | None = None) -> QpSolution:
    """Solve ``p`` with ``backend`` (the interior-point backend by default)."""
    return (backend or _DEFAULT).solve(p, tol, warm)
