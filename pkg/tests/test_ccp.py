from dataclasses import replace

import numpy as np
import pytest

from stlccp.ccp import (CONVERGED, SUBPROBLEM_FAILED, CcpConfig, CcpError, CcpState,
                        _Assembler, assemble_subproblem, initial_point, linearize_concave,
                        penalty_weight, run_ccp, solve, warm_start_pipeline)
from stlccp.dc import AffExpr, ConcaveConstraint, decompose
from stlccp.formula import Always, And, Eventually, Or, Pred, Predicate
from stlccp.qp import solve_qp
from stlccp.robustness import satisfies
from stlccp.simplify import simplify
from stlccp.smoothers import ExactMin, LseMin, Mellowmin
from stlccp.systems import Box, LinearSystem
from stlccp.tree import build_tree, tree_stats
from test_stl_core import fig2

ONE = LinearSystem(np.eye(1), np.eye(1))
BOX = Box((-5.0,), (5.0,), (-1.0,), (1.0,))


def le(b):
    return Pred(Predicate((1.0,), b))


def ge(b):
    return Pred(Predicate((-1.0,), -b))


def reach_program(T=6):
    # reach [2, 3] or [-3, -2] at some point, stay below 4 throughout
    f = And((Eventually(0, T, Or((And((ge(2), le(3))), And((ge(-3), le(-2)))))),
             Always(0, T, le(4))))
    tree = simplify(build_tree(f, horizon=T))
    return f, decompose(tree, ONE, [0.0], T, BOX)


# schedule and weights ------------------------------------------------------

def test_tau_schedule():
    cfg = CcpConfig()
    assert cfg.tau(0) == 5e-3 and cfg.tau(1) == 1e-2
    assert cfg.tau(17) < 1e3 and cfg.tau(18) == 1e3 and cfg.tau(40) == 1e3
    taus = [cfg.tau(i) for i in range(30)]
    assert taus == sorted(taus)


@pytest.mark.parametrize("kw", [dict(tau0=0.0), dict(mu=1.0), dict(tau0=1.0, tau_max=0.5),
                                dict(max_iter=0), dict(mode="fast"), dict(sigma=-1.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        CcpConfig(**kw)


def test_penalty_weights_fig3():
    T = 20
    tree = simplify(build_tree(fig2(T)))
    p = decompose(tree, ONE, [0.0], T)
    stats = tree_stats(tree)
    w = sorted(penalty_weight(c, "twp", 1, stats) for c in p.concave_constraints)
    assert w == [3.0, T + 1.0]
    assert {penalty_weight(c, "normal", 5, stats) for c in p.concave_constraints} == {3.0}
    for c in p.concave_constraints:
        assert penalty_weight(c, "decay", 1, stats) == c.weight
        assert penalty_weight(c, "decay", 500, stats) == pytest.approx(3.0)
        d = [penalty_weight(c, "decay", i, stats, 0.2) for i in range(1, 10)]
        assert d == sorted(d, reverse=True)
    with pytest.raises(ValueError):
        penalty_weight(p.concave_constraints[0], "twp", 0, stats)


# linearization -------------------------------------------------------------

def cc2():
    return ConcaveConstraint([AffExpr({0: 1.0}, 0.0), AffExpr({1: 1.0}, 0.0)],
                             AffExpr({2: 1.0}, 0.0), 2, 0)


def test_linearize_equal_args_splits_evenly():
    r = linearize_concave(cc2(), np.array([0.7, 0.7, 0.0]), Mellowmin(1000.0))
    assert r.coeffs[0] == pytest.approx(0.5) and r.coeffs[1] == pytest.approx(0.5)
    assert r.coeffs[2] == -1.0


def test_linearize_logistic_weights():
    r = linearize_concave(cc2(), np.array([0.0, 1.0, 0.0]), Mellowmin(1.0))
    assert r.coeffs[0] == pytest.approx(0.73106, abs=1e-5)
    assert r.coeffs[1] == pytest.approx(0.26894, abs=1e-5)


def test_linearize_rejects_exact_min():
    with pytest.raises(ValueError):
        linearize_concave(cc2(), np.zeros(3), ExactMin())


@pytest.mark.parametrize("sm", [Mellowmin(1000.0), Mellowmin(1.0), LseMin(10.0)])
def test_linearization_over_estimates(sm):
    rng = np.random.default_rng(0)
    for _ in range(100):
        r = int(rng.integers(2, 6))
        h = 8
        args = [AffExpr({int(j): float(rng.normal()) for j in rng.choice(h - 1, 3, replace=False)},
                        float(rng.normal())) for _ in range(r)]
        c = ConcaveConstraint(args, AffExpr({h - 1: 1.0}, 0.0), r, 0)
        z, z2 = rng.normal(size=h), rng.normal(size=h)
        row = linearize_concave(c, z, sm)
        exact = lambda zz: sm.min([a.value(zz) for a in args]) - zz[h - 1]  # noqa: E731
        assert row.value(z) == pytest.approx(exact(z), abs=1e-10)
        assert row.value(z2) >= exact(z2) - 1e-10


def test_assembled_rows_match_linearization_at_expansion_point():
    _, p = reach_program()
    cfg = CcpConfig()
    z = initial_point(p, cfg)
    asm = _Assembler(p)
    Gc, hc = asm.concave_rows(z, cfg.smoother)
    lhs = Gc @ z - hc               # penalty columns are zero at the initial point
    assert np.allclose(lhs, asm.smoothed_violation(z, cfg.smoother), atol=1e-10)
    for j, c in enumerate(p.concave_constraints):
        row = linearize_concave(c, z[:p.h], cfg.smoother)
        assert lhs[j] == pytest.approx(row.value(z[:p.h]), abs=1e-10)


def test_only_concave_rows_change():
    _, p = reach_program()
    cfg = CcpConfig()
    nc = len(p.concave_constraints)
    z1 = initial_point(p, cfg)
    z2 = initial_point(p, replace(cfg, seed=99))
    q1 = assemble_subproblem(p, CcpState(z1, cfg.tau(0)), cfg)
    q2 = assemble_subproblem(p, CcpState(z2, cfg.tau(0)), cfg)
    s1, s2 = q1.G[:-nc], q2.G[:-nc]
    assert (s1 != s2).nnz == 0 and np.array_equal(q1.h[:-nc], q2.h[:-nc])
    assert (q1.A_eq != q2.A_eq).nnz == 0 and (q1.P != q2.P).nnz == 0
    assert (q1.G[-nc:] != q2.G[-nc:]).nnz > 0


def test_penalty_costs_in_subproblem():
    _, p = reach_program()
    cfg = CcpConfig(mode="twp")
    st = CcpState(initial_point(p, cfg), cfg.tau(3), iter=3)
    q = assemble_subproblem(p, st, cfg)
    pen = q.q[p.h:]
    assert np.allclose(pen, [cfg.tau(3) * c.weight for c in p.concave_constraints])


# runs ------------------------------------------------------------------------

def test_convex_program_converges_in_one_iteration():
    f = Always(0, 5, And((le(1.0), ge(-1.0))))
    p = decompose(simplify(build_tree(f)), ONE, [0.0], 5, BOX)
    res = run_ccp(p, CcpConfig())
    assert res.status == CONVERGED and res.iterations == 1 and res.robustness_orig == pytest.approx(1.0)


def test_convex_row_infeasibility_is_subproblem_failure():
    f = Always(3, 4, le(-4.0))        # |u| <= 1 cannot reach x <= -4 by t = 3
    p = decompose(simplify(build_tree(f)), ONE, [0.0], 4, BOX)
    res = run_ccp(p, CcpConfig())
    assert res.status == SUBPROBLEM_FAILED and res.robustness_orig is None


@pytest.mark.parametrize("mode", ["twp", "normal", "decay"])
def test_reach_program_solves(mode):
    f, p = reach_program()
    res = solve(p, CcpConfig(mode=mode, warm_start=True))
    assert res.status == CONVERGED and res.robustness_orig == pytest.approx(0.5, abs=1e-3)
    assert satisfies(f, res.trajectory)
    assert res.certified and res.stage1 is not None


def test_determinism():
    _, p = reach_program()
    a = run_ccp(p, CcpConfig(seed=3))
    b = run_ccp(p, CcpConfig(seed=3))
    strip = lambda r: [(h.iter, h.tau, h.cost, h.max_penalty, h.sxi) for h in r.history]  # noqa: E731
    assert strip(a) == strip(b) and np.array_equal(a.z, b.z)


def test_stopping_rule_and_history():
    _, p = reach_program()
    cfg = CcpConfig()
    res = run_ccp(p, cfg)
    last = res.history[-1]
    assert last.max_penalty <= cfg.s_terminal
    assert abs(res.history[-1].cost - res.history[-2].cost) <= cfg.cost_eps
    assert [h.tau for h in res.history] == [cfg.tau(i) for i in range(len(res.history))]
    rec = res.history_jsonl().splitlines()
    assert len(rec) == res.iterations
    import json
    assert set(json.loads(rec[0])) >= {"iter", "tau", "cost", "max_penalty", "qp_status",
                                       "qp_iters", "wall_ms"}


def test_feasibility_inheritance_and_certificate():
    f, p = reach_program()
    for seed in range(4):
        res = run_ccp(p, CcpConfig(seed=seed))
        zero_pen = res.max_penalty <= 0.0 + 1e-12 and res.sxi <= 0
        if res.certified or zero_pen:
            assert satisfies(f, res.trajectory)
        if res.certified:
            assert res.sxi < -len(p.concave_constraints) * 1e-5


def test_warm_start_second_stage_short_when_already_satisfied():
    _, p = reach_program()
    cfg = CcpConfig(warm_start=True)
    res = warm_start_pipeline(p, cfg)
    r2 = run_ccp(p, replace(cfg, smoother=Mellowmin(cfg.k_mellow)), z0=res.z,
                 tau_start=res.tau, prev_cost=res.cost)
    assert r2.status == CONVERGED and r2.iterations <= 2


class Exploding:
    def __init__(self, after):
        self.after, self.calls = after, 0

    def solve(self, p, tol=None, warm=None):
        self.calls += 1
        if self.calls > self.after:
            raise RuntimeError("backend crashed")
        return solve_qp(p, tol, warm)


def test_stage_tags():
    _, p = reach_program()
    with pytest.raises(CcpError) as exc:
        warm_start_pipeline(p, CcpConfig(warm_start=True), backend=Exploding(0))
    assert exc.value.stage == "lse"
    n1 = run_ccp(p, CcpConfig(smoother=LseMin(10.0))).iterations
    with pytest.raises(CcpError) as exc:
        warm_start_pipeline(p, CcpConfig(warm_start=True), backend=Exploding(n1))
    assert exc.value.stage == "mellowmin"


def test_initial_point_seeded():
    _, p = reach_program()
    a, b = initial_point(p, CcpConfig(seed=1)), initial_point(p, CcpConfig(seed=1))
    c = initial_point(p, CcpConfig(seed=2))
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert a[p.state_index][0, 0] == 0.0
    assert np.all(a[p.h:] == 0.0)
