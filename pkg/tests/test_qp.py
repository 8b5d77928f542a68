import numpy as np
import pytest
import scipy.sparse as sp

from qp_oracle import dense_kkt_solve, random_qp
from stlccp.qp import (BACKENDS, INFEASIBLE, OPTIMAL, UNBOUNDED, QpError, QpProblem,
                       QpTolerances, WarmStart, kkt_residuals, make_backend, solve_qp)

BACKEND_NAMES = sorted(BACKENDS)


def qp(P, q, A=None, b=None, G=None, h=None):
    f = lambda M: None if M is None else sp.csr_matrix(np.atleast_2d(M))  # noqa: E731
    return QpProblem(f(P), q, f(A), b, f(G), h)


@pytest.fixture(params=BACKEND_NAMES)
def backend(request):
    return make_backend(request.param)


def test_constrained_parabola(backend):
    s = solve_qp(qp([[1.0]], [-1.0], G=[[1.0]], h=[0.0]), backend=backend)
    assert s.status == OPTIMAL
    assert s.z[0] == pytest.approx(0.0, abs=1e-8) and s.objective == pytest.approx(0.0, abs=1e-8)


def test_active_bound_lp(backend):
    s = solve_qp(qp(None, [1.0], G=[[-1.0]], h=[-3.0]), backend=backend)
    assert s.status == OPTIMAL and s.z[0] == pytest.approx(3.0, abs=1e-8)


def test_equality_symmetry(backend):
    s = solve_qp(qp(2 * np.eye(2), [0.0, 0.0], A=[[1.0, 1.0]], b=[2.0]), backend=backend)
    assert s.status == OPTIMAL and np.allclose(s.z, [1.0, 1.0], atol=1e-8)


def test_infeasible_detected(backend):
    s = solve_qp(qp(None, [1.0], G=[[1.0], [-1.0]], h=[0.0, -1.0]), backend=backend)
    assert s.status == INFEASIBLE and not s.ok


def test_unbounded_detected(backend):
    s = solve_qp(qp(None, [1.0, 0.0], G=[[0.0, 1.0]], h=[1.0]), backend=backend)
    assert s.status == UNBOUNDED and not s.ok


def test_random_qps_match_dense_kkt(backend):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        p, z_star, active = random_qp(rng)
        s = solve_qp(p, backend=backend)
        assert s.status == OPTIMAL
        ref = dense_kkt_solve(p, active)
        assert np.allclose(ref, z_star, atol=1e-8)
        worst = max(worst, np.abs(s.z - ref).max())
        prim, dual = kkt_residuals(p, s.z, s.y_eq, s.y_ineq)
        assert prim <= 1e-8 * (1 + np.abs(p.h).max()) and dual <= 1e-6
        # duality gap
        gap = abs(s.y_ineq @ (p.G @ s.z - p.h))
        assert gap <= 1e-6 * (1 + abs(s.objective))
        assert s.objective == pytest.approx(p.objective(s.z))
    assert worst <= 1e-6


def test_deterministic(backend):
    p, _, _ = random_qp(np.random.default_rng(3))
    a, b = backend.solve(p), backend.solve(p)
    assert np.array_equal(a.z, b.z) and a.iterations == b.iterations


def test_warm_start_accepted(backend):
    p, z_star, _ = random_qp(np.random.default_rng(4))
    cold = backend.solve(p)
    warm = backend.solve(p, warm=WarmStart(cold.z, cold.y_eq, cold.y_ineq))
    assert warm.status == OPTIMAL and np.allclose(warm.z, z_star, atol=1e-6)


def test_empty_constraint_parts(backend):
    s = backend.solve(qp(np.diag([2.0, 4.0]), [-2.0, -4.0]))
    assert s.status == OPTIMAL and np.allclose(s.z, [1.0, 1.0], atol=1e-8)


def test_validation():
    with pytest.raises(QpError):
        qp([[1.0, 2.0], [0.0, 1.0]], [0.0, 0.0])
    with pytest.raises(QpError):
        qp([[1.0]], [0.0], G=[[1.0, 1.0]], h=[0.0])
    with pytest.raises(QpError):
        make_backend("simplex")


def test_tolerance_object_is_respected():
    p, _, _ = random_qp(np.random.default_rng(5))
    s = solve_qp(p, QpTolerances(max_iter=1), backend=make_backend("admm"))
    assert s.status != OPTIMAL or s.primal_residual <= 1e-8
