import numpy as np
import pytest

from anderson_lab.accelerators import (
    AccelConfig,
    aa_full_window_vs_gmres_check,
    aa_restarted_run,
    aa_run,
    aa_step,
    fp_run,
    gmres_run,
    run_scheme,
)
from anderson_lab.errors import Diverged, StagnationDetected
from anderson_lab.problems import (
    AffineSpec,
    make_affine,
    problem_linear_2x2,
    problem_linear_200,
    problem_scalar,
)


class TestAccelConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            AccelConfig(window_m=-1)
        with pytest.raises(ValueError):
            AccelConfig(max_iters=0)
        with pytest.raises(ValueError):
            AccelConfig(stop_tol=-1.0)
        with pytest.raises(ValueError):
            AccelConfig(rank_tol_scale=0.0)
        AccelConfig(stop_tol=0.0)  # 0 disables the residual stop


class TestFpRun:
    def test_first_step_hand_value(self):
        p = problem_linear_2x2()
        tr = fp_run(p, np.array([0.2, 0.1]), AccelConfig(max_iters=1, stop_tol=0.0))
        np.testing.assert_allclose(
            tr.iterates[1], [2.0 / 3.0 * 0.2 + 0.25 * 0.1, 0.1 / 3.0], atol=1e-15)

    def test_start_at_fixed_point(self):
        p = problem_linear_2x2()
        tr = fp_run(p, np.zeros(2), AccelConfig(max_iters=50))
        assert len(tr) == 1
        assert tr.converged

    def test_sigma_approaches_spectral_radius(self):
        p = problem_linear_2x2()
        tr = fp_run(p, np.array([0.2, 0.1]), AccelConfig(max_iters=100, stop_tol=0.0))
        assert abs(tr.sigma_k[100] - 2.0 / 3.0) < 0.01

    def test_linear_error_propagation(self):
        p = problem_linear_2x2()
        M = p.affine.M
        tr = fp_run(p, np.array([0.2, 0.1]), AccelConfig(max_iters=10, stop_tol=0.0))
        for k in range(10):
            e_k = tr.iterates[k] - p.known_fixed_point
            e_next = tr.iterates[k + 1] - p.known_fixed_point
            np.testing.assert_allclose(e_next, M @ e_k, atol=1e-15)

    def test_divergence_guard(self):
        p = make_affine(AffineSpec(M=[[2.0]], b=[0.0]))
        with pytest.raises(Diverged) as exc_info:
            fp_run(p, np.array([1.0]), AccelConfig(max_iters=200, stop_tol=0.0))
        assert exc_info.value.trace is not None
        assert len(exc_info.value.trace) >= 1


class TestAaStep:
    def test_empty_history_rejected(self):
        with pytest.raises(ValueError):
            aa_step(problem_linear_2x2(), [])

    def test_single_entry_is_fp_step(self):
        p = problem_linear_2x2()
        x0 = np.array([0.2, 0.1])
        x1, beta = aa_step(p, [x0])
        np.testing.assert_allclose(x1, p.q(x0), atol=0)
        assert beta.beta.shape == (0,)

    def test_equal_residuals_degenerate_to_fp(self):
        p = problem_linear_2x2()
        x = np.array([0.2, 0.1])
        x_next, beta = aa_step(p, [x, x])
        np.testing.assert_allclose(x_next, p.q(x), atol=0)
        assert np.all(beta.beta == 0.0)
        assert beta.rank == 0

    def test_orthogonal_residuals_hand_value(self):
        # residuals [0,1] then [1,0]: beta = -r_k.(r_k - r_{k-1}) / ||r_k - r_{k-1}||^2
        p = make_affine(AffineSpec(M=0.5 * np.eye(2), b=np.zeros(2)))
        x_prev = np.array([0.0, 2.0])   # r = [0, 1]
        x_k = np.array([2.0, 0.0])      # r = [1, 0]
        x_next, beta = aa_step(p, [x_prev, x_k])
        assert abs(beta.beta[0] - (-0.5)) < 1e-14
        expected = p.q(x_k) + beta.beta[0] * (p.q(x_k) - p.q(x_prev))
        np.testing.assert_allclose(x_next, expected, atol=1e-14)

    def test_optimality_over_beta_zero(self):
        p = problem_linear_2x2()
        rng = np.random.default_rng(5)
        hist = [rng.standard_normal(2) for _ in range(3)]
        _, beta = aa_step(p, hist)
        assert beta.ls_objective <= beta.residual_norm_before + 1e-12


class TestAaRun:
    def test_window_discipline(self):
        p = problem_linear_2x2()
        m = 3
        tr = aa_run(p, np.array([0.2, 0.1]), AccelConfig(window_m=m, max_iters=10, stop_tol=0.0))
        for k, beta in enumerate(tr.betas):
            assert beta.beta.shape == (min(k, m),)

    def test_forced_beta_zero_reproduces_fp_bitwise(self):
        p = problem_linear_2x2()
        x0 = np.array([0.21, -0.13])
        cfg = AccelConfig(window_m=2, max_iters=40, stop_tol=0.0, rank_tol_scale=1e30)
        tr_aa = aa_run(p, x0, cfg)
        tr_fp = fp_run(p, x0, AccelConfig(max_iters=40, stop_tol=0.0))
        assert len(tr_aa) == len(tr_fp)
        for a, b in zip(tr_aa.iterates, tr_fp.iterates):
            assert np.array_equal(a, b)

    def test_diagonal_affine_converges(self):
        p = make_affine(AffineSpec(M=np.diag([0.5, 0.5]), b=np.array([1.0, -1.0])))
        tr = aa_run(p, np.array([3.0, 7.0]), AccelConfig(window_m=1, max_iters=50, stop_tol=1e-12))
        assert tr.converged
        assert tr.residual_norms[-1] <= 1e-12

    def test_beta_oscillates_on_linear_2x2(self):
        p = problem_linear_2x2()
        tr = aa_run(p, np.array([0.2, 0.1]), AccelConfig(window_m=1, max_iters=100, stop_tol=0.0))
        tail = [b.beta[0] for b in tr.betas[50:100]]
        assert max(tail) - min(tail) > 0.05

    def test_trace_alignment(self):
        p = problem_linear_2x2()
        tr = aa_run(p, np.array([0.2, 0.1]), AccelConfig(window_m=1, max_iters=20, stop_tol=0.0))
        assert len(tr.betas) == len(tr.iterates) - 1
        assert np.isnan(tr.sigma_k[0])
        for k in range(1, len(tr)):
            assert abs(tr.sigma_k[k] - tr.error_norms[k] ** (1.0 / k)) < 1e-15


def _secant_iterates(problem, x0, n_steps):
    """Secant method on f(x) = x - q(x), seeded like AA(1).

    A zero secant denominator falls back to the plain update q(x_k), matching
    the accelerator's degenerate-step rule.
    """
    f = lambda x: float(problem.residual(np.array([x]))[0])
    xs = [float(x0), float(problem.q(np.array([x0]))[0])]
    for _ in range(n_steps - 1):
        fk, fp = f(xs[-1]), f(xs[-2])
        if fk == fp:
            xs.append(float(problem.q(np.array([xs[-1]]))[0]))
        else:
            xs.append(xs[-1] - fk * (xs[-1] - xs[-2]) / (fk - fp))
    return xs


class TestSecantEquivalence:
    def test_scalar_aa1_matches_secant(self):
        p = problem_scalar()
        tr = aa_run(p, np.array([0.5]), AccelConfig(window_m=1, max_iters=15, stop_tol=0.0))
        secant = _secant_iterates(p, 0.5, 15)
        for k in range(len(tr)):
            aa_x = tr.iterates[k][0]
            assert abs(aa_x - secant[k]) <= 1e-10 * (1.0 + abs(secant[k]))


class TestRestartedRun:
    def test_requires_window(self):
        with pytest.raises(ValueError):
            aa_restarted_run(problem_linear_2x2(), np.zeros(2),
                             AccelConfig(window_m=0, restart=True))

    def test_no_restart_boundary_equals_windowed(self):
        p = problem_linear_2x2()
        x0 = np.array([0.2, 0.1])
        n = 20
        tr_r = aa_restarted_run(p, x0, AccelConfig(window_m=n + 1, restart=True,
                                                   max_iters=n, stop_tol=0.0))
        tr_w = aa_run(p, x0, AccelConfig(window_m=n + 1, max_iters=n, stop_tol=0.0))
        for a, b in zip(tr_r.iterates, tr_w.iterates):
            assert np.array_equal(a, b)

    def test_restart_cycle_structure(self):
        # m=2 cycles: FP-like step (empty beta), then windows 1 and 2
        p = problem_linear_2x2()
        tr = aa_restarted_run(p, np.array([0.2, 0.1]),
                              AccelConfig(window_m=2, restart=True, max_iters=9, stop_tol=0.0))
        sizes = [b.beta.shape[0] for b in tr.betas]
        assert sizes == [0, 1, 2, 0, 1, 2, 0, 1, 2]


class TestRunScheme:
    def test_dispatch(self):
        p = problem_linear_2x2()
        x0 = np.array([0.2, 0.1])
        fp = run_scheme(p, x0, AccelConfig(window_m=0, max_iters=5, stop_tol=0.0))
        aa = run_scheme(p, x0, AccelConfig(window_m=1, max_iters=5, stop_tol=0.0))
        rs = run_scheme(p, x0, AccelConfig(window_m=1, restart=True, max_iters=5, stop_tol=0.0))
        assert all(b.beta.size == 0 for b in fp.betas)
        assert aa.betas[1].beta.size == 1
        assert len(rs) == 6


def _gmres_min_residual_bruteforce(A, b, x0, k):
    """min ||r0 - sum_i c_i A^{i+1} r0|| over the degree-k residual polynomial."""
    r0 = b - A @ x0
    cols = []
    v = r0
    for _ in range(k):
        v = A @ v
        cols.append(v)
    K = np.column_stack(cols)
    c, *_ = np.linalg.lstsq(K, r0, rcond=None)
    return float(np.linalg.norm(r0 - K @ c))


class TestGmres:
    def test_start_at_solution(self):
        p = problem_linear_2x2()
        tr = gmres_run(p.affine, np.zeros(2), AccelConfig(max_iters=10))
        assert len(tr) == 1
        assert tr.converged

    def test_finite_termination(self):
        p = problem_linear_2x2()
        tr = gmres_run(p.affine, np.array([0.2, 0.1]), AccelConfig(max_iters=10, stop_tol=0.0))
        assert tr.residual_norms[min(2, len(tr) - 1)] <= 1e-10

    def test_residuals_nonincreasing(self):
        p = problem_linear_200(-0.3, 0.3, -0.3)
        rng = np.random.default_rng(6)
        x0 = rng.uniform(-1, 1, 200)
        tr = gmres_run(p.affine, x0, AccelConfig(max_iters=30, stop_tol=0.0))
        res = tr.residual_norms
        for k in range(1, len(res)):
            assert res[k] <= res[k - 1] * (1 + 1e-12) + 1e-14 * res[0]

    def test_matches_bruteforce_polynomial_minimization(self):
        p = problem_linear_2x2()
        x0 = np.array([0.2, 0.1])
        tr = gmres_run(p.affine, x0, AccelConfig(max_iters=2, stop_tol=0.0))
        A, b = p.affine.A, p.affine.b
        for k in (1, 2):
            if k < len(tr):
                expected = _gmres_min_residual_bruteforce(A, b, x0, k)
                assert abs(tr.residual_norms[k] - expected) < 1e-10


class TestGmresCorrespondence:
    def test_linear_2x2_small_kmax(self):
        p = problem_linear_2x2()
        dev = aa_full_window_vs_gmres_check(p.affine, np.array([0.2, 0.1]), k_max=2)
        assert dev <= 1e-8

    def test_linear_200_instance(self):
        p = problem_linear_200(-0.3, 0.3, -0.3)
        rng = np.random.default_rng(7)
        x0 = rng.uniform(-1, 1, 200)
        dev = aa_full_window_vs_gmres_check(p.affine, x0, k_max=10)
        assert dev <= 1e-6

    def test_stagnation_detected(self):
        # A = I - M is a rotation by 90 degrees: r0 is orthogonal to A r0 and
        # the first GMRES step makes no progress
        M = np.array([[1.0, -1.0], [1.0, 1.0]])
        spec = AffineSpec(M=M, b=np.zeros(2))
        with pytest.raises(StagnationDetected):
            aa_full_window_vs_gmres_check(spec, np.array([1.0, 0.0]), k_max=2)
