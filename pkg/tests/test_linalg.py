import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from langevin_gauss.linalg import (LinalgError, covariance_flow, fro_norm, jacobi_eigh, lyapunov_residual,
                                   mat_exp, one_norm, solve_lyapunov_kron, solve_lyapunov_quadrature, sym_sqrt)

finite = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)


def square(d):
    return arrays(np.float64, (d, d), elements=finite)


def random_stable(rng, d, margin=0.5):
    """Matrix whose symmetric part is >= margin * I."""
    M = rng.normal(size=(d, d))
    lam = np.linalg.eigvalsh((M + M.T) / 2)[0]
    return M + (margin - lam + rng.random()) * np.eye(d)


def test_norm_examples():
    assert fro_norm(np.eye(2)) == pytest.approx(math.sqrt(2))
    assert one_norm(np.eye(2)) == 2.0
    M = np.array([[1.0, -2.0], [3.0, 0.0]])
    assert one_norm(M) == 6.0
    assert fro_norm(M) == pytest.approx(math.sqrt(14))


@given(st.integers(1, 6).flatmap(square))
def test_equivalence_of_norms(M):
    d = M.shape[0]
    assert fro_norm(M) <= one_norm(M) * (1 + 1e-12) + 1e-300
    assert one_norm(M) <= d * fro_norm(M) * (1 + 1e-12) + 1e-300


@given(st.integers(1, 8).flatmap(lambda d: st.tuples(square(d), square(d))))
def test_sub_multiplicative(pair):
    A, B = pair
    assert fro_norm(A @ B) <= fro_norm(A) * fro_norm(B) * (1 + 1e-12) + 1e-12


@given(st.integers(1, 8).flatmap(lambda d: st.tuples(square(d), square(d))))
def test_trace_bound(pair):
    A, B = pair
    d = A.shape[0]
    assert abs(np.trace(A @ B)) <= d * one_norm(A) * fro_norm(B) * (1 + 1e-12) + 1e-12


def test_mat_exp_examples():
    np.testing.assert_array_equal(mat_exp(np.zeros((3, 3))), np.eye(3))
    assert mat_exp(np.array([[-1.0]]))[0, 0] == pytest.approx(math.exp(-1), rel=1e-15)
    R = mat_exp(np.array([[0.0, 1.0], [-1.0, 0.0]]), math.pi / 2)
    np.testing.assert_allclose(R, [[0.0, 1.0], [-1.0, 0.0]], atol=1e-12)


def test_mat_exp_against_eigendecomposition():
    rng = np.random.default_rng(0)
    for _ in range(20):
        S = rng.normal(size=(4, 4))
        S = S + S.T
        S *= 2.0 / np.abs(S).sum()  # ||S||_1 <= 2, so ||S t|| <= 10 for t <= 5
        w, V = np.linalg.eigh(S)
        for t in (0.3, 1.0, 5.0):
            ref = (V * np.exp(w * t)) @ V.T
            err = np.abs(mat_exp(S, t) - ref).max() / np.abs(ref).max()
            assert err <= 1e-12


def test_mat_exp_overflow_reported():
    with pytest.raises(OverflowError):
        mat_exp(np.array([[1000.0]]), 10.0)


@settings(deadline=None)
@given(arrays(np.float64, (3, 3), elements=st.floats(-1, 1)), st.floats(0, 2), st.floats(0, 2))
def test_mat_exp_semigroup(M, s, t):
    lhs = mat_exp(M, s + t)
    rhs = mat_exp(M, s) @ mat_exp(M, t)
    assert np.abs(lhs - rhs).max() <= 1e-10 * max(1.0, np.abs(lhs).max())


def test_jacobi_eigh_reconstructs():
    rng = np.random.default_rng(1)
    for d in (1, 2, 5, 8):
        M = rng.normal(size=(d, d))
        S = M + M.T
        w, Q = jacobi_eigh(S)
        np.testing.assert_allclose(Q @ np.diag(w) @ Q.T, S, atol=1e-12)
        np.testing.assert_allclose(Q.T @ Q, np.eye(d), atol=1e-12)
        assert np.all(np.diff(w) >= 0)


def test_sym_sqrt_examples():
    np.testing.assert_allclose(sym_sqrt(np.eye(3)), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(sym_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)
    S = np.array([[2.0, 1.0], [1.0, 2.0]])
    R = sym_sqrt(S)
    assert fro_norm(R @ R - S) <= 1e-10 * max(1.0, fro_norm(S))
    np.testing.assert_array_equal(R, R.T)


def test_sym_sqrt_rejects_bad_input():
    with pytest.raises(ValueError):
        sym_sqrt(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        sym_sqrt(np.diag([1.0, -1.0]))


def test_sym_sqrt_clips_tiny_negative():
    R = sym_sqrt(np.diag([1.0, -1e-13]))
    np.testing.assert_allclose(R, np.diag([1.0, 0.0]), atol=1e-12)


@settings(deadline=None)
@given(arrays(np.float64, (4, 4), elements=st.floats(-3, 3)))
def test_sym_sqrt_property(M):
    S = M @ M.T
    R = sym_sqrt(S)
    assert fro_norm(R @ R - S) <= 1e-10 * max(1.0, fro_norm(S))
    assert np.linalg.eigvalsh(R)[0] >= -1e-10


def test_lyapunov_kron_examples():
    np.testing.assert_allclose(solve_lyapunov_kron([[1.0]], [[1.0]]).sigma_inf, [[0.5]], atol=1e-15)
    np.testing.assert_allclose(solve_lyapunov_kron(2 * np.eye(2), np.eye(2)).sigma_inf, 0.25 * np.eye(2),
                               atol=1e-15)


def test_lyapunov_kron_independent_solve():
    # second implementation path: row-major vectorisation solved by least squares
    A = np.array([[2.0, 1.0], [0.0, 3.0]])
    Q = np.eye(2)
    sol = solve_lyapunov_kron(A, Q)
    I = np.eye(2)
    K = np.kron(A, I) + np.kron(I, A)  # row-major: vec_r(AX) = (A kron I) vec_r(X)
    x = np.linalg.lstsq(K, Q.reshape(-1), rcond=None)[0].reshape(2, 2)
    np.testing.assert_allclose(sol.sigma_inf, x, atol=1e-12)
    assert sol.residual_fro <= 1e-12
    assert sol.method == "kronecker"
    assert lyapunov_residual(A, sol.sigma_inf, Q) <= 1e-12


def test_lyapunov_singular_rejected():
    A = np.array([[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(LinalgError):
        solve_lyapunov_kron(A, np.eye(2))


def test_lyapunov_solution_spd():
    rng = np.random.default_rng(4)
    for _ in range(10):
        A = random_stable(rng, 4)
        B = rng.normal(size=(4, 4))
        sol = solve_lyapunov_kron(A, B @ B.T + 0.1 * np.eye(4))
        np.testing.assert_array_equal(sol.sigma_inf, sol.sigma_inf.T)
        assert np.linalg.eigvalsh(sol.sigma_inf)[0] > 0
        assert sol.residual_fro <= 1e-10 * max(1.0, fro_norm(B @ B.T))


def test_lyapunov_quadrature_examples():
    q = solve_lyapunov_quadrature([[1.0]], [[1.0]], tol=1e-8)
    assert abs(q.sigma_inf[0, 0] - 0.5) <= 1e-8
    assert q.method == "quadrature"
    q = solve_lyapunov_quadrature(2 * np.eye(2), np.eye(2), tol=1e-8)
    assert np.abs(q.sigma_inf - 0.25 * np.eye(2)).max() <= 1e-8


def test_lyapunov_methods_agree():
    rng = np.random.default_rng(5)
    for _ in range(10):
        A = random_stable(rng, 3)
        k = solve_lyapunov_kron(A, np.eye(3)).sigma_inf
        q = solve_lyapunov_quadrature(A, np.eye(3), tol=1e-9).sigma_inf
        assert np.abs(k - q).max() <= 1e-7


def test_quadrature_rejects_loose_tolerance():
    with pytest.raises(ValueError):
        solve_lyapunov_quadrature([[1.0]], [[1.0]], tol=1e-2)


def test_covariance_flow_examples():
    A, Q = np.array([[1.0]]), np.array([[1.0]])
    flow = covariance_flow(A, Q, [0.0, 1.0, 20.0])
    assert flow.sigmas[0][0, 0] == 0.0
    assert flow.sigmas[1][0, 0] == pytest.approx((1 - math.exp(-2)) / 2, abs=1e-12)
    assert abs(flow.sigmas[2][0, 0] - flow.sigma_inf[0, 0]) <= 1e-8
    assert flow.max_discrepancy <= 1e-8


def test_covariance_flow_invariants_rotational():
    A = np.array([[1.0, 2.0], [-2.0, 1.0]])
    times = np.linspace(0, 5, 26)
    flow = covariance_flow(A, np.eye(2), times)
    assert flow.max_discrepancy <= 1e-8
    for S in flow.sigmas:
        np.testing.assert_allclose(S, S.T, atol=1e-14)
        assert np.linalg.eigvalsh(S)[0] >= -1e-12
    assert np.all(np.diff(flow.distances()) <= 1e-15)


def test_covariance_flow_csv(tmp_path):
    flow = covariance_flow(np.array([[1.0, 0.5], [0.0, 2.0]]), np.eye(2), [0.0, 0.5, 1.0])
    path = tmp_path / "flow.csv"
    flow.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == ["t", "fro_dist_to_sigma_inf", "s11", "s12", "s21", "s22"]
    row = [float(v) for v in lines[2].split(",")]
    assert row[0] == 0.5
    np.testing.assert_array_equal(row[2:], flow.sigmas[1].reshape(-1))


def test_covariance_flow_rejects_decreasing_times():
    with pytest.raises(ValueError):
        covariance_flow(np.eye(1), np.eye(1), [1.0, 0.5])
