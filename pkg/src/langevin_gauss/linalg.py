"""Dense small-matrix kernels.

Norms, the matrix exponential, a Jacobi-based symmetric square root, two
independent Lyapunov solvers and the Ornstein-Uhlenbeck covariance flow.
All routines are pure functions of their (small, dense) inputs.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np


class LinalgError(ArithmeticError):
    """Numerical failure inside a matrix kernel."""


def _square(M, name="M"):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def fro_norm(M):
    M = np.asarray(M, dtype=float)
    m = float(np.max(np.abs(M))) if M.size else 0.0
    if m == 0.0 or not math.isfinite(m):
        return m
    # rescale so tiny or huge entries neither underflow nor overflow
    return m * float(math.sqrt(np.sum((M / m) ** 2)))


def one_norm(M):
    """Entrywise 1-norm, the sum of absolute values of all entries."""
    return float(np.sum(np.abs(M)))


def sym_part(M):
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def min_sym_eig(M):
    """Smallest eigenvalue of the symmetric part of ``M``."""
    return float(np.linalg.eigvalsh(sym_part(M))[0])


# ---------------------------------------------------------------------------
# matrix exponential: scaling and squaring with the degree-13 Pade approximant

_THETA13 = 5.371920351148152
_PADE13 = (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
           1187353796428800.0, 129060195264000.0, 10559470521600.0,
           670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
           960960.0, 16380.0, 182.0, 1.0)


def mat_exp(M, t=1.0):
    """``exp(M t)`` by scaling and squaring with a [13/13] Pade approximant.

    Raises
    ------
    OverflowError
        If the result has non-finite entries.
    """
    A = _square(M) * float(t)
    n = A.shape[0]
    ident = np.eye(n)
    norm1 = float(np.max(np.sum(np.abs(A), axis=0))) if n else 0.0
    if norm1 == 0.0:
        return ident
    s = 0
    if norm1 > _THETA13:
        s = int(math.ceil(math.log2(norm1 / _THETA13)))
        A = A / (2.0 ** s)
    b = _PADE13
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    with np.errstate(over="ignore", invalid="ignore"):
        R = np.linalg.solve(V - U, V + U)
        for _ in range(s):
            R = R @ R
    if not np.all(np.isfinite(R)):
        raise OverflowError(f"matrix exponential overflow (||Mt||_1 = {norm1:.3g})")
    return R


# ---------------------------------------------------------------------------
# symmetric eigendecomposition (cyclic Jacobi) and PSD square root

def jacobi_eigh(S, tol=1e-14, max_sweeps=100):
    """Eigenvalues and eigenvectors of a symmetric matrix by cyclic Jacobi.

    Returns ``(w, Q)`` with ``S = Q diag(w) Q^T``; eigenvalues ascending.
    """
    A = np.array(_square(S, "S"), dtype=float)
    n = A.shape[0]
    Q = np.eye(n)
    scale = fro_norm(A)
    if scale == 0.0:
        return np.zeros(n), Q
    for _ in range(max_sweeps):
        off = fro_norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    tq = 0.5 / theta
                else:
                    tq = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(tq * tq + 1.0)
                sn = tq * c
                Ap = A[:, p].copy()
                Aq = A[:, q].copy()
                A[:, p] = c * Ap - sn * Aq
                A[:, q] = sn * Ap + c * Aq
                Ap = A[p, :].copy()
                Aq = A[q, :].copy()
                A[p, :] = c * Ap - sn * Aq
                A[q, :] = sn * Ap + c * Aq
                A[p, q] = A[q, p] = 0.0
                Qp = Q[:, p].copy()
                Qq = Q[:, q].copy()
                Q[:, p] = c * Qp - sn * Qq
                Q[:, q] = sn * Qp + c * Qq
    else:
        raise LinalgError("Jacobi eigensolver did not converge")
    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], Q[:, order]


def sym_sqrt(S):
    """Symmetric PSD square root ``R`` with ``R @ R == S``.

    Eigenvalues in ``[-1e-8, 0)`` are treated as round-off and clipped.
    """
    S = _square(S, "S")
    if np.max(np.abs(S - S.T), initial=0.0) > 1e-10:
        raise ValueError("sym_sqrt: input is not symmetric")
    S = sym_part(S)
    w, Q = jacobi_eigh(S)
    if w.size and w[0] < -1e-8:
        raise ValueError(f"sym_sqrt: input is not PSD (min eigenvalue {w[0]:.3g})")
    w = np.clip(w, 0.0, None)
    R = (Q * np.sqrt(w)) @ Q.T
    return sym_part(R)


# ---------------------------------------------------------------------------
# Lyapunov equation  A X + X A^T = Q

@dataclass(frozen=True)
class LyapunovSolution:
    sigma_inf: np.ndarray
    residual_fro: float
    method: str


def lyapunov_residual(A, X, Q):
    A = np.asarray(A, dtype=float)
    return fro_norm(A @ X + X @ A.T - Q)


def solve_lyapunov_kron(A, Q):
    """Solve ``A X + X A^T = Q`` through the ``d^2 x d^2`` Kronecker system.

    ``vec`` is column-major, so the system matrix is ``I (x) A + A (x) I``.
    Intended for ``d <= 64``.
    """
    A = _square(A, "A")
    Q = _square(Q, "Q")
    d = A.shape[0]
    if Q.shape != A.shape:
        raise ValueError("A and Q must have the same shape")
    if d > 64:
        raise ValueError(f"solve_lyapunov_kron: d={d} exceeds 64")
    ident = np.eye(d)
    K = np.kron(ident, A) + np.kron(A, ident)
    try:
        x = np.linalg.solve(K, Q.reshape(-1, order="F"))
    except np.linalg.LinAlgError as exc:
        raise LinalgError("singular Kronecker system: Lyapunov solution not unique") from exc
    X = sym_part(x.reshape(d, d, order="F"))
    return LyapunovSolution(X, lyapunov_residual(A, X, Q), "kronecker")


def _gl_panels(f, T, n_panels, nodes, weights):
    edges = np.linspace(0.0, T, n_panels + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        for xk, wk in zip(nodes, weights):
            total = total + wk * half * f(mid + half * xk)
    return total


def solve_lyapunov_quadrature(A, Q, tol=1e-8, delta=None, order=8, max_refinements=20):
    """Solve ``A X + X A^T = Q`` from ``X = int_0^inf e^{-As} Q e^{-A^T s} ds``.

    The integral is truncated where the tail falls below ``tol / 2`` and
    evaluated with Gauss-Legendre panels, doubling the panel count until two
    successive estimates agree to ``tol`` in Frobenius norm. ``delta`` caps
    the decay rate used for the truncation horizon; the smaller of it and the
    smallest eigenvalue of the symmetric part of ``A`` is used.
    """
    A = _square(A, "A")
    Q = _square(Q, "Q")
    if not 0.0 < tol <= 1e-4:
        raise ValueError("tol must lie in (0, 1e-4]")
    rate = min_sym_eig(A)
    if delta is not None:
        rate = min(rate, float(delta))
    if rate <= 0.0:
        raise ValueError("symmetric part of A must be positive definite")
    qn = fro_norm(Q)
    if qn == 0.0:
        Z = np.zeros_like(Q)
        return LyapunovSolution(Z, 0.0, "quadrature")
    T = max(-math.log(tol * rate / qn) / (2.0 * rate), 0.0)
    nodes, weights = np.polynomial.legendre.leggauss(order)

    def integrand(s):
        E = mat_exp(-A, s)
        return E @ Q @ E.T

    n_panels = 4
    prev = _gl_panels(integrand, T, n_panels, nodes, weights)
    for _ in range(max_refinements):
        n_panels *= 2
        cur = _gl_panels(integrand, T, n_panels, nodes, weights)
        if fro_norm(cur - prev) <= tol:
            X = sym_part(cur)
            return LyapunovSolution(X, lyapunov_residual(A, X, Q), "quadrature")
        prev = cur
    raise LinalgError("Lyapunov quadrature did not converge within the refinement budget")


# ---------------------------------------------------------------------------
# covariance flow  dS/dt = -A S - S A^T + Q,  S(0) = 0

@dataclass
class CovarianceFlow:
    times: np.ndarray
    sigmas: list
    sigma_inf: np.ndarray
    max_discrepancy: float = 0.0
    rk4_sigmas: list = field(default_factory=list, repr=False)

    def distances(self):
        return np.array([fro_norm(S - self.sigma_inf) for S in self.sigmas])

    def write_csv(self, path):
        d = self.sigma_inf.shape[0]
        header = ["t", "fro_dist_to_sigma_inf"] + [f"s{i + 1}{j + 1}" for i in range(d) for j in range(d)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, S, dist in zip(self.times, self.sigmas, self.distances()):
                w.writerow([f"{t:.17g}", f"{dist:.17g}"] + [f"{v:.17g}" for v in S.reshape(-1)])


def ou_covariance(A, Q, t, sigma_inf=None):
    """Closed form ``S_t = S - e^{-At} S e^{-A^T t}`` with ``S`` the Lyapunov solution."""
    if sigma_inf is None:
        sigma_inf = solve_lyapunov_kron(A, Q).sigma_inf
    E = mat_exp(-np.asarray(A, dtype=float), t)
    return sym_part(sigma_inf - E @ sigma_inf @ E.T)


def _rk4_flow(A, Q, times, h_max):
    def rhs(S):
        return -A @ S - S @ A.T + Q

    out = []
    S = np.zeros_like(A)
    t = 0.0
    for target in times:
        span = target - t
        if span > 0.0:
            n = int(math.ceil(span / h_max))
            h = span / n
            for _ in range(n):
                k1 = rhs(S)
                k2 = rhs(S + 0.5 * h * k1)
                k3 = rhs(S + 0.5 * h * k2)
                k4 = rhs(S + h * k3)
                S = S + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t = target
        out.append(sym_part(S))
    return out


def covariance_flow(A, Q, times, check_tol=1e-6):
    """Covariance ``S_t`` of the OU process started at 0, computed two ways.

    RK4 on the matrix ODE (step at most ``1e-3 / ||A||_F``) and the closed
    form are both evaluated; ``sigmas`` holds the closed form and
    ``max_discrepancy`` the largest Frobenius gap between the two.

    Raises
    ------
    LinalgError
        If the two routes disagree by more than ``check_tol``.
    """
    A = _square(A, "A")
    Q = _square(Q, "Q")
    times = np.asarray(times, dtype=float).reshape(-1)
    if times.size and (times[0] < 0 or np.any(np.diff(times) <= 0)):
        raise ValueError("times must be nonnegative and strictly increasing")
    sol = solve_lyapunov_kron(A, Q)
    closed = [ou_covariance(A, Q, t, sol.sigma_inf) if t > 0 else np.zeros_like(A) for t in times]
    an = fro_norm(A)
    h_max = 1e-3 / an if an > 0 else 1e-3
    rk = _rk4_flow(A, Q, times, h_max)
    gap = max((fro_norm(a - b) for a, b in zip(closed, rk)), default=0.0)
    if gap > check_tol:
        raise LinalgError(f"covariance flow: RK4 and closed form disagree by {gap:.3g}")
    return CovarianceFlow(times, closed, sol.sigma_inf, gap, rk)
