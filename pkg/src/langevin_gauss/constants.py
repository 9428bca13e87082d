"""Explicit constants of the Gaussian-approximation bounds.

With ``V = sigma(0)``, ``Q = V V^T`` and ``n_Q = ||Q||_F d^2``:

* ``C0 = Tr(V^T V)``
* ``C_star = n_Q / delta``
* ``eps_star = min(delta / (8 c1 n_Q), delta / ell^2)``
* ``K = 96 c0 / n_Q + 2 ell sqrt(C0) / delta``
* ``C_lemmaC = 48 c0 / n_Q + ell sqrt(C0) / delta``
* ``C_lemmaC_alt = (48 c0 C_star + ell sqrt(C0)) / delta``
* ``t_eps(eps) = max(ln(4 C0 / (delta C^2 eps)), ln(4 d ||Sigma^{1/2}||_F^2 / (C^2 eps))) / delta``
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .linalg import fro_norm, solve_lyapunov_kron, sym_sqrt


@dataclass(frozen=True)
class ConstantsReport:
    C0: float
    C_star: float
    eps_star: float
    K: float
    C_lemmaC: float
    C_lemmaC_alt: float
    sigma_sqrt_fro2: float
    delta: float
    d: int
    declared_unaudited: bool = False

    @property
    def C_bound(self):
        """The larger of the two gap constants, used in one-sided checks."""
        return max(self.C_lemmaC, self.C_lemmaC_alt)

    @property
    def constants_consistent(self):
        return math.isclose(self.C_lemmaC, self.C_lemmaC_alt, rel_tol=1e-12)

    def t_eps(self, eps, C=None):
        C = self.C_lemmaC if C is None else C
        a = math.log(4.0 * self.C0 / (self.delta * C * C * eps)) / self.delta
        b = math.log(4.0 * self.d * self.sigma_sqrt_fro2 / (C * C * eps)) / self.delta
        return max(a, b)

    def to_dict(self):
        out = asdict(self)
        out["eps_star"] = _json_float(self.eps_star)
        out["C_bound"] = self.C_bound
        out["K_equals_2C"] = math.isclose(self.K, 2.0 * self.C_lemmaC, rel_tol=1e-12)
        out["gap_constants_consistent"] = self.constants_consistent
        return out


def _json_float(v):
    return "inf" if math.isinf(v) else v


def constants(spec):
    """All derived constants for a problem (see module docstring)."""
    V = spec.sigma_at_zero
    Q = V @ V.T
    d = spec.d
    delta = spec.delta
    nq = fro_norm(Q) * d * d
    C0 = float((V.T @ V).trace())
    C_star = nq / delta
    first = delta / (8.0 * spec.c1 * nq)
    second = math.inf if spec.ell == 0 else delta / spec.ell ** 2
    root = spec.ell * math.sqrt(C0)
    K = 96.0 * spec.c0 / nq + 2.0 * root / delta
    C = 48.0 * spec.c0 / nq + root / delta
    C_alt = (48.0 * spec.c0 * C_star + root) / delta
    sigma = solve_lyapunov_kron(spec.jacobian_at_zero, Q).sigma_inf
    s2 = fro_norm(sym_sqrt(sigma)) ** 2
    return ConstantsReport(C0, C_star, min(first, second), K, C, C_alt, s2, delta, d,
                           declared_unaudited=bool(spec.unaudited))


def eps_star(spec):
    return constants(spec).eps_star


def coupling_eps_max(spec):
    """``delta / ell^2`` (infinite for additive noise)."""
    return math.inf if spec.ell == 0 else spec.delta / spec.ell ** 2
