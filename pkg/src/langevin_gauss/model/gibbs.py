"""Quadrature oracle for one-dimensional Gibbs invariant laws.

For ``F = V'`` and unit diffusion the invariant law is
``exp(-2 V(x) / eps) / Z`` with ``Z`` the normalising constant.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson
from scipy.special import ndtri

from .expr import FieldExpr

BOUNDARY_MASS = 1e-6


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GibbsTable:
    x: np.ndarray
    density: np.ndarray
    epsilon: float

    def expect(self, g):
        return float(simpson(g(self.x) * self.density, x=self.x))

    def moment(self, k):
        return self.expect(lambda x: x ** k)

    def abs_moment(self, p):
        return self.expect(lambda x: np.abs(x) ** p)

    @property
    def mass(self):
        return float(simpson(self.density, x=self.x))

    @property
    def mean(self):
        return self.moment(1)

    @property
    def variance(self):
        m = self.mean
        return self.expect(lambda x: (x - m) ** 2)

    def rescaled_wp_to_gaussian(self, var, p=2.0):
        """``W_p`` between the law of ``X / sqrt(eps)`` and ``N(0, var)``.

        Uses the monotone rearrangement ``z -> sqrt(var) Phi^{-1}(F(z))`` and
        integrates ``|z - T(z)|^p`` against the density.
        """
        cdf = cumulative_trapezoid(self.density, self.x, initial=0.0)
        total = cdf[-1]
        lower = cdf / total
        upper = (total - cdf) / total
        lo_side = lower <= 0.5
        with np.errstate(divide="ignore"):
            q = np.where(lo_side, ndtri(np.clip(lower, 1e-300, 1.0)), -ndtri(np.clip(upper, 1e-300, 1.0)))
        z = self.x / np.sqrt(self.epsilon)
        cost = np.abs(z - np.sqrt(var) * q) ** p
        cost = np.where(np.isfinite(cost), cost, 0.0)
        return float(simpson(cost * self.density, x=self.x) / self.mass) ** (1.0 / p)


def _potential_callable(V):
    if isinstance(V, FieldExpr):
        if V.d != 1 or len(V.components) != 1:
            raise ValueError("Gibbs oracle needs a scalar potential in one variable")
        return lambda x: V(np.asarray(x, dtype=float).reshape(-1, 1))[:, 0]
    return V


def _tail_mass(edge, inner, h):
    # mass beyond the edge if the density keeps decaying at its local rate
    if edge <= 0.0:
        return 0.0
    if inner <= edge:
        return np.inf
    return edge * h / np.log(inner / edge)


def gibbs_density_oracle(V, epsilon, grid):
    """Tabulate ``exp(-2 V / eps) / Z`` on ``grid = (lo, hi, n)``.

    ``n`` must be odd (composite Simpson). Raises :class:`GridError` when the
    grid is too narrow, i.e. the extrapolated mass beyond either end exceeds
    ``1e-6``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    lo, hi, n = grid
    n = int(n)
    if n < 3 or n % 2 == 0 or not hi > lo:
        raise GridError("grid must be (lo, hi, n) with lo < hi and odd n >= 3")
    pot = _potential_callable(V)
    x = np.linspace(lo, hi, n)
    v = np.asarray(pot(x), dtype=float)
    w = np.exp(-2.0 * (v - v.min()) / epsilon)
    Z = simpson(w, x=x)
    dens = w / Z
    edge = max(_tail_mass(dens[0], dens[1], x[1] - x[0]), _tail_mass(dens[-1], dens[-2], x[1] - x[0]))
    if edge > BOUNDARY_MASS:
        raise GridError(f"grid [{lo}, {hi}] too narrow: boundary mass {edge:.3g} > {BOUNDARY_MASS:g}")
    return GibbsTable(x, dens, float(epsilon))


def default_grid(spec_or_var, epsilon, n=20001, width=12.0):
    """Symmetric grid spanning ``width`` stationary standard deviations."""
    half = width * np.sqrt(epsilon * spec_or_var)
    return (-half, half, n)
