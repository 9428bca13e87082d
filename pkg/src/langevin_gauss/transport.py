"""Empirical and Gaussian Wasserstein distances, plus moment estimators."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .linalg import sym_sqrt
from .rng import derive_seed

ASSIGNMENT_CAP = 4096
ASSIGNMENT_WARN = 1024
N_BOOTSTRAP = 20


class HeavyTailWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class GaussianMeasure:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match mean of length {mean.size}")
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-12:
            raise ValueError("covariance must be symmetric")
        w = np.linalg.eigvalsh(cov)
        if w.size and w[0] < -1e-10:
            raise ValueError(f"covariance has negative eigenvalue {w[0]:.3g}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @classmethod
    def centered(cls, cov):
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        return cls(np.zeros(cov.shape[0]), cov)

    @property
    def d(self):
        return self.mean.size

    def root(self):
        return sym_sqrt(self.cov)

    def sample(self, n, seed):
        z = np.random.default_rng(seed).standard_normal((n, self.d))
        return self.mean + z @ self.root().T


@dataclass(frozen=True)
class TransportPlan:
    pairing: np.ndarray
    cost_p: float


@dataclass(frozen=True)
class DistanceEstimate:
    value: float
    method: str
    n: int
    p: float
    resample_sd: float | None = None

    def to_dict(self):
        return {"value": self.value, "method": self.method, "n": self.n, "p": self.p,
                "resample_sd": self.resample_sd}

    def to_json(self):
        return json.dumps(self.to_dict())


def _points(cloud):
    x = getattr(cloud, "samples", cloud)
    x = np.asarray(x, dtype=float)
    return x.reshape(-1, 1) if x.ndim == 1 else x


def _check_p(p):
    if not 1.0 <= p <= 2.0:
        raise ValueError(f"p must lie in [1, 2], got {p}")


def _same_size(a, b):
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"clouds have unequal sizes {a.shape[0]} and {b.shape[0]}")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"clouds have unequal dimensions {a.shape[1]} and {b.shape[1]}")


def w_p_sorted_1d(a, b, p=2.0):
    """Exact 1D ``W_p`` between equal-size empirical measures (monotone coupling)."""
    _check_p(p)
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise ValueError(f"clouds have unequal sizes {a.size} and {b.size}")
    diff = np.abs(np.sort(a) - np.sort(b))
    return DistanceEstimate(float(np.mean(diff ** p) ** (1.0 / p)), "sorted1d", a.size, float(p))


def cost_matrix(a, b, p):
    diff = a[:, None, :] - b[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    return dist if p == 1 else dist ** p


def w_p_assignment(a, b, p=2.0):
    """Exact ``W_p`` between equal-size clouds in ``R^d`` by optimal matching.

    The matching uses a shortest-augmenting-path (Jonker-Volgenant type)
    linear assignment solver on the cost ``||a_i - b_j||^p``.
    """
    _check_p(p)
    a, b = _points(a), _points(b)
    _same_size(a, b)
    n = a.shape[0]
    if n > ASSIGNMENT_CAP:
        raise ValueError(f"assignment limited to n <= {ASSIGNMENT_CAP}, got {n}")
    if n > ASSIGNMENT_WARN:
        warnings.warn(f"assignment with n={n} is slow (cubic cost)", RuntimeWarning, stacklevel=2)
    C = cost_matrix(a, b, p)
    rows, cols = linear_sum_assignment(C)
    pairing = np.empty(n, dtype=int)
    pairing[rows] = cols
    value = float(np.mean(C[rows, cols]) ** (1.0 / p))
    return DistanceEstimate(value, "assignment", n, float(p)), TransportPlan(pairing, value)


def plan_cost(a, b, plan, p):
    """``(mean ||a_i - b_pairing[i]||^p)^(1/p)`` recomputed from the clouds."""
    a, b = _points(a), _points(b)
    d = np.linalg.norm(a - b[plan.pairing], axis=1)
    return float(np.mean(d ** p) ** (1.0 / p))


def w2_sliced(a, b, n_projections=64, seed=0):
    """Sliced ``W_2``: root mean of squared 1D distances over random directions."""
    if n_projections < 16:
        raise ValueError("n_projections must be at least 16")
    a, b = _points(a), _points(b)
    _same_size(a, b)
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_projections, a.shape[1]))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pa = np.sort(a @ dirs.T, axis=0)
    pb = np.sort(b @ dirs.T, axis=0)
    per = np.mean((pa - pb) ** 2, axis=0)
    return DistanceEstimate(float(math.sqrt(np.mean(per))), "sliced", a.shape[0], 2.0)


def w2_gaussian_closed_form(g1, g2):
    """``W_2`` between two Gaussians (Bures formula)."""
    r2 = g2.root()
    cross = sym_sqrt(_sym(r2 @ g1.cov @ r2))
    tr = np.trace(g1.cov) + np.trace(g2.cov) - 2.0 * np.trace(cross)
    dm = g1.mean - g2.mean
    return float(math.sqrt(max(float(dm @ dm) + tr, 0.0)))


def _sym(M):
    return 0.5 * (M + M.T)


def empirical_distance(a, b, p=2.0):
    a, b = _points(a), _points(b)
    if a.shape[1] == 1:
        return w_p_sorted_1d(a[:, 0], b[:, 0], p)
    return w_p_assignment(a, b, p)[0]


def w2_empirical_vs_gaussian(cloud, g, seed, p=2.0, n_bootstrap=N_BOOTSTRAP):
    """Distance from an empirical cloud to a Gaussian via sampled counterparts.

    Each of ``n_bootstrap`` replicates draws ``n`` fresh samples from ``g`` and
    computes the exact empirical distance (sorted in 1D, assignment
    otherwise). The reported value is the replicate mean and ``resample_sd``
    their standard deviation.
    """
    _check_p(p)
    x = _points(cloud)
    n = x.shape[0]
    if n < 200:
        raise ValueError(f"need at least 200 samples, got {n}")
    if x.shape[1] != g.d:
        raise ValueError("cloud and Gaussian dimensions differ")
    if n_bootstrap < 2:
        raise ValueError("n_bootstrap must be at least 2")
    vals = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for r in range(n_bootstrap):
            y = g.sample(n, derive_seed(seed, r))
            vals.append(empirical_distance(x, y, p).value)
    vals = np.array(vals)
    method = "sorted1d" if x.shape[1] == 1 else "assignment"
    return DistanceEstimate(float(vals.mean()), method, n, float(p), float(vals.std(ddof=1)))


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    se: float
    heavy_tail: bool = False


def _mc(values):
    n = values.size
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float(values.mean()), se


def moment_estimates(cloud, orders=(2, 4, 6, 8)):
    """Monte Carlo ``E ||x||^k`` with standard errors, keyed by order."""
    x = _points(cloud)
    r2 = np.sum(x * x, axis=1)
    out = {}
    for k in orders:
        if k not in (2, 4, 6, 8):
            raise ValueError(f"moment order must be one of 2, 4, 6, 8, got {k}")
        out[k] = MomentEstimate(*_mc(r2 ** (k // 2)))
    return out


def exp_moment_estimate(cloud, lam):
    """Monte Carlo ``E exp(lam ||x||^2)``.

    Flags (and warns about) a heavy tail when the largest 1% of summands hold
    more than half of the total.
    """
    x = _points(cloud)
    if lam == 0:
        return MomentEstimate(1.0, 0.0)
    vals = np.exp(lam * np.sum(x * x, axis=1))
    mean, se = _mc(vals)
    k = max(1, int(math.ceil(0.01 * vals.size)))
    top = np.partition(vals, vals.size - k)[vals.size - k:]
    heavy = bool(top.sum() > 0.5 * vals.sum())
    if heavy:
        warnings.warn(f"exponential moment at lambda={lam} is dominated by its top 1% of samples",
                      HeavyTailWarning, stacklevel=2)
    return MomentEstimate(mean, se, heavy)
