"""Trajectory simulation for small-noise Langevin dynamics.

Euler-Maruyama for ``dX = -F(X) dt + sqrt(eps) sigma(X) dB``, exact sampling
of the linearised OU process, and synchronous couplings in which two
processes consume the same Brownian increments. Paths are processed in fixed
chunks; every increment comes from :class:`~langevin_gauss.rng.NoiseSource`,
so outputs do not depend on the number of worker threads.
"""
from __future__ import annotations

import csv
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .constants import coupling_eps_max, eps_star
from .linalg import covariance_flow, fro_norm, mat_exp, sym_sqrt
from .rng import NoiseSource

BLOWUP = 1e8
CHUNK = 512
BLOCK = 256

STREAM_ENSEMBLE = 0
STREAM_COUPLING = 1
STREAM_LINEARIZATION = 2
STREAM_OU = 3


class BlowUpError(ArithmeticError):
    """A trajectory left the ball of radius 1e8 (or became non-finite)."""


class EpsilonRangeError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    epsilon: float
    dt: float
    t_end: float
    n_paths: int
    seed: int
    record_times: tuple = ()

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not self.dt > 0 or not self.t_end > 0:
            raise ValueError("dt and t_end must be positive")
        if self.dt > self.t_end * (1 + 1e-12):
            raise ValueError("dt must not exceed t_end")
        if self.n_paths < 1:
            raise ValueError("n_paths must be positive")
        rt = tuple(float(t) for t in (self.record_times or (self.t_end,)))
        if any(b <= a for a, b in zip(rt, rt[1:])) or rt[0] < 0 or rt[-1] > self.t_end * (1 + 1e-12):
            raise ValueError("record_times must be increasing within [0, t_end]")
        object.__setattr__(self, "record_times", rt)

    @property
    def n_steps(self):
        return _steps(self.t_end, self.dt)

    def record_steps(self):
        return [_steps(t, self.dt) for t in self.record_times]


def _steps(t, dt):
    k = t / dt
    n = int(round(k))
    if abs(k - n) > 1e-6 * max(1.0, k):
        raise ValueError(f"time {t} is not a multiple of dt={dt}")
    return n


def default_dt(spec):
    """``min(1e-3, 0.01 / delta, 0.01 / ||DF(0)||_F)``."""
    jf = fro_norm(spec.jacobian_at_zero)
    return min(1e-3, 0.01 / spec.delta, 0.01 / jf if jf > 0 else math.inf)


def resolve_threads(threads=None):
    if threads is None:
        env = os.environ.get("LANGEVIN_GAUSS_THREADS")
        threads = int(env) if env else 1
    return max(1, int(threads))


@dataclass
class EnsembleSnapshot:
    time: float
    samples: np.ndarray
    problem: str
    epsilon: float
    blown_up: int = 0
    path_ids: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if self.path_ids is None:
            self.path_ids = np.arange(self.samples.shape[0])

    @property
    def n(self):
        return self.samples.shape[0]

    @property
    def d(self):
        return self.samples.shape[1]


def write_snapshots_csv(path, snapshots):
    """Columns ``t, path_id, x1..xd``; floats with 17 significant digits."""
    d = snapshots[0].d
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "path_id"] + [f"x{i + 1}" for i in range(d)])
        for snap in snapshots:
            t = f"{snap.time:.17g}"
            for pid, row in zip(snap.path_ids, snap.samples):
                w.writerow([t, int(pid)] + [f"{v:.17g}" for v in row])


def read_snapshots_csv(path, problem="csv", epsilon=float("nan")):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[:2] != ["t", "path_id"]:
        raise ValueError("snapshot CSV must start with columns t, path_id")
    by_t = {}
    for r in body:
        by_t.setdefault(float(r[0]), []).append((int(r[1]), [float(v) for v in r[2:]]))
    out = []
    for t in sorted(by_t):
        ids, xs = zip(*by_t[t])
        out.append(EnsembleSnapshot(t, np.array(xs), problem, epsilon, path_ids=np.array(ids)))
    return out


# ---------------------------------------------------------------------------
# stepping

def _diffuse(sig, dw):
    # sig: (n, d, d), dw: (n, d); explicit sum keeps per-row results batch-independent
    out = sig[:, :, 0] * dw[:, 0:1]
    for j in range(1, dw.shape[1]):
        out = out + sig[:, :, j] * dw[:, j:j + 1]
    return out


def em_step(spec, x, dW, dt, epsilon):
    """One Euler-Maruyama step ``x - F(x) dt + sqrt(eps) sigma(x) dW``.

    Accepts a single point ``(d,)`` or a batch ``(n, d)``.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    W = np.atleast_2d(np.asarray(dW, dtype=float))
    out = X - spec.F(X) * dt
    if epsilon:
        out = out + math.sqrt(epsilon) * _diffuse(spec.sigma(X), W)
    return out[0] if single else out


def _linear_step(A, S, eps, dt):
    """Euler step for the linearised drift with frozen diffusion ``S``."""
    At = A.T
    St = S.T
    root = math.sqrt(eps)

    def step(y, dw):
        drift = y[:, 0:1] * At[0][None, :]
        for j in range(1, y.shape[1]):
            drift = drift + y[:, j:j + 1] * At[j][None, :]
        noise = dw[:, 0:1] * St[0][None, :]
        for j in range(1, dw.shape[1]):
            noise = noise + dw[:, j:j + 1] * St[j][None, :]
        return y - drift * dt + root * noise

    return step


def _integrate_chunk(paths, init, step, noise, n_steps, record_steps, dt):
    """Advance coupled states over one chunk of paths.

    ``init`` is a tuple of ``(n, d)`` arrays, ``step(states, dw)`` returns the
    next tuple. Returns recorded state tuples (one per record step) and the
    blow-up mask.
    """
    states = tuple(np.array(s, dtype=float) for s in init)
    n = len(paths)
    blown = np.zeros(n, dtype=bool)
    records = {}
    wanted = sorted(set(record_steps))
    if 0 in wanted:
        records[0] = tuple(s.copy() for s in states)
    sq = math.sqrt(dt)
    k = 0
    while k < n_steps:
        m = min(BLOCK, n_steps - k)
        z = noise.normals(paths, k, m) * sq
        for i in range(m):
            with np.errstate(over="ignore", invalid="ignore"):
                states = step(states, z[i])
            k += 1
            if k in wanted or (k & 63) == 0 or k == n_steps:
                bad = np.zeros(n, dtype=bool)
                for s in states:
                    bad |= ~np.all(np.isfinite(s), axis=1) | (np.max(np.abs(s), axis=1) > BLOWUP)
                if bad.any():
                    blown |= bad
                    states = tuple(np.where(bad[:, None], 0.0, s) for s in states)
            if k in wanted:
                records[k] = tuple(s.copy() for s in states)
    return [records[r] for r in record_steps], blown


def _run(n_paths, make_init, step, noise, n_steps, record_steps, dt, threads):
    ids = np.arange(n_paths)
    chunks = [ids[i:i + CHUNK] for i in range(0, n_paths, CHUNK)]

    def work(chunk):
        return _integrate_chunk(chunk, make_init(len(chunk)), step, noise, n_steps, record_steps, dt)

    threads = resolve_threads(threads)
    if threads == 1 or len(chunks) == 1:
        results = [work(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, chunks))
    blown = np.concatenate([r[1] for r in results])
    recs = []
    for j in range(len(record_steps)):
        recs.append(tuple(np.concatenate([r[0][j][s] for r in results]) for s in range(len(results[0][0][j]))))
    return recs, blown


def _check_eps(spec, eps, override, limit=None):
    limit = eps_star(spec) if limit is None else limit
    if eps >= limit:
        msg = f"epsilon={eps} is not below the admissible threshold {limit:.6g}"
        if not override:
            raise EpsilonRangeError(msg)
        warnings.warn(msg + " (override in effect)", stacklevel=3)


def _start(spec, x0):
    x0 = np.zeros(spec.d) if x0 is None else np.asarray(x0, dtype=float).reshape(spec.d)
    return x0


def simulate_ensemble(spec, config, x0=None, threads=None, acceptance=False,
                      override_eps_star=False, stream=STREAM_ENSEMBLE):
    """Independent Euler-Maruyama paths from ``x0`` (default 0).

    Returns one :class:`EnsembleSnapshot` per record time. Blown-up paths are
    excluded and counted; with ``acceptance=True`` any blow-up raises
    :class:`BlowUpError`.
    """
    if config.epsilon > 0:
        _check_eps(spec, config.epsilon, override_eps_star)
    x0 = _start(spec, x0)
    eps, dt = config.epsilon, config.dt

    def step(states, dw):
        return (em_step(spec, states[0], dw, dt, eps),)

    noise = NoiseSource(config.seed, stream, spec.d)
    recs, blown = _run(config.n_paths, lambda n: (np.tile(x0, (n, 1)),), step, noise,
                       config.n_steps, config.record_steps(), dt, threads)
    nb = int(blown.sum())
    if nb and acceptance:
        raise BlowUpError(f"{nb} of {config.n_paths} paths blew up (dt={dt})")
    keep = ~blown
    ids = np.arange(config.n_paths)[keep]
    return [EnsembleSnapshot(t, r[0][keep], spec.name, eps, nb, ids)
            for t, r in zip(config.record_times, recs)]


def ou_exact_sample(A, S, epsilon, t, x0, n, seed, stream=STREAM_OU, problem="ou"):
    """Exact draws from ``N(e^{-At} x0, eps Sigma_t)``, the law of the OU process
    ``dY = -A Y dt + sqrt(eps) S dB`` at time ``t``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    S = np.atleast_2d(np.asarray(S, dtype=float))
    d = A.shape[0]
    x0 = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float).reshape(d)
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return EnsembleSnapshot(0.0, np.tile(x0, (n, 1)), problem, epsilon)
    mean = mat_exp(-A, t) @ x0
    cov = epsilon * covariance_flow(A, S @ S.T, [t]).sigmas[0]
    R = sym_sqrt(cov)
    z = NoiseSource(seed, stream, d).normals(np.arange(n), 0, 1)[0]
    return EnsembleSnapshot(float(t), mean + z @ R.T, problem, epsilon)


@dataclass
class CouplingSeries:
    """Monte Carlo mean of a squared distance at each record time."""
    times: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    n: int
    blown_up: int = 0

    @property
    def rms(self):
        return np.sqrt(self.mean)

    @property
    def rms_se(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.mean > 0, self.se / (2.0 * np.sqrt(self.mean)), 0.0)


def _series(times, sq_list, n, blown):
    mean = np.array([float(np.mean(s)) for s in sq_list])
    se = np.array([float(np.std(s, ddof=1) / math.sqrt(len(s))) if len(s) > 1 else 0.0 for s in sq_list])
    return CouplingSeries(np.asarray(times, dtype=float), mean, se, n, blown)


def coupled_pair_nonlinear(spec, x, x0, config, threads=None, acceptance=False,
                           stream=STREAM_COUPLING):
    """``E ||X_t(x) - X_t(x0)||^2`` under synchronous coupling.

    Requires ``eps <= delta / ell^2``.
    """
    lim = coupling_eps_max(spec)
    if config.epsilon > lim:
        raise EpsilonRangeError(f"epsilon={config.epsilon} exceeds delta/ell^2={lim:.6g}")
    xa = _start(spec, x)
    xb = _start(spec, x0)
    eps, dt = config.epsilon, config.dt

    def step(states, dw):
        return em_step(spec, states[0], dw, dt, eps), em_step(spec, states[1], dw, dt, eps)

    noise = NoiseSource(config.seed, stream, spec.d)
    recs, blown = _run(config.n_paths, lambda n: (np.tile(xa, (n, 1)), np.tile(xb, (n, 1))), step, noise,
                       config.n_steps, config.record_steps(), dt, threads)
    nb = int(blown.sum())
    if nb and acceptance:
        raise BlowUpError(f"{nb} coupled paths blew up")
    keep = ~blown
    sq = [np.sum((a[keep] - b[keep]) ** 2, axis=1) for a, b in recs]
    return _series(config.record_times, sq, int(keep.sum()), nb)


def coupled_pair_linearization(spec, config, threads=None, acceptance=False,
                               override_eps_star=False, stream=STREAM_LINEARIZATION):
    """``E ||X_t(0) - Y_t(0)||^2`` for the process and its linearisation.

    ``Y`` follows ``dY = -DF(0) Y dt + sqrt(eps) sigma(0) dB`` on the same
    Euler grid and with the same increments as ``X``.
    """
    _check_eps(spec, config.epsilon, override_eps_star)
    eps, dt = config.epsilon, config.dt
    lin = _linear_step(spec.jacobian_at_zero, spec.sigma_at_zero, eps, dt)

    def step(states, dw):
        return em_step(spec, states[0], dw, dt, eps), lin(states[1], dw)

    zero = np.zeros(spec.d)
    noise = NoiseSource(config.seed, stream, spec.d)
    recs, blown = _run(config.n_paths, lambda n: (np.tile(zero, (n, 1)), np.tile(zero, (n, 1))), step, noise,
                       config.n_steps, config.record_steps(), dt, threads)
    nb = int(blown.sum())
    if nb and acceptance:
        raise BlowUpError(f"{nb} linearisation-coupled paths blew up")
    keep = ~blown
    sq = [np.sum((a[keep] - b[keep]) ** 2, axis=1) for a, b in recs]
    return _series(config.record_times, sq, int(keep.sum()), nb)
