"""Sampling audit of the declared hypothesis constants.

Sampling can refute a declared constant but never prove a global bound, so
a sampled check that finds no violation reports ``inconclusive``. ``pass``
is reserved for checks that are exact for the problem's structure (linear
drift, constant diffusion).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..linalg import min_sym_eig

VIOLATION_TOL = 1e-10


@dataclass
class HypothesisAudit:
    verdicts: dict
    witnesses: dict
    delta_hat: float
    ell_hat: float
    kappa_hat: float
    c0_hat: float
    c0_hessian_hat: float
    n_samples: int
    radius: float
    violations: dict = field(default_factory=dict)

    @property
    def ok(self):
        return all(v != "fail" for v in self.verdicts.values())

    def to_dict(self):
        return {
            "verdicts": dict(self.verdicts),
            "witnesses": {k: [np.asarray(p).tolist() for p in v] for k, v in self.witnesses.items()},
            "violations": dict(self.violations),
            "delta_hat": self.delta_hat,
            "ell_hat": self.ell_hat,
            "kappa_hat": self.kappa_hat,
            "c0_hat": self.c0_hat,
            "c0_hessian_hat": self.c0_hessian_hat,
            "n_samples": self.n_samples,
            "radius": self.radius,
        }


def sample_ball(rng, n, d, radius):
    g = rng.standard_normal((n, d))
    g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
    r = radius * rng.random(n) ** (1.0 / d)
    return g * r[:, None]


def _worst(gap, score):
    """Index of the violating sample with the lowest score, else the largest gap."""
    if gap.size == 0:
        return 0
    bad = np.flatnonzero(gap > VIOLATION_TOL)
    if bad.size:
        return int(bad[np.argmin(score[bad])])
    return int(np.argmax(gap))


def dissipativity_gap(spec, x, y):
    """``delta |x-y|^2 - <F(x)-F(y), x-y>``; positive means (A) is violated."""
    diff = x - y
    inner = np.sum((spec.F(x) - spec.F(y)) * diff, axis=1)
    return spec.delta * np.sum(diff * diff, axis=1) - inner


def lipschitz_gap(spec, x, y):
    ds = spec.sigma(x) - spec.sigma(y)
    lhs = np.sqrt(np.sum(ds * ds, axis=(1, 2)))
    return lhs - spec.ell * np.linalg.norm(x - y, axis=1)


def ellipticity_gap(spec, x):
    s = spec.sigma(x)
    lam = np.linalg.eigvalsh(s @ np.swapaxes(s, 1, 2))[:, 0]
    return spec.kappa - lam


def growth_gap(spec, x, hessian=False):
    vals = spec.d2f_norm(x) if hessian else np.linalg.norm(spec.F(x), axis=1)
    r2 = np.sum(x * x, axis=1)
    with np.errstate(over="ignore"):
        bound = spec.c0 * np.exp(spec.c1 * r2)
    return vals - bound


def audit_hypotheses(spec, n_samples, radius, seed):
    """Check (A)-(D) for the declared constants on random points in a ball.

    Pairs ``(x, y)`` are drawn uniformly in the ball of the given radius.
    Returns verdicts, the worst witness per hypothesis and the tightest
    empirical constants seen.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if not radius > 0:
        raise ValueError("radius must be positive")
    d = spec.d
    rng = np.random.default_rng(seed)
    x = sample_ball(rng, n_samples, d, radius)
    y = sample_ball(rng, n_samples, d, radius)
    diff2 = np.sum((x - y) ** 2, axis=1)
    keep = diff2 > 1e-24
    x, y, diff2 = x[keep], y[keep], diff2[keep]

    verdicts, witnesses, violations = {}, {}, {}

    # (A) dissipativity
    inner = np.sum((spec.F(x) - spec.F(y)) * (x - y), axis=1)
    ratio = inner / diff2
    delta_hat = float(ratio.min()) if ratio.size else math.inf
    gap = spec.delta * diff2 - inner
    i = _worst(gap, ratio)
    witnesses["A"] = (x[i], y[i]) if gap.size else ()
    violations["A"] = float(gap[i]) if gap.size else 0.0
    if spec.linear_drift is not None:
        lam = min_sym_eig(spec.linear_drift)
        exact_fail = lam < spec.delta - 1e-12
        if exact_fail:
            w, v = np.linalg.eigh(0.5 * (spec.linear_drift + spec.linear_drift.T))
            witnesses["A"] = (v[:, 0], np.zeros(d))
            violations["A"] = float(spec.delta - lam)
        delta_hat = min(delta_hat, lam)
        verdicts["A"] = "fail" if exact_fail or violations["A"] > VIOLATION_TOL else "pass"
    else:
        verdicts["A"] = "fail" if violations["A"] > VIOLATION_TOL else "inconclusive"

    # (C) Lipschitz diffusion, Frobenius norm
    ds = spec.sigma(x) - spec.sigma(y)
    lhs = np.sqrt(np.sum(ds * ds, axis=(1, 2)))
    dist = np.sqrt(diff2)
    ell_hat = float(np.max(lhs / dist)) if dist.size else 0.0
    cgap = lhs - spec.ell * dist
    i = _worst(cgap, -lhs / dist)
    witnesses["C"] = (x[i], y[i]) if cgap.size else ()
    violations["C"] = float(cgap[i]) if cgap.size else 0.0
    if spec.constant_sigma:
        verdicts["C"] = "pass"
    else:
        verdicts["C"] = "fail" if violations["C"] > VIOLATION_TOL else "inconclusive"

    # (D) ellipticity
    pts = np.concatenate([x, y, np.zeros((1, d))])
    egap = ellipticity_gap(spec, pts)
    kappa_hat = float(spec.kappa - egap.max())
    i = int(np.argmax(egap))
    witnesses["D"] = (pts[i],)
    violations["D"] = float(egap[i])
    if spec.constant_sigma:
        verdicts["D"] = "fail" if violations["D"] > VIOLATION_TOL else "pass"
    else:
        verdicts["D"] = "fail" if violations["D"] > VIOLATION_TOL else "inconclusive"

    # (B) exponential growth of F, and the same bound applied to D^2 F
    r2 = np.sum(pts * pts, axis=1)
    weight = np.exp(-spec.c1 * r2)
    fn = np.linalg.norm(spec.F(pts), axis=1)
    c0_hat = float(np.max(fn * weight))
    bgap = growth_gap(spec, pts)
    i = int(np.argmax(bgap))
    witnesses["B"] = (pts[i],)
    violations["B"] = float(bgap[i])
    hn = spec.d2f_norm(pts)
    c0_h_hat = float(np.max(hn * weight))
    hgap = growth_gap(spec, pts, hessian=True)
    j = int(np.argmax(hgap))
    witnesses["B_hessian"] = (pts[j],)
    violations["B_hessian"] = float(hgap[j])
    if spec.linear_drift is not None:
        need = float(np.linalg.norm(spec.linear_drift, 2)) / math.sqrt(2.0 * math.e * spec.c1)
        verdicts["B"] = "pass" if need <= spec.c0 * (1 + 1e-12) and violations["B"] <= VIOLATION_TOL else "fail"
        verdicts["B_hessian"] = "pass"
    else:
        verdicts["B"] = "fail" if violations["B"] > VIOLATION_TOL else "inconclusive"
        verdicts["B_hessian"] = "fail" if violations["B_hessian"] > VIOLATION_TOL else "inconclusive"

    return HypothesisAudit(verdicts, witnesses, delta_hat, ell_hat, kappa_hat, c0_hat, c0_h_hat,
                           n_samples, float(radius), violations)
