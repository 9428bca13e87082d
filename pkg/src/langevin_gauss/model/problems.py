"""Langevin problem definitions.

A :class:`ProblemSpec` bundles the drift ``F`` and diffusion ``sigma`` of

    dX = -F(X) dt + sqrt(eps) sigma(X) dB

with the declared constants of the standing hypotheses (dissipativity
``delta``, growth ``c0, c1``, Lipschitz ``ell``, ellipticity ``kappa``) and the
linearisation data ``DF(0)`` and ``sigma(0)``.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..linalg import min_sym_eig
from .expr import ExprError, FieldExpr, parse_field_expr

FD_STEP = np.finfo(float).eps ** (1.0 / 3.0)
BUILTINS = ("linear1d", "linear_nd", "quartic1d", "gradient_gibbs", "rotational2d")
CONSTANT_KEYS = ("delta", "ell", "c0", "c1", "kappa")
DEFAULT_C1_LINEAR = 0.1
QUARTIC_C0 = 5.15
QUARTIC_C1 = 0.25


class ConfigError(ValueError):
    """Malformed problem or run configuration; ``key`` names the culprit."""

    def __init__(self, msg, key=None):
        super().__init__(msg if key is None else f"{key}: {msg}")
        self.key = key


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    name: str
    d: int
    F: Callable
    sigma: Callable
    delta: float
    ell: float
    c0: float
    c1: float
    kappa: float
    jacobian_at_zero: np.ndarray
    sigma_at_zero: np.ndarray
    linear_drift: Optional[np.ndarray] = None
    constant_sigma: bool = False
    potential: Optional[Callable] = None
    hessian_norm: Optional[Callable] = None
    unaudited: bool = False
    document: dict = field(default_factory=dict)

    @property
    def diffusion_at_zero(self):
        """``sigma(0) sigma(0)^T``."""
        s = self.sigma_at_zero
        return s @ s.T

    def drift(self, x):
        return self.F(np.atleast_2d(x))

    def eval_F(self, x):
        """``F`` at a single point."""
        return self.F(np.asarray(x, dtype=float).reshape(1, self.d))[0]

    def eval_sigma(self, x):
        return self.sigma(np.asarray(x, dtype=float).reshape(1, self.d))[0]

    def d2f_norm(self, x):
        """Frobenius norm of the second derivative tensor of ``F`` at rows of ``x``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.hessian_norm is not None:
            return self.hessian_norm(x)
        return fd_second_derivative_norm(self.F, x)

    def validate(self):
        """Check the structural invariants; raises :class:`ConfigError`."""
        f0 = self.eval_F(np.zeros(self.d))
        if np.max(np.abs(f0)) > 1e-12:
            raise ConfigError(f"F(0) = {f0.tolist()} is not the zero vector", "field")
        if np.any(~np.isfinite(self.jacobian_at_zero)):
            raise ConfigError("DF(0) has non-finite entries", "field")
        lam = min_sym_eig(self.jacobian_at_zero)
        if lam < self.delta - 1e-8:
            raise ConfigError(
                f"delta={self.delta} exceeds the smallest eigenvalue {lam:.6g} of the symmetric part of DF(0)",
                "delta")
        for k in CONSTANT_KEYS:
            v = getattr(self, k)
            if not math.isfinite(v) or v < 0 or (k != "ell" and v == 0):
                raise ConfigError(f"must be a {'nonnegative' if k == 'ell' else 'positive'} finite number, got {v}", k)
        return self


# ---------------------------------------------------------------------------
# finite differences

def fd_jacobian(F, x, d):
    x = np.asarray(x, dtype=float).reshape(d)
    h = FD_STEP * max(1.0, float(np.linalg.norm(x)))
    pts = np.concatenate([x + h * np.eye(d), x - h * np.eye(d)])
    vals = F(pts)
    return ((vals[:d] - vals[d:]) / (2.0 * h)).T


def fd_second_derivative_norm(F, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = x.shape
    h = np.finfo(float).eps ** 0.25 * np.maximum(1.0, np.linalg.norm(x, axis=1))
    hh = h[:, None]
    total = np.zeros(n)
    f0 = F(x)
    eye = np.eye(d)
    for j in range(d):
        ej = eye[j] * hh
        dj = (F(x + ej) - 2.0 * f0 + F(x - ej)) / (hh * hh)
        total += np.sum(dj * dj, axis=1)
        for k in range(j + 1, d):
            ek = eye[k] * hh
            djk = (F(x + ej + ek) - F(x + ej - ek) - F(x - ej + ek) + F(x - ej - ek)) / (4.0 * hh * hh)
            total += 2.0 * np.sum(djk * djk, axis=1)
    return np.sqrt(total)


# ---------------------------------------------------------------------------
# field constructors

def _linear_field(A):
    A = np.array(A, dtype=float)
    At = A.T.copy()

    def F(x):
        x = np.atleast_2d(x)
        out = np.zeros_like(x)
        # fixed summation order keeps results independent of batch size
        for j in range(A.shape[0]):
            out += x[:, j:j + 1] * At[j][None, :]
        return out

    return F


def _constant_sigma(S):
    S = np.array(S, dtype=float)

    def sigma(x):
        return np.broadcast_to(S, (np.atleast_2d(x).shape[0],) + S.shape)

    return sigma


def _linear_growth_c0(A, c1):
    # sup_r r e^{-c1 r^2} = 1 / sqrt(2 e c1)
    return float(np.linalg.norm(A, 2)) / math.sqrt(2.0 * math.e * c1)


def _as_matrix(value, d, key):
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError("must be a numeric matrix", key) from exc
    if M.ndim == 0:
        M = M * np.eye(d)
    if M.shape != (d, d) or not np.all(np.isfinite(M)):
        raise ConfigError(f"must be a finite {d}x{d} matrix, got shape {M.shape}", key)
    return M


def _param(params, key, default=None, required=False):
    if key in params:
        v = params[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError("must be a number", f"params.{key}")
        return float(v)
    if required:
        raise ConfigError("is required", f"params.{key}")
    return default


def _check_params(params, allowed, name):
    for k in params:
        if k not in allowed:
            raise ConfigError(f"unknown parameter for builtin {name!r}", f"params.{k}")


def _linear_spec(name, A, S, params, document):
    d = A.shape[0]
    lam = min_sym_eig(A)
    delta = _param(params, "delta", lam)
    if delta <= 0:
        raise ConfigError("must be positive", "params.delta")
    if lam < delta - 1e-12:
        raise ConfigError(f"drift violates dissipativity: min eigenvalue of sym(A) is {lam:.6g} < delta={delta}",
                          "params.delta")
    c1 = _param(params, "c1", DEFAULT_C1_LINEAR)
    if c1 <= 0:
        raise ConfigError("must be positive", "params.c1")
    c0 = _param(params, "c0", max(_linear_growth_c0(A, c1), 1e-300))
    kappa = float(np.linalg.eigvalsh(S @ S.T)[0])
    return ProblemSpec(
        name=name, d=d, F=_linear_field(A), sigma=_constant_sigma(S),
        delta=delta, ell=0.0, c0=c0, c1=c1, kappa=kappa,
        jacobian_at_zero=A.copy(), sigma_at_zero=S.copy(),
        linear_drift=A.copy(), constant_sigma=True,
        hessian_norm=lambda x: np.zeros(np.atleast_2d(x).shape[0]),
        document=document)


def _poly_terms(params):
    terms = params.get("terms")
    if not isinstance(terms, list) or not terms:
        raise ConfigError("must be a non-empty list of [coefficient, [exponents...]]", "params.terms")
    out = []
    d = None
    for i, t in enumerate(terms):
        try:
            coef, exps = t
            coef = float(coef)
            exps = tuple(int(e) for e in exps)
        except (TypeError, ValueError) as exc:
            raise ConfigError("malformed term", f"params.terms[{i}]") from exc
        if any(e < 0 for e in exps):
            raise ConfigError("negative exponent", f"params.terms[{i}]")
        if d is None:
            d = len(exps)
        elif len(exps) != d:
            raise ConfigError("inconsistent number of exponents", f"params.terms[{i}]")
        out.append((coef, exps))
    return out, d


def _poly_potential(terms, d):
    def V(x):
        x = np.atleast_2d(x)
        v = np.zeros(x.shape[0])
        for coef, exps in terms:
            m = np.full(x.shape[0], coef)
            for j, e in enumerate(exps):
                if e:
                    m = m * x[:, j] ** e
            v = v + m
        return v

    def grad(x):
        x = np.atleast_2d(x)
        g = np.zeros_like(x)
        for coef, exps in terms:
            for k, ek in enumerate(exps):
                if ek == 0:
                    continue
                m = np.full(x.shape[0], coef * ek)
                for j, e in enumerate(exps):
                    p = e - 1 if j == k else e
                    if p:
                        m = m * x[:, j] ** p
                g[:, k] += m
        return g

    H0 = np.zeros((d, d))
    for coef, exps in terms:
        if sum(exps) != 2:
            continue
        idx = [j for j, e in enumerate(exps) for _ in range(e)]
        a, b = idx
        if a == b:
            H0[a, a] += 2.0 * coef
        else:
            H0[a, b] += coef
            H0[b, a] += coef
    return V, grad, H0


def builtin_problem(name, params=None):
    """Instantiate one of the built-in problems.

    ``linear1d``: ``F(x) = a x``, ``sigma = s``.
    ``linear_nd``: ``F(x) = A x``, ``sigma = S`` (default identity).
    ``quartic1d``: ``F(x) = x + x^3``, gradient of ``x^2/2 + x^4/4``, ``sigma = s``.
    ``gradient_gibbs``: ``F = grad V`` for a polynomial ``V`` given as ``terms``,
    ``sigma = I``; ``delta``, ``c0``, ``c1`` must be declared.
    ``rotational2d``: ``F(x) = A x`` with ``A = [[delta, omega], [-omega, delta]]``.
    """
    params = dict(params or {})
    document = {"builtin": name, "params": copy.deepcopy(params)}
    if name == "linear1d":
        _check_params(params, {"a", "s", "delta", "c0", "c1"}, name)
        a = _param(params, "a", 1.0)
        s = _param(params, "s", 1.0)
        if s == 0:
            raise ConfigError("diffusion must be non-degenerate", "params.s")
        if "delta" in params and a < params["delta"]:
            raise ConfigError(f"a={a} violates dissipativity with delta={params['delta']}", "params.a")
        if a <= 0:
            raise ConfigError("must be positive", "params.a")
        spec = _linear_spec(name, np.array([[a]]), np.array([[s]]), params, document)
    elif name == "linear_nd":
        _check_params(params, {"A", "S", "delta", "c0", "c1"}, name)
        if "A" not in params:
            raise ConfigError("is required", "params.A")
        A = np.array(params["A"], dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ConfigError("must be a square matrix", "params.A")
        d = A.shape[0]
        S = _as_matrix(params.get("S", np.eye(d)), d, "params.S")
        spec = _linear_spec(name, A, S, params, document)
    elif name == "rotational2d":
        _check_params(params, {"delta", "omega", "s", "c0", "c1"}, name)
        delta = _param(params, "delta", 1.0)
        omega = _param(params, "omega", 1.0)
        s = _param(params, "s", 1.0)
        if delta <= 0:
            raise ConfigError("must be positive", "params.delta")
        A = np.array([[delta, omega], [-omega, delta]])
        spec = _linear_spec(name, A, s * np.eye(2), params, document)
    elif name == "quartic1d":
        _check_params(params, {"s", "delta", "c0", "c1"}, name)
        s = _param(params, "s", 1.0)
        delta = _param(params, "delta", 1.0)
        if not 0 < delta <= 1.0:
            raise ConfigError("quartic1d is dissipative with delta at most 1", "params.delta")
        c0 = _param(params, "c0", QUARTIC_C0)
        c1 = _param(params, "c1", QUARTIC_C1)

        def F(x):
            x = np.atleast_2d(x)
            return x + x * x * x

        spec = ProblemSpec(
            name=name, d=1, F=F, sigma=_constant_sigma([[s]]),
            delta=delta, ell=0.0, c0=c0, c1=c1, kappa=s * s,
            jacobian_at_zero=np.array([[1.0]]), sigma_at_zero=np.array([[s]]),
            constant_sigma=True,
            potential=lambda x: 0.5 * np.asarray(x) ** 2 + 0.25 * np.asarray(x) ** 4,
            hessian_norm=lambda x: 6.0 * np.abs(np.atleast_2d(x)[:, 0]),
            document=document)
    elif name == "gradient_gibbs":
        _check_params(params, {"terms", "delta", "c0", "c1"}, name)
        terms, d = _poly_terms(params)
        V, grad, H0 = _poly_potential(terms, d)
        delta = _param(params, "delta", required=True)
        c0 = _param(params, "c0", required=True)
        c1 = _param(params, "c1", required=True)
        pot = None
        if d == 1:
            def pot(x):
                return V(np.asarray(x, dtype=float).reshape(-1, 1))
        spec = ProblemSpec(
            name=name, d=d, F=grad, sigma=_constant_sigma(np.eye(d)),
            delta=delta, ell=0.0, c0=c0, c1=c1, kappa=1.0,
            jacobian_at_zero=H0, sigma_at_zero=np.eye(d),
            constant_sigma=True, potential=pot, unaudited=True,
            document=document)
    else:
        raise ConfigError(f"unknown builtin problem {name!r}; choose from {', '.join(BUILTINS)}", "field.builtin")
    return spec.validate()


# ---------------------------------------------------------------------------
# JSON documents

def _expr_sigma(fe, d):
    def sigma(x):
        x = np.atleast_2d(x)
        return fe(x).reshape(x.shape[0], d, d)

    return sigma


def _check_keys(doc, allowed, where):
    if not isinstance(doc, dict):
        raise ConfigError("must be a JSON object", where)
    for k in doc:
        if k not in allowed:
            raise ConfigError("unknown key", f"{where}.{k}" if where else k)


def problem_from_dict(doc):
    """Build a :class:`ProblemSpec` from the problem JSON document.

    ``{"d": .., "field": {"builtin": .., "params": {..}} | {"expr": ".."},
    "sigma": {"constant": M} | {"scalar": s} | {"expr": ".."},
    "constants": {"delta", "ell", "c0", "c1", "kappa"}}``
    """
    _check_keys(doc, {"d", "field", "sigma", "constants"}, "")
    if "field" not in doc:
        raise ConfigError("is required", "field")
    fdoc = doc["field"]
    _check_keys(fdoc, {"builtin", "params", "expr"}, "field")
    constants = doc.get("constants", {})
    _check_keys(constants, set(CONSTANT_KEYS), "constants")
    for k, v in constants.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError("must be a number", f"constants.{k}")
    d = doc.get("d")
    if d is not None and (isinstance(d, bool) or not isinstance(d, int) or d < 1):
        raise ConfigError("must be a positive integer", "d")

    if "builtin" in fdoc:
        if "expr" in fdoc:
            raise ConfigError("give either builtin or expr, not both", "field")
        params = fdoc.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("must be a JSON object", "field.params")
        merged = dict(params)
        for k in ("delta", "c0", "c1"):
            if k in constants:
                merged[k] = constants[k]
        try:
            spec = builtin_problem(fdoc["builtin"], merged)
        except ConfigError as exc:
            # report values that came from "constants" under that key
            name = (exc.key or "").partition("params.")[2]
            if name in constants:
                raise ConfigError(str(exc).partition(": ")[2], f"constants.{name}") from exc
            raise
        if d is not None and d != spec.d:
            raise ConfigError(f"builtin {fdoc['builtin']!r} has dimension {spec.d}, not {d}", "d")
        if "sigma" in doc:
            spec = _with_sigma(spec, doc["sigma"], constants)
        else:
            for k in ("ell", "kappa"):
                if k in constants:
                    spec = _replace(spec, **{k: float(constants[k])})
    elif "expr" in fdoc:
        if "params" in fdoc:
            raise ConfigError("params only apply to builtin fields", "field.params")
        if d is None:
            raise ConfigError("is required for expression fields", "d")
        if not isinstance(fdoc["expr"], str):
            raise ConfigError("must be a string", "field.expr")
        try:
            fe = parse_field_expr(fdoc["expr"], d)
        except ExprError as exc:
            raise ConfigError(str(exc), "field.expr") from exc
        if "sigma" not in doc:
            raise ConfigError("is required for expression fields", "sigma")
        missing = [k for k in CONSTANT_KEYS if k not in constants]
        if missing:
            raise ConfigError(f"expression problems must declare {', '.join(missing)}", "constants")
        spec = ProblemSpec(
            name="expr", d=d, F=fe, sigma=_constant_sigma(np.eye(d)),
            delta=float(constants["delta"]), ell=float(constants["ell"]),
            c0=float(constants["c0"]), c1=float(constants["c1"]), kappa=float(constants["kappa"]),
            jacobian_at_zero=fd_jacobian(fe, np.zeros(d), d), sigma_at_zero=np.eye(d),
            unaudited=True, document={"expr": fdoc["expr"]})
        spec = _with_sigma(spec, doc["sigma"], constants)
    else:
        raise ConfigError("needs a builtin or expr entry", "field")
    doc_out = copy.deepcopy(doc)
    doc_out["d"] = spec.d
    return _replace(spec, document=doc_out).validate()


def _replace(spec, **changes):
    from dataclasses import replace
    return replace(spec, **changes)


def _with_sigma(spec, sdoc, constants):
    _check_keys(sdoc, {"constant", "scalar", "expr"}, "sigma")
    if len(sdoc) != 1:
        raise ConfigError("give exactly one of constant, scalar, expr", "sigma")
    d = spec.d
    if "expr" in sdoc:
        if not isinstance(sdoc["expr"], str):
            raise ConfigError("must be a string", "sigma.expr")
        try:
            fe = parse_field_expr(sdoc["expr"], d, n_components=d * d)
        except ExprError as exc:
            raise ConfigError(str(exc), "sigma.expr") from exc
        sig = _expr_sigma(fe, d)
        for k in ("ell", "kappa"):
            if k not in constants:
                raise ConfigError("must be declared for expression diffusions", f"constants.{k}")
        s0 = sig(np.zeros((1, d)))[0]
        return _replace(spec, sigma=sig, sigma_at_zero=np.array(s0), constant_sigma=False,
                        ell=float(constants["ell"]), kappa=float(constants["kappa"]), unaudited=True)
    if "scalar" in sdoc:
        v = sdoc["scalar"]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError("must be a number", "sigma.scalar")
        S = float(v) * np.eye(d)
    else:
        S = _as_matrix(sdoc["constant"], d, "sigma.constant")
    kappa = float(constants.get("kappa", np.linalg.eigvalsh(S @ S.T)[0]))
    ell = float(constants.get("ell", 0.0))
    return _replace(spec, sigma=_constant_sigma(S), sigma_at_zero=S.copy(), constant_sigma=True,
                    kappa=kappa, ell=ell)


def load_problem(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}", "problem") from exc
    return problem_from_dict(doc)
