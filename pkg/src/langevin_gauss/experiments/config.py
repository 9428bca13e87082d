"""Run configuration parsed strictly from JSON."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Optional

from ..model.problems import ConfigError


@dataclass(frozen=True)
class RunConfig:
    """Knobs shared by the experiment runners.

    ``None`` entries are resolved per problem (``dt`` from the default step
    rule, ``burn_in`` from ``max(t_eps, 10 / delta)``, pairs and starting
    points from the dimension).
    """
    seed: Optional[int] = None
    eps_grid: tuple = (0.4, 0.2, 0.1, 0.05)
    eps: float = 0.1
    dt: Optional[float] = None
    dt_list: Optional[tuple] = None
    n_paths: int = 2000
    burn_in: Optional[float] = None
    record_times: tuple = (0.5, 1.0, 2.0, 3.0)
    x0: Optional[tuple] = None
    pairs: Optional[tuple] = None
    p: float = 2.0
    p_list: tuple = (1.0, 1.5, 2.0)
    beta: float = 0.4
    t_list: tuple = (1.0, 5.0)
    lambdas: tuple = (0.25, 0.5, 0.75)
    moment_orders: tuple = (1, 2, 3, 4)
    n_bootstrap: int = 20
    null_tolerance: float = 0.02
    gibbs_tolerance: float = 0.02
    min_slope: float = 0.45
    gap_slope_range: tuple = (0.9, 1.5)
    t_grid: Optional[tuple] = None
    gibbs_points: int = 20001
    audit_samples: int = 20000
    audit_radius: float = 2.0

    def to_dict(self):
        return {k: _plain(v) for k, v in asdict(self).items()}

    def replace(self, **changes):
        from dataclasses import replace
        return replace(self, **changes)


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def _num(key, v, lo=None, hi=None, lo_open=False, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError("must be a number", key)
    if integer and (not isinstance(v, int)):
        raise ConfigError("must be an integer", key)
    if not math.isfinite(v):
        raise ConfigError("must be finite", key)
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise ConfigError(f"must be {'>' if lo_open else '>='} {lo}", key)
    if hi is not None and v > hi:
        raise ConfigError(f"must be <= {hi}", key)
    return int(v) if integer else float(v)


def _list(key, v, **kw):
    if not isinstance(v, list) or not v:
        raise ConfigError("must be a non-empty list", key)
    return tuple(_num(f"{key}[{i}]", x, **kw) for i, x in enumerate(v))


def _increasing(key, vals):
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError("must be strictly increasing", key)
    return vals


def _vector_list(key, v):
    if not isinstance(v, list) or not v:
        raise ConfigError("must be a non-empty list", key)
    return tuple(_num(f"{key}[{i}]", x) for i, x in enumerate(v))


def config_from_dict(doc):
    if not isinstance(doc, dict):
        raise ConfigError("run config must be a JSON object", "config")
    known = {f.name for f in fields(RunConfig)}
    for k in doc:
        if k not in known:
            raise ConfigError("unknown key", k)
    out = {}
    for k, v in doc.items():
        if k == "seed":
            if v is not None:
                out[k] = _num(k, v, lo=0, hi=2 ** 64 - 1, integer=True)
        elif k == "eps_grid":
            out[k] = _list(k, v, lo=0.0, hi=1.0, lo_open=True)
            if len(set(out[k])) != len(out[k]):
                raise ConfigError("contains duplicate values", k)
        elif k == "eps":
            out[k] = _num(k, v, lo=0.0, hi=1.0, lo_open=True)
        elif k in ("dt", "burn_in"):
            if v is not None:
                out[k] = _num(k, v, lo=0.0, lo_open=True)
        elif k == "dt_list":
            if v is not None:
                out[k] = _list(k, v, lo=0.0, lo_open=True)
        elif k in ("n_paths", "n_bootstrap"):
            out[k] = _num(k, v, lo=2, integer=True)
        elif k == "audit_samples":
            out[k] = _num(k, v, lo=1, integer=True)
        elif k == "audit_radius":
            out[k] = _num(k, v, lo=0.0, lo_open=True)
        elif k == "gibbs_points":
            out[k] = _num(k, v, lo=3, integer=True)
            if out[k] % 2 == 0:
                raise ConfigError("must be odd", k)
        elif k == "record_times":
            out[k] = _increasing(k, _list(k, v, lo=0.0))
        elif k == "t_grid":
            if v is not None:
                out[k] = _increasing(k, _list(k, v, lo=0.0))
        elif k == "t_list":
            out[k] = _list(k, v, lo=0.0)
        elif k == "x0":
            if v is not None:
                out[k] = _vector_list(k, v)
        elif k == "pairs":
            if v is not None:
                if not isinstance(v, list) or not v:
                    raise ConfigError("must be a non-empty list of [x, x0] pairs", k)
                pairs = []
                for i, pr in enumerate(v):
                    if not isinstance(pr, list) or len(pr) != 2:
                        raise ConfigError("each pair must be [x, x0]", f"{k}[{i}]")
                    pairs.append((_vector_list(f"{k}[{i}][0]", pr[0]), _vector_list(f"{k}[{i}][1]", pr[1])))
                out[k] = tuple(pairs)
        elif k == "p":
            out[k] = _num(k, v, lo=1.0, hi=2.0)
        elif k == "p_list":
            out[k] = _list(k, v, lo=1.0, hi=2.0)
        elif k == "beta":
            out[k] = _num(k, v)
            if out[k] >= 0.5:
                raise ConfigError("must be below 1/2", k)
        elif k == "lambdas":
            out[k] = _list(k, v, lo=0.0)
            if max(out[k]) >= 1.0:
                raise ConfigError("scaled lambdas must lie below 1 (i.e. lambda < 1/C_star)", k)
        elif k == "moment_orders":
            out[k] = tuple(int(x) for x in _list(k, v, lo=1, hi=4, integer=True))
        elif k in ("null_tolerance", "gibbs_tolerance"):
            out[k] = _num(k, v, lo=0.0)
        elif k == "min_slope":
            out[k] = _num(k, v)
        elif k == "gap_slope_range":
            r = _list(k, v)
            if len(r) != 2 or r[0] > r[1]:
                raise ConfigError("must be [low, high] with low <= high", k)
            out[k] = r
    return RunConfig(**out)


def load_config(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}", "config") from exc
    return config_from_dict(doc)
