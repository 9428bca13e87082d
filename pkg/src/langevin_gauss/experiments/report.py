"""Tabular experiment results with recomputable verdicts."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

RELATIONS = ("le", "lt", "ge")


def fmt(v):
    """17-significant-digit text for floats; other values as-is."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def jsonable(v):
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return jsonable(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return v


@dataclass
class Row:
    """One checked cell: ``observed <relation> bound`` up to ``tolerance``."""
    check: str
    params: dict
    observed: float
    bound: float
    se: float = 0.0
    tolerance: float = 0.0
    relation: str = "le"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")

    @property
    def passed(self):
        o, b, t = self.observed, self.bound, self.tolerance
        if not (np.isfinite(o) or o == -math.inf):
            return False
        if self.relation == "le":
            return bool(o <= b + t)
        if self.relation == "lt":
            return bool(o < b + t)
        return bool(o >= b - t)

    @property
    def verdict(self):
        return "pass" if self.passed else "fail"

    def to_dict(self):
        return {"check": self.check, "params": jsonable(self.params), "observed": jsonable(self.observed),
                "bound": jsonable(self.bound), "se": jsonable(self.se), "tolerance": jsonable(self.tolerance),
                "relation": self.relation, "verdict": self.verdict, "info": jsonable(self.info)}


@dataclass
class ExperimentReport:
    name: str
    problem: str
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def add(self, *args, **kwargs):
        row = Row(*args, **kwargs)
        self.rows.append(row)
        return row

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    @property
    def failures(self):
        return [r for r in self.rows if not r.passed]

    def rows_for(self, check):
        return [r for r in self.rows if r.check == check]

    def param_names(self):
        names = []
        for r in self.rows:
            for k in r.params:
                if k not in names:
                    names.append(k)
        return names

    def to_csv(self):
        names = self.param_names()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check"] + names + ["observed", "bound", "se", "tolerance", "relation", "verdict"])
        for r in self.rows:
            w.writerow([r.check] + [fmt(r.params.get(k)) for k in names]
                       + [fmt(r.observed), fmt(r.bound), fmt(r.se), fmt(r.tolerance), r.relation, r.verdict])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    def to_dict(self):
        return {"experiment": self.name, "problem": self.problem, "passed": self.passed,
                "n_rows": len(self.rows), "n_failed": len(self.failures),
                "meta": jsonable(self.meta), "extras": jsonable(self.extras),
                "rows": [r.to_dict() for r in self.rows]}

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=False)
            fh.write("\n")

    def summary_lines(self):
        out = []
        for r in self.rows:
            cell = ", ".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}" for k, v in r.params.items())
            op = {"le": "<=", "lt": "<", "ge": ">="}[r.relation]
            out.append(f"{r.verdict.upper():4s} {r.check} [{cell}] observed={r.observed:.6g} "
                       f"{op} {r.bound:.6g} (tol {r.tolerance:.3g})")
        return out


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.size < 2:
        return math.nan
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def linear_slope(x, y):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.size < 2:
        return math.nan
    return float(np.polyfit(x, y, 1)[0])
