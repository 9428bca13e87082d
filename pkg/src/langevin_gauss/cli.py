"""Command-line front end.

Exit codes: 0 all verdicts pass, 1 some verdict fails, 2 usage or
configuration error, 3 numerical failure (blow-up, solver breakdown).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .experiments import runners
from .experiments.config import RunConfig, config_from_dict, load_config
from .experiments.report import ExperimentReport, jsonable
from .constants import constants
from .linalg import LinalgError
from .model.expr import EvaluationError
from .model.gibbs import GridError
from .model.problems import ConfigError, load_problem, problem_from_dict
from .sde import (BlowUpError, EpsilonRangeError, SimConfig, default_dt, simulate_ensemble,
                  write_snapshots_csv)

COMMANDS = ("audit", "constants", "sample", "scaling-law", "coupling", "second-moment",
            "linearization-gap", "ou-moments", "covariance-decay", "concentration", "pwasserstein",
            "oracle-gibbs")
PLOT_KIND = {"scaling-law": "loglog", "linearization-gap": "loglog", "concentration": "loglog",
             "pwasserstein": "loglog", "covariance-decay": "decay"}
# (check plotted, parameter on the x axis)
PLOT_SERIES = {"scaling-law": ("w2_le_K_sqrt_eps", "eps"), "linearization-gap": ("sup_gap", "eps"),
               "concentration": ("ratio", "eps"), "pwasserstein": ("wp_le_K_sqrt_eps", "p")}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="langevin-gauss", description="Gaussian approximation of small-noise Langevin dynamics.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--problem", help="problem JSON file")
        s.add_argument("--config", help="run configuration JSON file")
        s.add_argument("--seed", type=_u64, help="64-bit master seed")
        s.add_argument("--out", default=None, help="output directory (default: current directory)")
        s.add_argument("--override-eps-star", action="store_true",
                       help="allow epsilon at or above eps_star (with a warning)")
        s.add_argument("--threads", type=_positive_int, default=None,
                       help="worker cap; results do not depend on it (env LANGEVIN_GAUSS_THREADS)")
        s.add_argument("--manifest", help="rerun from a manifest written by an earlier run")
    return p


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}")
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return v


# ---------------------------------------------------------------------------
# plot scripts

def emit_plot_script(report, kind, csv_name=None):
    """Self-contained gnuplot script for a report.

    ``loglog`` plots the observed column against the cell parameter on log
    axes (with the ``K sqrt(eps)`` bound for scaling-law reports); ``decay``
    plots ``||Sigma_t - Sigma||_F`` on a log-y axis with the fitted slope.
    """
    if not report.rows:
        raise ValueError("cannot plot an empty report")
    if kind not in ("loglog", "decay"):
        raise ValueError(f"unknown plot kind {kind!r}")
    lines = ["# gnuplot script", 'set datafile separator ","', "set key top left", "set grid"]
    if kind == "decay":
        csv_name = csv_name or "covariance_flow.csv"
        slope = report.extras.get("slope", math.nan)
        lines += [
            "set logscale y",
            'set xlabel "t"',
            'set ylabel "||Sigma_t - Sigma||_F"',
            f'set label 1 "fitted slope = {slope:.4f}" at graph 0.55, graph 0.9',
            f'plot "{csv_name}" using 1:2 skip 1 with linespoints title "distance"',
        ]
    else:
        csv_name = csv_name or f"{report.name}.csv"
        check, xname = PLOT_SERIES.get(report.name, (report.rows[0].check, next(iter(report.rows[0].params), "x")))
        lines += [
            "set logscale xy",
            f'set xlabel "{xname}"',
            'set ylabel "observed"',
            f'sel(c) = (strcol(1) eq "{check}") ? c : NaN',
        ]
        names = ["check"] + report.param_names()
        xcol = names.index(xname) + 1 if xname in names else 2
        ycol = len(names) + 1
        plot = f'plot "{csv_name}" using {xcol}:(sel(column({ycol}))) skip 1 with linespoints title "{check}"'
        if report.name == "scaling-law" and "K" in report.extras:
            lines.append(f"K = {report.extras['K']:.17g}")
            plot += ', K*sqrt(x) with lines title "K sqrt(eps)"'
        lines.append(plot)
    lines.append("pause -1")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------

def _load_inputs(args):
    if args.manifest:
        with open(args.manifest) as fh:
            try:
                man = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON: {exc}", "manifest") from exc
        for k in ("command", "problem", "config", "seed"):
            if k not in man:
                raise ConfigError("missing from manifest", k)
        if man["command"] != args.command:
            raise ConfigError(f"manifest was written by {man['command']!r}, not {args.command!r}", "command")
        spec = problem_from_dict(man["problem"])
        cfg = config_from_dict(man["config"])
        seed = int(man["seed"])
        return spec, cfg, seed
    if not args.problem:
        raise ConfigError("--problem is required", "problem")
    spec = load_problem(args.problem)
    cfg = load_config(args.config) if args.config else RunConfig()
    seed = args.seed if args.seed is not None else (cfg.seed if cfg.seed is not None else runners.DEFAULT_SEED)
    return spec, cfg, seed


def _run(command, spec, cfg, seed, threads, override, out):
    kw = dict(config=cfg, seed=seed)
    if command == "audit":
        return runners.run_audit(spec, **kw)
    if command == "constants":
        rep_c = constants(spec)
        report = ExperimentReport("constants", spec.name, meta={"seed": seed})
        report.add("K_equals_2C", {}, abs(rep_c.K - 2.0 * rep_c.C_lemmaC), 0.0, tolerance=1e-12 * rep_c.K)
        report.extras.update(rep_c.to_dict())
        report.extras["t_eps"] = {f"{e:g}": rep_c.t_eps(e) for e in cfg.eps_grid}
        print(json.dumps(jsonable(rep_c.to_dict()), indent=2))
        return report
    if command == "sample":
        dt = cfg.dt if cfg.dt is not None else default_dt(spec)
        times = tuple(cfg.record_times)
        sim = SimConfig(cfg.eps, dt, times[-1], cfg.n_paths, seed, times)
        x0 = None if cfg.x0 is None else np.asarray(cfg.x0, dtype=float)
        snaps = simulate_ensemble(spec, sim, x0=x0, threads=threads, acceptance=True,
                                  override_eps_star=override)
        write_snapshots_csv(os.path.join(out, "snapshots.csv"), snaps)
        report = ExperimentReport("sample", spec.name, meta={"seed": seed, "dt": dt, "n": cfg.n_paths})
        for s in snaps:
            report.add("blown_up", {"t": s.time}, float(s.blown_up), 0.0,
                       info={"mean": s.samples.mean(axis=0), "var": s.samples.var(axis=0, ddof=1)})
        return report
    if command == "scaling-law":
        return runners.run_scaling_law(spec, None, threads=threads, override_eps_star=override, **kw)
    if command == "coupling":
        return runners.run_coupling_contraction(spec, None, threads=threads, **kw)
    if command == "second-moment":
        return runners.run_second_moment(spec, None, threads=threads, override_eps_star=override, **kw)
    if command == "linearization-gap":
        return runners.run_linearization_gap(spec, None, threads=threads, override_eps_star=override, **kw)
    if command == "ou-moments":
        return runners.run_ou_moment_suite(spec, None, **kw)
    if command == "covariance-decay":
        report = runners.run_covariance_decay(spec, None, cfg)
        report.flow.write_csv(os.path.join(out, "covariance_flow.csv"))
        return report
    if command == "concentration":
        return runners.run_concentration(spec, None, None, threads=threads, override_eps_star=override, **kw)
    if command == "pwasserstein":
        return runners.run_p_wasserstein(spec, None, None, threads=threads, override_eps_star=override, **kw)
    if command == "oracle-gibbs":
        return runners.run_gibbs_oracle(spec, None, cfg)
    raise UsageError(f"unknown command {command!r}")


def _write_outputs(out, command, spec, cfg, seed, threads, report, started, elapsed):
    base = command.replace("-", "_")
    report.write_csv(os.path.join(out, f"{base}.csv"))
    report.write_json(os.path.join(out, f"{base}.json"))
    kind = PLOT_KIND.get(command)
    if kind and report.rows:
        csv_name = "covariance_flow.csv" if kind == "decay" else f"{base}.csv"
        with open(os.path.join(out, f"{base}.gp"), "w") as fh:
            fh.write(emit_plot_script(report, kind, csv_name))
    manifest = {
        "command": command,
        "problem": spec.document,
        "config": cfg.to_dict(),
        "seed": seed,
        "out": os.path.abspath(out),
        "tool_version": __version__,
        "threads": threads,
        "wallclock": {"started": started, "seconds": elapsed},
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(jsonable(manifest), fh, indent=2)
        fh.write("\n")


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    threads = args.threads
    if threads is None and os.environ.get("LANGEVIN_GAUSS_THREADS"):
        try:
            threads = _positive_int(os.environ["LANGEVIN_GAUSS_THREADS"])
        except argparse.ArgumentTypeError as exc:
            print(f"error: LANGEVIN_GAUSS_THREADS: {exc}", file=sys.stderr)
            return 2
    out = args.out or "."
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    try:
        spec, cfg, seed = _load_inputs(args)
        os.makedirs(out, exist_ok=True)
        report = _run(args.command, spec, cfg, seed, threads, args.override_eps_star, out)
    except (ConfigError, EpsilonRangeError, GridError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BlowUpError, LinalgError, EvaluationError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    _write_outputs(out, args.command, spec, cfg, seed, threads, report, started, time.perf_counter() - t0)
    for line in report.summary_lines():
        print(line)
    n_fail = len(report.failures)
    print(f"{args.command}: {len(report.rows) - n_fail}/{len(report.rows)} checks passed")
    return 0 if n_fail == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
