import csv
import io
import json
import math

import numpy as np
import pytest

from langevin_gauss.experiments import runners
from langevin_gauss.experiments.config import RunConfig, config_from_dict
from langevin_gauss.experiments.report import ExperimentReport, Row, fmt, jsonable, loglog_slope
from langevin_gauss.model import ConfigError, builtin_problem

LIN = builtin_problem("linear1d", {"a": 1, "s": 1})
QUART = builtin_problem("quartic1d", {})
ROT = builtin_problem("rotational2d", {"delta": 1, "omega": 2})

SMALL = RunConfig(dt=0.01, n_paths=400, burn_in=8.0, n_bootstrap=20)


def recompute(row):
    o, b, t = row["observed"], row["bound"], row["tolerance"]
    o, b, t = (float(v) for v in (o, b, t))
    return {"le": o <= b + t, "lt": o < b + t, "ge": o >= b - t}[row["relation"]]


# -- report -------------------------------------------------------------------

def test_row_relations():
    assert Row("a", {}, 1.0, 1.0).passed
    assert not Row("a", {}, 1.0, 1.0, relation="lt").passed
    assert Row("a", {}, 1.0, 1.0, relation="lt", tolerance=1e-9).passed
    assert Row("a", {}, 0.5, 1.0, tolerance=0.5, relation="ge").passed
    assert not Row("a", {}, math.nan, 1.0).passed
    with pytest.raises(ValueError):
        Row("a", {}, 0.0, 0.0, relation="eq")


def test_csv_layout_and_recomputable_verdicts():
    rep = ExperimentReport("demo", "p")
    rep.add("x", {"eps": 0.1}, 0.3, 0.2, 0.01, 0.05)
    rep.add("x", {"eps": 0.05, "t": 1.0}, 1 / 3, 0.2)
    rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert list(rows[0]) == ["check", "eps", "t", "observed", "bound", "se", "tolerance", "relation", "verdict"]
    assert rows[1]["observed"] == "0.33333333333333331"
    assert rows[0]["t"] == ""
    for r in rows:
        assert (r["verdict"] == "pass") == recompute(r)
    assert [r["verdict"] for r in rows] == ["fail", "fail"]


def test_fmt_and_jsonable():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(True) == "true" and fmt(3) == "3" and fmt(None) == ""
    assert jsonable({"a": np.array([1.0, np.inf]), 2: math.nan}) == {"a": [1.0, "inf"], "2": "nan"}


def test_loglog_slope_exact():
    x = np.array([0.4, 0.2, 0.1])
    assert loglog_slope(x, 3 * x ** 0.5) == pytest.approx(0.5, abs=1e-12)
    assert math.isnan(loglog_slope([1.0], [1.0]))


# -- config -------------------------------------------------------------------

def test_config_round_trip():
    cfg = config_from_dict({"eps_grid": [0.2, 0.1], "dt": 0.001, "pairs": [[[1.0], [-1.0]]], "seed": 7})
    again = config_from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg


@pytest.mark.parametrize("doc, key", [
    ({"epsgrid": [0.1]}, "epsgrid"),
    ({"eps_grid": [0.0]}, "eps_grid[0]"),
    ({"eps_grid": [1.5]}, "eps_grid[0]"),
    ({"n_paths": 1.5}, "n_paths"),
    ({"beta": 0.5}, "beta"),
    ({"p": 3}, "p"),
    ({"record_times": [1.0, 0.5]}, "record_times"),
    ({"gibbs_points": 100}, "gibbs_points"),
    ({"pairs": [[[1.0]]]}, "pairs[0]"),
    ({"lambdas": [1.0]}, "lambdas"),
])
def test_config_errors_name_key(doc, key):
    with pytest.raises(ConfigError) as info:
        config_from_dict(doc)
    assert info.value.key == key


# -- runners ------------------------------------------------------------------

def test_covariance_decay_scalar():
    rep = runners.run_covariance_decay(LIN)
    assert rep.passed
    assert rep.extras["slope"] == pytest.approx(-2.0, abs=1e-6)
    # ||Sigma_t - Sigma|| = 0.5 exp(-2t) exactly
    np.testing.assert_allclose(rep.flow.distances()[1:], 0.5 * np.exp(-2 * rep.flow.times[1:]), rtol=1e-8)
    assert rep.extras["observed_prefactor"] == pytest.approx(0.5, rel=1e-8)


def test_covariance_decay_rotational():
    rep = runners.run_covariance_decay(ROT)
    assert rep.passed
    assert abs(rep.extras["slope"] + 2.0) <= 0.05
    assert {r.check for r in rep.rows} == {"rate_upper", "rate_lower", "rk4_vs_closed_form", "stationary_limit"}


def test_scaling_law_linear_noise_floor():
    rep = runners.run_scaling_law(LIN, [0.4, 0.1], SMALL, seed=3)
    floor = rep.rows_for("linear_noise_floor")
    assert len(floor) == 2 and all(r.passed for r in floor)
    assert all(r.passed for r in rep.rows_for("w2_le_K_sqrt_eps"))
    # with shared noise the rescaled linear clouds coincide across epsilon
    v = rep.extras["values"]
    assert v[0] == pytest.approx(v[1], rel=1e-6)


def test_pwasserstein_p2_matches_scaling_law():
    cfg = SMALL.replace(eps=0.2, p_list=(1.0, 2.0))
    sl = runners.run_scaling_law(QUART, [0.2], cfg, seed=5)
    pw = runners.run_p_wasserstein(QUART, config=cfg, seed=5)
    w2 = [r for r in pw.rows_for("wp_le_w2") if r.params["p"] == 2.0][0]
    assert w2.observed == sl.rows_for("w2_le_K_sqrt_eps")[0].observed
    w1 = [r for r in pw.rows_for("wp_le_w2") if r.params["p"] == 1.0][0]
    assert w1.passed


def test_coupling_linear_exact():
    rep = runners.run_coupling_contraction(LIN, config=RunConfig(eps=0.3))
    rows = rep.rows_for("ou_contraction")
    for r in rows:
        assert r.observed == pytest.approx(4 * math.exp(-2 * r.params["t"]), rel=1e-12)
    assert rep.extras["slopes"][0] == pytest.approx(-2.0, abs=1e-6)
    assert rep.passed


def test_coupling_identical_pair():
    cfg = RunConfig(eps=0.1, dt=0.01, n_paths=50, record_times=(0.5, 1.0))
    rep = runners.run_coupling_contraction(QUART, pairs=[((0.2,), (0.2,))], config=cfg)
    assert all(r.observed == 0.0 for r in rep.rows_for("mean_square_contraction"))
    assert rep.passed


def test_second_moment_time_zero_and_linear():
    cfg = RunConfig(eps_grid=(0.1,), dt=0.01, n_paths=2000, x0=(2.0,), record_times=(0.0, 0.5), burn_in=10.0)
    rep = runners.run_second_moment(LIN, config=cfg, seed=4)
    t0 = [r for r in rep.rows_for("transient") if r.params["t"] == 0.0][0]
    assert t0.observed == 4.0 and t0.bound == pytest.approx(4.1)
    st = rep.rows_for("stationary")[0]
    # Euler stationary variance eps / (2 - dt) with dt = 0.01
    assert abs(st.observed - 0.1 / 1.99) <= 3 * st.se
    assert rep.passed


def test_ou_moment_suite_small():
    cfg = RunConfig(n_paths=20000, t_list=(0.0, 1.0))
    rep = runners.run_ou_moment_suite(LIN, config=cfg, seed=2)
    zero = [r for r in rep.rows_for("moment_bound") if r.params["t"] == 0.0]
    assert all(r.observed == 0.0 for r in zero)
    exact = [r for r in rep.rows_for("moment_exact") if r.params["t"] == 1.0]
    var = (1 - math.exp(-2)) / 2
    assert exact[1].info["exact"] == pytest.approx(3 * var ** 2)
    assert rep.passed


def test_concentration_linear_p1():
    cfg = RunConfig(eps_grid=(0.4, 0.1), dt=0.01, n_paths=2000, burn_in=10.0, p=1.0, beta=0.4)
    rep = runners.run_concentration(LIN, config=cfg, seed=6)
    for r in rep.rows_for("ratio"):
        eps = r.params["eps"]
        w = r.info["wp_to_point_mass"]
        # Euler stationary law N(0, eps / (2 - dt)); E|X| = sd sqrt(2/pi)
        exact = math.sqrt(eps / 1.99) * math.sqrt(2 / math.pi)
        assert abs(w - exact) <= 3 * r.se * eps ** 0.4
    assert rep.rows_for("strictly_decreasing")[0].passed


def test_concentration_rejects_large_beta():
    with pytest.raises(ConfigError):
        runners.run_concentration(LIN, beta=0.5)


def test_gibbs_oracle_runner():
    rep = runners.run_gibbs_oracle(QUART, [0.4, 0.1], RunConfig(gibbs_points=4001))
    assert rep.passed
    with pytest.raises(ConfigError):
        runners.run_gibbs_oracle(ROT)


def test_linearization_gap_linear_runner():
    cfg = RunConfig(eps_grid=(0.2, 0.1), dt=0.01, n_paths=100, record_times=(0.5, 1.0))
    rep = runners.run_linearization_gap(ROT, config=cfg, seed=1)
    assert rep.passed
    assert all(r.bound == pytest.approx(0.05) for r in rep.rows)


def test_burn_in_floor():
    cfg = RunConfig(dt=1e-3)
    T = runners.burn_in_time(QUART, 0.4, cfg, 1e-3)
    assert T >= 10.0
    assert runners.burn_in_time(QUART, 0.4, cfg.replace(burn_in=2.5), 1e-3) == pytest.approx(2.5)


def test_runner_is_reproducible():
    cfg = RunConfig(eps_grid=(0.2,), dt=0.01, n_paths=300, burn_in=5.0)
    a = runners.run_scaling_law(QUART, config=cfg, seed=9).to_csv()
    b = runners.run_scaling_law(QUART, config=cfg, seed=9, threads=4).to_csv()
    assert a == b


def test_audit_runner():
    rep = runners.run_audit(LIN, RunConfig(audit_samples=500), seed=1)
    assert rep.passed
    assert {r.check for r in rep.rows} >= {"hypothesis_A", "hypothesis_B", "hypothesis_C", "hypothesis_D"}
