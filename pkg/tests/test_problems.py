import dataclasses
import json

import numpy as np
import pytest

from langevin_gauss.model import (BUILTINS, ConfigError, audit_hypotheses, builtin_problem, fd_jacobian,
                                  load_problem, problem_from_dict)
from langevin_gauss.model.audit import dissipativity_gap, growth_gap, lipschitz_gap, ellipticity_gap
from langevin_gauss.linalg import min_sym_eig

GIBBS_PARAMS = {"terms": [[0.5, [2]], [0.25, [4]]], "delta": 1.0, "c0": 5.15, "c1": 0.25}


def all_builtins():
    return [
        builtin_problem("linear1d", {"a": 1.0, "s": 1.0}),
        builtin_problem("linear_nd", {"A": [[2.0, 1.0], [0.0, 3.0]], "S": [[1.0, 0.0], [0.5, 1.0]]}),
        builtin_problem("quartic1d", {}),
        builtin_problem("gradient_gibbs", GIBBS_PARAMS),
        builtin_problem("rotational2d", {"delta": 1.0, "omega": 2.0}),
    ]


def test_linear1d_example():
    spec = builtin_problem("linear1d", {"a": 1, "s": 1})
    np.testing.assert_array_equal(spec.jacobian_at_zero, [[1.0]])
    np.testing.assert_array_equal(spec.sigma_at_zero, [[1.0]])
    assert spec.delta == 1.0 and spec.ell == 0.0


def test_quartic_values():
    spec = builtin_problem("quartic1d", {})
    assert spec.eval_F([1.0])[0] == 2.0
    assert spec.delta == 1.0


def test_rotational_jacobian():
    spec = builtin_problem("rotational2d", {"delta": 1, "omega": 2})
    np.testing.assert_array_equal(spec.jacobian_at_zero, [[1.0, 2.0], [-2.0, 1.0]])
    A = spec.jacobian_at_zero
    np.testing.assert_array_equal((A + A.T) / 2, np.eye(2))


def test_unknown_builtin():
    with pytest.raises(ConfigError):
        builtin_problem("nope", {})


def test_linear1d_rejects_a_below_delta():
    with pytest.raises(ConfigError) as info:
        builtin_problem("linear1d", {"a": 0.5, "delta": 1.0})
    assert "delta" in str(info.value)


@pytest.mark.parametrize("spec", all_builtins(), ids=lambda s: s.name)
def test_builtin_invariants(spec):
    assert np.max(np.abs(spec.eval_F(np.zeros(spec.d)))) <= 1e-12
    fd = fd_jacobian(spec.F, np.zeros(spec.d), spec.d)
    scale = max(1.0, np.abs(spec.jacobian_at_zero).max())
    assert np.abs(fd - spec.jacobian_at_zero).max() <= 1e-6 * scale
    np.testing.assert_array_equal(spec.sigma_at_zero, spec.eval_sigma(np.zeros(spec.d)))
    assert min_sym_eig(spec.jacobian_at_zero) >= spec.delta - 1e-8


def test_gradient_gibbs_matches_quartic():
    g = builtin_problem("gradient_gibbs", GIBBS_PARAMS)
    q = builtin_problem("quartic1d", {})
    x = np.linspace(-2, 2, 9)[:, None]
    np.testing.assert_allclose(g.F(x), q.F(x), rtol=1e-14)
    assert g.unaudited


def test_problem_json_builtin(tmp_path):
    doc = {"d": 1, "field": {"builtin": "linear1d", "params": {"a": 2.0, "s": 0.5}}}
    p = tmp_path / "p.json"
    p.write_text(json.dumps(doc))
    spec = load_problem(p)
    assert spec.d == 1 and spec.jacobian_at_zero[0, 0] == 2.0
    assert spec.sigma_at_zero[0, 0] == 0.5


def test_problem_json_expr():
    doc = {"d": 2, "field": {"expr": "x1 + x1^3 + 0.1*sin(x2); x2 - 0.1*sin(x1)"},
           "sigma": {"scalar": 1.0},
           "constants": {"delta": 0.8, "ell": 0.0, "c0": 10.0, "c1": 0.2, "kappa": 1.0}}
    spec = problem_from_dict(doc)
    np.testing.assert_allclose(spec.jacobian_at_zero, [[1.0, 0.1], [-0.1, 1.0]], atol=1e-9)
    assert spec.unaudited


def test_problem_json_expr_sigma():
    doc = {"d": 1, "field": {"expr": "x1"}, "sigma": {"expr": "1 + 0.1*tanh(x1)"},
           "constants": {"delta": 1.0, "ell": 0.1, "c0": 1.0, "c1": 0.1, "kappa": 0.81}}
    spec = problem_from_dict(doc)
    assert not spec.constant_sigma
    assert spec.eval_sigma([0.0])[0, 0] == 1.0


@pytest.mark.parametrize("doc, key", [
    ({"field": {"builtin": "linear1d"}, "extra": 1}, "extra"),
    ({"field": {"builtin": "linear1d"}, "constants": {"delat": 1}}, "constants.delat"),
    ({"field": {"expr": "x1"}, "sigma": {"scalar": 1}}, "d"),
    ({"d": 1, "field": {"expr": "x1 +"}, "sigma": {"scalar": 1},
      "constants": {"delta": 1, "ell": 0, "c0": 1, "c1": 1, "kappa": 1}}, "field.expr"),
    ({"d": 1, "field": {"expr": "x1 + 1"}, "sigma": {"scalar": 1},
      "constants": {"delta": 1, "ell": 0, "c0": 1, "c1": 1, "kappa": 1}}, "field"),
    ({"d": 2, "field": {"builtin": "linear1d"}}, "d"),
])
def test_problem_json_errors_name_key(doc, key):
    with pytest.raises(ConfigError) as info:
        problem_from_dict(doc)
    assert info.value.key == key


def test_builtin_names_listed():
    assert set(BUILTINS) == {"linear1d", "linear_nd", "quartic1d", "gradient_gibbs", "rotational2d"}


# -- audit --------------------------------------------------------------------

def test_audit_linear_passes():
    spec = builtin_problem("linear1d", {"a": 1, "s": 1})
    audit = audit_hypotheses(spec, 500, 3.0, seed=1)
    assert all(v == "pass" for v in audit.verdicts.values())
    assert audit.delta_hat == pytest.approx(1.0, abs=1e-12)
    assert audit.ell_hat == 0.0


def test_audit_quartic_overstated_delta_fails_near_zero():
    spec = dataclasses.replace(builtin_problem("quartic1d", {}), delta=2.0)
    audit = audit_hypotheses(spec, 4000, 1.0, seed=2)
    assert audit.verdicts["A"] == "fail"
    x, y = audit.witnesses["A"]
    # reproduce the violation
    gap = dissipativity_gap(spec, x[None, :], y[None, :])[0]
    assert gap > 1e-10
    # <F(x)-F(y), x-y>/|x-y|^2 = 1 + x^2 + xy + y^2, smallest near the origin
    ratio = 1 + x[0] ** 2 + x[0] * y[0] + y[0] ** 2
    assert ratio < 1.1


def test_dense_grid_minimum_of_quartic_ratio():
    # independent grid search of the dissipativity ratio over [-1, 1]^2
    g = np.linspace(-1, 1, 401)
    X, Y = np.meshgrid(g, g)
    mask = X != Y
    F = lambda z: z + z ** 3
    ratio = ((F(X) - F(Y)) * (X - Y))[mask] / ((X - Y) ** 2)[mask]
    assert ratio.min() == pytest.approx(1.0, abs=1e-4)
    spec = builtin_problem("quartic1d", {})
    audit = audit_hypotheses(spec, 4000, 1.0, seed=2)
    assert audit.delta_hat >= 1.0 - 1e-9
    assert audit.verdicts["A"] == "inconclusive"


def test_audit_deterministic():
    spec = builtin_problem("quartic1d", {})
    a = audit_hypotheses(spec, 300, 2.0, seed=5)
    b = audit_hypotheses(spec, 300, 2.0, seed=5)
    assert a.to_dict() == b.to_dict()


def test_audit_growth_and_hessian_violations():
    spec = dataclasses.replace(builtin_problem("quartic1d", {}), c0=0.5)
    audit = audit_hypotheses(spec, 2000, 2.0, seed=3)
    assert audit.verdicts["B"] == "fail"
    assert audit.verdicts["B_hessian"] == "fail"
    (w,) = audit.witnesses["B"]
    assert growth_gap(spec, w[None, :])[0] > 1e-10
    (w,) = audit.witnesses["B_hessian"]
    assert growth_gap(spec, w[None, :], hessian=True)[0] > 1e-10


def test_audit_lipschitz_violation():
    doc = {"d": 1, "field": {"expr": "x1"}, "sigma": {"expr": "1 + 0.5*tanh(x1)"},
           "constants": {"delta": 1.0, "ell": 0.1, "c0": 1.0, "c1": 0.1, "kappa": 0.2}}
    spec = problem_from_dict(doc)
    audit = audit_hypotheses(spec, 2000, 1.0, seed=4)
    assert audit.verdicts["C"] == "fail"
    x, y = audit.witnesses["C"]
    assert lipschitz_gap(spec, x[None, :], y[None, :])[0] > 1e-10
    assert audit.ell_hat <= 0.5 + 1e-9


def test_audit_ellipticity_violation():
    spec = dataclasses.replace(builtin_problem("linear1d", {"a": 1, "s": 1}), kappa=2.0)
    audit = audit_hypotheses(spec, 100, 1.0, seed=0)
    assert audit.verdicts["D"] == "fail"
    (w,) = audit.witnesses["D"]
    assert ellipticity_gap(spec, w[None, :])[0] > 1e-10


def test_audit_rejects_bad_arguments():
    spec = builtin_problem("quartic1d", {})
    with pytest.raises(ValueError):
        audit_hypotheses(spec, 0, 1.0, 0)
    with pytest.raises(ValueError):
        audit_hypotheses(spec, 10, 0.0, 0)
