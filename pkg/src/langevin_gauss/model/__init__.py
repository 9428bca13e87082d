from .audit import HypothesisAudit, audit_hypotheses
from .expr import EvaluationError, ExprError, ExprSyntaxError, FieldExpr, parse_field_expr
from .gibbs import GibbsTable, GridError, gibbs_density_oracle
from .problems import (BUILTINS, ConfigError, ProblemSpec, builtin_problem, fd_jacobian,
                       load_problem, problem_from_dict)

__all__ = [
    "BUILTINS", "ConfigError", "EvaluationError", "ExprError", "ExprSyntaxError", "FieldExpr",
    "GibbsTable", "GridError", "HypothesisAudit", "ProblemSpec", "audit_hypotheses",
    "builtin_problem", "fd_jacobian", "gibbs_density_oracle", "load_problem", "parse_field_expr",
    "problem_from_dict",
]
