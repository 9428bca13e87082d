from ..constants import ConstantsReport, constants, eps_star
from .config import RunConfig, config_from_dict, load_config
from .report import ExperimentReport, Row, loglog_slope
from .runners import (burn_in_time, run_audit, run_concentration, run_coupling_contraction,
                      run_covariance_decay, run_gibbs_oracle, run_linearization_gap,
                      run_ou_moment_suite, run_p_wasserstein, run_scaling_law, run_second_moment,
                      stationary_cloud)

__all__ = [
    "ConstantsReport", "ExperimentReport", "Row", "RunConfig", "burn_in_time", "config_from_dict",
    "constants", "eps_star", "load_config", "loglog_slope", "run_audit", "run_concentration",
    "run_coupling_contraction", "run_covariance_decay", "run_gibbs_oracle", "run_linearization_gap",
    "run_ou_moment_suite", "run_p_wasserstein", "run_scaling_law", "run_second_moment",
    "stationary_cloud",
]
