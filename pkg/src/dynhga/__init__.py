"""Hybrid genetic algorithm for dynamic optimization on shifted Rastrigin landscapes."""
from .baselines import BaselineConfig, run_ers, run_hm_m, run_ri_m, run_sga_m
from .errors import (BudgetExhausted, ConfigError, ContractViolation, InvalidInputError,
                     NumericFailure)
from .hga import HgaConfig, Individual, refinement_config, run_hga
from .kernels import BACKEND
from .local_search import LsConfig, LsResult, bfgs_minimize, wolfe_line_search
from .metrics import RunSummary, RunTrace, offline_error, summarize_runs, summarize_trace
from .objective_env import (BoxDomain, DynamicEnvironment, DynamicsKind, DynamicsSpec,
                            rastrigin, transform_y_to_x)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BaselineConfig", "BoxDomain", "BudgetExhausted", "ConfigError",
    "ContractViolation", "DynamicEnvironment", "DynamicsKind", "DynamicsSpec", "HgaConfig",
    "Individual", "InvalidInputError", "LsConfig", "LsResult", "NumericFailure", "RunSummary",
    "RunTrace", "bfgs_minimize", "offline_error", "rastrigin", "refinement_config", "run_ers",
    "run_hga", "run_hm_m", "run_ri_m", "run_sga_m", "summarize_runs", "summarize_trace",
    "transform_y_to_x", "wolfe_line_search",
]
