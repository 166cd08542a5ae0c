"""Security-investment games on the reactive stiffness of power grids.

The package models covert reactive-load attacks against grid voltage
stability as a quantized leader-follower game, and computes defense
strategies by exact traversal, coupled evolutionary search, or robust
planning under budget uncertainty. See the README for the case file schema
and the command line interface.
"""

from .engine import kernel_name
from .errors import (CapacityError, CaseError, StiffnessError,
                     SupportOverflowError)
from .ga import GAParams, run_bpega
from .game import (AttackAction, DefenseAction, GameConfig, Outcome,
                   action_cost, enumerate_actions, enumerate_outcomes,
                   expected_utility, is_feasible, performance_loss,
                   select_best_index)
from .grid import (GridCase, StiffnessModel, assemble_susceptance,
                   build_stiffness, instability_index, load_case)
from .robust import RDReport, rd_mismatch, solve_rd
from .traversal import Equilibrium, best_response, solve_cbse
from .uncertainty import (UncertainModel, UncertainModelSet, generate_models,
                          summary_stats, utility_mismatch)

__version__ = "0.1.0"

__all__ = [
    "AttackAction",
    "CapacityError",
    "CaseError",
    "DefenseAction",
    "Equilibrium",
    "GAParams",
    "GameConfig",
    "GridCase",
    "Outcome",
    "RDReport",
    "StiffnessError",
    "StiffnessModel",
    "SupportOverflowError",
    "UncertainModel",
    "UncertainModelSet",
    "action_cost",
    "assemble_susceptance",
    "best_response",
    "build_stiffness",
    "enumerate_actions",
    "enumerate_outcomes",
    "expected_utility",
    "generate_models",
    "instability_index",
    "is_feasible",
    "kernel_name",
    "load_case",
    "performance_loss",
    "rd_mismatch",
    "run_bpega",
    "select_best_index",
    "solve_cbse",
    "solve_rd",
    "summary_stats",
    "utility_mismatch",
    "__version__",
]
