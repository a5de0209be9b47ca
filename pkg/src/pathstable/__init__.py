"""Deterministic global optimisation of mixed-integer path-stable problems."""
from .barrier import BarrierIterate, kkt_jacobian, kkt_residual, newton_solve
from .bnb import BnbConfig, audit_pruning, branch, enumerate_exhaustive, solve_bnb
from .continuation import ContinuationSchedule, PathTrace, solve_relaxation, solve_zero_problem, trace_path
from .core import (
    ContractViolation,
    DivergedError,
    DomainError,
    InfeasibleError,
    NoSolutionError,
    NodeAssignment,
    ParametricMINLP,
    PathstableError,
    Relaxation,
    SingularPointError,
    SolveReport,
    Status,
    check_integer_feasible,
    relax,
)
from .problems import build_parabola, build_unit_circle

__all__ = [
    "BarrierIterate", "BnbConfig", "ContinuationSchedule", "ContractViolation", "DivergedError",
    "DomainError", "InfeasibleError", "NoSolutionError", "NodeAssignment", "ParametricMINLP",
    "PathTrace", "PathstableError", "Relaxation", "SingularPointError", "SolveReport", "Status",
    "audit_pruning", "branch", "build_parabola", "build_unit_circle", "check_integer_feasible",
    "enumerate_exhaustive", "kkt_jacobian", "kkt_residual", "newton_solve", "relax",
    "solve_bnb", "solve_relaxation", "solve_zero_problem", "trace_path",
]
