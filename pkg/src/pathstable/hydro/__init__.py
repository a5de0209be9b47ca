"""Saint-Venant river cascade with binary weirs."""
from .model import CascadeModel, ReachGeometry, load_model_config, read_hydrograph, write_hydrograph
from .problem import build_river_problem, policy_objective, write_results
from .scheme import continuity_residual, momentum_residual, smooth_abs
from .simulate import HydraulicState, simulate, solve_steady_state

__all__ = [
    "CascadeModel", "HydraulicState", "ReachGeometry", "build_river_problem", "continuity_residual",
    "load_model_config", "momentum_residual", "policy_objective", "read_hydrograph", "simulate",
    "smooth_abs", "solve_steady_state", "write_hydrograph", "write_results",
]
