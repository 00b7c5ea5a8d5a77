"""Online combinatorial allocation against the optimal online benchmark."""
from .config_lp import LpSolution, build_and_solve, feasible_solution_xos, tighten, verify_feasibility
from .decomposition import FreeDetDecomposition
from .estimators import BaselineAllocator, CombinedAllocator, HalfDoubleAllocator, WeLargeAllocator
from .exceptions import InstanceError, IterLimit, NotTight, PhiloError, TooLarge
from .instance import AgentType, Instance, check_instance
from .prophet import PiInstance, benchmark, optimal_thresholds

__all__ = [
    "AgentType", "BaselineAllocator", "CombinedAllocator", "FreeDetDecomposition",
    "HalfDoubleAllocator", "Instance", "InstanceError", "IterLimit", "LpSolution", "NotTight",
    "PhiloError", "PiInstance", "TooLarge", "WeLargeAllocator", "benchmark", "build_and_solve",
    "check_instance", "feasible_solution_xos", "optimal_thresholds", "tighten",
    "verify_feasibility",
]
