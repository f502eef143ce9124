"""Hub network design with vehicle fleets: exact branch-and-cut, oracles and baselines."""
from .instance import (
    CapacityMode, Instance, InstanceError, NetworkMode, ScenarioSet, VehicleConfig, VEHICLE_CONFIGS,
    generate_scenarios, import_ap, load_instance, load_scenarios, random_instance,
)
from .costs import Assignment, Solution, brute_force_oracle, evaluate_assignment
from .bnc import SolverOptions, SolveResult, solve_instance

__all__ = [
    "Assignment", "CapacityMode", "Instance", "InstanceError", "NetworkMode", "ScenarioSet", "Solution",
    "SolveResult", "SolverOptions", "VEHICLE_CONFIGS", "VehicleConfig", "brute_force_oracle",
    "evaluate_assignment", "generate_scenarios", "import_ap", "load_instance", "load_scenarios",
    "random_instance", "solve_instance",
]
