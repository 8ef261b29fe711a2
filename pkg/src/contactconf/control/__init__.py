from .qp import QPInfeasible, QPProblem, QPSolution, solve_qp
from .directions import target_directions
from .controller import (
    ControlObjective,
    ControlTick,
    ControllerParams,
    ObjectiveTerm,
    apply_target_increment,
    build_qp,
    control_tick,
)

__all__ = [
    "QPInfeasible",
    "QPProblem",
    "QPSolution",
    "solve_qp",
    "target_directions",
    "ControlObjective",
    "ControlTick",
    "ControllerParams",
    "ObjectiveTerm",
    "apply_target_increment",
    "build_qp",
    "control_tick",
]
