from .dynamics import jacobians, linearize_dynamics, rollout, step_dynamics, step_raw
from .model import ControlInput, MpcParams, VehicleState
from .qp import ConvexQP, QPResult, solve_qp
from .scp import (
    IterationInfo,
    MpcController,
    TrajectorySolution,
    assemble_subproblem,
    mpc_tick,
    scp_solve,
)

__all__ = [
    "ControlInput", "ConvexQP", "IterationInfo", "MpcController", "MpcParams", "QPResult", "TrajectorySolution",
    "VehicleState", "assemble_subproblem", "jacobians", "linearize_dynamics", "mpc_tick", "rollout",
    "scp_solve", "solve_qp", "step_dynamics", "step_raw",
]
