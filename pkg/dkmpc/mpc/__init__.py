"""
dkmpc Model Predictive Control

Condensed box-constrained QP over a lifted linear model, its projected
gradient solver and the receding-horizon tracking loop.
"""

from .config import MpcConfig
from .condense import CondensedQp, build_condensed_qp, prediction_matrices
from .solver import MpcSolution, solve_box_qp, lipschitz_estimate
from .controller import MpcController, mpc_step
from .tracking import TrackingLog, run_tracking, lookahead

__all__ = [
    "MpcConfig",
    "CondensedQp",
    "build_condensed_qp",
    "prediction_matrices",
    "MpcSolution",
    "solve_box_qp",
    "lipschitz_estimate",
    "MpcController",
    "mpc_step",
    "TrackingLog",
    "run_tracking",
    "lookahead",
]
