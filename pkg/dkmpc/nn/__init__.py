"""
dkmpc Neural Network Core

Dense layers, MLPs, Adam and finite-difference gradient checks.
"""

from .layers import Activation, DenseLayer, Mlp, MlpGradients, ForwardCache, mlp_forward, mlp_backward
from .optim import AdamState, adam_step
from .gradcheck import GradCheckReport, finite_diff_check, relative_error

__all__ = [
    "Activation",
    "DenseLayer",
    "Mlp",
    "MlpGradients",
    "ForwardCache",
    "mlp_forward",
    "mlp_backward",
    "AdamState",
    "adam_step",
    "GradCheckReport",
    "finite_diff_check",
    "relative_error",
]
