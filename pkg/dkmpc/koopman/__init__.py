"""
dkmpc Koopman Models

Lifted linear models z' = A z + B u: the learned deep Koopman model, its
training loop, the RBF/EDMD baseline and the shared checkpoint format.
"""

from .base import LatentModel, open_loop_rmse
from .deep import KoopmanModel, LossWeights, LossComponents, loss_components, loss_and_gradients
from .training import TrainConfig, EpochRecord, TrainingHistory, train
from .rbf import (
    Lifting,
    IdentityLifting,
    RbfLifting,
    EdmdModel,
    rbf_lift,
    make_rbf_lifting,
    edmd_fit,
    edmd_fit_arrays,
    kmpc_controller,
)
from .checkpoint import FORMAT_VERSION, checkpoint_bytes, save_checkpoint, load_checkpoint

__all__ = [
    "LatentModel",
    "open_loop_rmse",
    "KoopmanModel",
    "LossWeights",
    "LossComponents",
    "loss_components",
    "loss_and_gradients",
    "TrainConfig",
    "EpochRecord",
    "TrainingHistory",
    "train",
    "Lifting",
    "IdentityLifting",
    "RbfLifting",
    "EdmdModel",
    "rbf_lift",
    "make_rbf_lifting",
    "edmd_fit",
    "edmd_fit_arrays",
    "kmpc_controller",
    "FORMAT_VERSION",
    "checkpoint_bytes",
    "save_checkpoint",
    "load_checkpoint",
]
