"""
dkmpc - Deep Koopman model predictive control

Learned latent linear models of a simulated soft arm, a condensed box-QP
controller and the experiment pipeline that compares them with an RBF
Koopman baseline.
"""

__version__ = "0.1.0"

from .exceptions import DkmpcError
from .data import EpisodeDataset, NormalizationStats, collect_random_episodes, fit_stats, split_dataset
from .koopman import KoopmanModel, EdmdModel, edmd_fit, train, save_checkpoint, load_checkpoint
from .mpc import MpcConfig, MpcController, mpc_step, run_tracking
from .plant import PlantConfig, SoftArmPlant, LinearPlant
from .tasks import Task, make_reference
from .metrics import avg_tracking_error
from .config import RunConfig, load_config

__all__ = [
    "DkmpcError",
    # data
    "EpisodeDataset",
    "NormalizationStats",
    "collect_random_episodes",
    "fit_stats",
    "split_dataset",
    # models
    "KoopmanModel",
    "EdmdModel",
    "edmd_fit",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    # control
    "MpcConfig",
    "MpcController",
    "mpc_step",
    "run_tracking",
    # plants and tasks
    "PlantConfig",
    "SoftArmPlant",
    "LinearPlant",
    "Task",
    "make_reference",
    "avg_tracking_error",
    # configuration
    "RunConfig",
    "load_config",
]
