"""
dkmpc Data

Transition datasets, Min-Max normalization and random-actuation collection.
"""

from .dataset import (
    SPLITS,
    DEFAULT_RATIOS,
    TransitionTuple,
    Episode,
    WindowBatch,
    EpisodeDataset,
    split_dataset,
    extract_windows,
    save_csv,
    load_csv,
)
from .normalization import NormalizationStats, normalize, denormalize, fit_stats
from .collect import collect_random_episodes, soft_arm_factory

__all__ = [
    "SPLITS",
    "DEFAULT_RATIOS",
    "TransitionTuple",
    "Episode",
    "WindowBatch",
    "EpisodeDataset",
    "split_dataset",
    "extract_windows",
    "save_csv",
    "load_csv",
    "NormalizationStats",
    "normalize",
    "denormalize",
    "fit_stats",
    "collect_random_episodes",
    "soft_arm_factory",
]
