"""
dkmpc Normalization

Per-feature Min-Max scaling of states and controls to [-1, 1]:

    x' = 2 (x - min) / (max - min) - 1

Values outside the fitted range extrapolate outside [-1, 1] without error.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from ..exceptions import ArgumentError, DegenerateFeatureError, ShapeError
from ..utils import dump_json, load_json


def normalize(value: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    value = np.asarray(value, dtype=np.float64)
    return 2.0 * (value - lo) / (hi - lo) - 1.0


def denormalize(value: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    value = np.asarray(value, dtype=np.float64)
    return (value + 1.0) * 0.5 * (hi - lo) + lo


@dataclass
class NormalizationStats:
    """Raw-unit min/max for every state and control feature."""
    state_min: np.ndarray
    state_max: np.ndarray
    control_min: np.ndarray
    control_max: np.ndarray

    def __post_init__(self):
        self.state_min = np.asarray(self.state_min, dtype=np.float64)
        self.state_max = np.asarray(self.state_max, dtype=np.float64)
        self.control_min = np.asarray(self.control_min, dtype=np.float64)
        self.control_max = np.asarray(self.control_max, dtype=np.float64)
        if self.state_min.shape != self.state_max.shape or self.state_min.ndim != 1:
            raise ShapeError("state min/max must be matching vectors")
        if self.control_min.shape != self.control_max.shape or self.control_min.ndim != 1:
            raise ShapeError("control min/max must be matching vectors")
        lows = np.concatenate([self.state_min, self.control_min])
        highs = np.concatenate([self.state_max, self.control_max])
        for i, (lo, hi) in enumerate(zip(lows, highs)):
            if not hi > lo:
                raise DegenerateFeatureError(i, self.feature_names[i], float(lo))

    @property
    def state_dim(self) -> int:
        return self.state_min.size

    @property
    def control_dim(self) -> int:
        return self.control_min.size

    @property
    def feature_names(self):
        return [f"x{i}" for i in range(self.state_min.size)] + [f"u{i}" for i in range(self.control_min.size)]

    def normalize_state(self, x: np.ndarray) -> np.ndarray:
        return normalize(x, self.state_min, self.state_max)

    def denormalize_state(self, x: np.ndarray) -> np.ndarray:
        return denormalize(x, self.state_min, self.state_max)

    def normalize_control(self, u: np.ndarray) -> np.ndarray:
        return normalize(u, self.control_min, self.control_max)

    def denormalize_control(self, u: np.ndarray) -> np.ndarray:
        return denormalize(u, self.control_min, self.control_max)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "state_min": self.state_min.tolist(),
            "state_max": self.state_max.tolist(),
            "control_min": self.control_min.tolist(),
            "control_max": self.control_max.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NormalizationStats":
        return cls(data["state_min"], data["state_max"], data["control_min"], data["control_max"])

    def save_json(self, path: Union[str, Path]) -> Path:
        return dump_json(self.to_dict(), path)

    @classmethod
    def load_json(cls, path: Union[str, Path]) -> "NormalizationStats":
        return cls.from_dict(load_json(path))


def fit_stats(dataset) -> NormalizationStats:
    """
    Min/max over the training split of an EpisodeDataset; an untagged dataset
    counts as all-train.

    States include both x_k and x_{k+1} of every tuple. Raises
    DegenerateFeatureError naming the first constant feature.
    """
    episodes = dataset.split("train")
    if not episodes and all(ep.split is None for ep in dataset.episodes):
        episodes = list(dataset.episodes)
    if not episodes or sum(ep.length for ep in episodes) == 0:
        raise ArgumentError("fit_stats needs a non-empty train split")
    states = np.concatenate([ep.states for ep in episodes if ep.length > 0])
    controls = np.concatenate([ep.controls for ep in episodes if ep.length > 0])
    return NormalizationStats(states.min(axis=0), states.max(axis=0), controls.min(axis=0), controls.max(axis=0))
