"""
dkmpc Linear Plant

Discrete linear system x' = A x + B (u - u_center), used for exact-recovery and
closed-loop checks where the true model is known.
"""

from typing import Optional

import numpy as np

from ..exceptions import NumericError, ShapeError
from .base import Plant


def random_stable_system(
    state_dim: int,
    control_dim: int,
    spectral_radius: float,
    rng: np.random.Generator,
):
    """Random (A, B) with A rescaled to the given spectral radius."""
    a = rng.normal(size=(state_dim, state_dim))
    a *= spectral_radius / np.max(np.abs(np.linalg.eigvals(a)))
    b = rng.normal(size=(state_dim, control_dim))
    return a, b


class LinearPlant(Plant):
    """
    Linear plant with box-bounded commands.

    Commands are clamped to [u_min, u_max]; u_center shifts the input so the
    bounded command range is symmetric around zero effort.
    """

    def __init__(
        self,
        a: np.ndarray,
        b: np.ndarray,
        x0: Optional[np.ndarray] = None,
        u_min: float = 0.0,
        u_max: float = 40.0,
        u_center: Optional[float] = None,
    ):
        self.a = np.asarray(a, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64)
        n = self.a.shape[0]
        if self.a.shape != (n, n) or self.b.shape[0] != n:
            raise ShapeError(f"inconsistent system matrices {self.a.shape}, {self.b.shape}")
        self.x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64)
        self.u_min = u_min
        self.u_max = u_max
        self.u_center = 0.5 * (u_min + u_max) if u_center is None else u_center
        self.x = self.x0.copy()

    @property
    def state_dim(self) -> int:
        return self.a.shape[0]

    @property
    def control_dim(self) -> int:
        return self.b.shape[1]

    @property
    def control_bounds(self):
        return (np.full(self.control_dim, self.u_min), np.full(self.control_dim, self.u_max))

    def reset(self) -> np.ndarray:
        self.x = self.x0.copy()
        return self.x.copy()

    def observe(self) -> np.ndarray:
        return self.x.copy()

    def step(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (self.control_dim,):
            raise ShapeError(f"command must have shape ({self.control_dim},), got {u.shape}")
        if not np.all(np.isfinite(u)):
            raise NumericError("non-finite command", parameter="u")
        u = np.clip(u, self.u_min, self.u_max)
        self.x = self.a @ self.x + self.b @ (u - self.u_center)
        return self.x.copy()
