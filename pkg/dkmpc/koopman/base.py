"""
dkmpc Latent Model Base Classes

Interface shared by every Koopman model family so the MPC layer can drive any
of them: encode a normalized state into the lifted space, step the lifted
linear dynamics z' = A z + B u, and decode back.
"""

from abc import ABC, abstractmethod
from typing import Optional

import numpy as np

from ..data.dataset import WindowBatch
from ..data.normalization import NormalizationStats
from ..exceptions import ArgumentError, ShapeError


class LatentModel(ABC):
    """
    Abstract base class for lifted linear models.

    All inputs and outputs are in normalized units; single vectors of shape
    (dim,) and batches of shape (N, dim) are both accepted.
    """

    norm_stats: Optional[NormalizationStats] = None

    @property
    @abstractmethod
    def A(self) -> np.ndarray:
        """Latent operator (n x n)"""
        pass

    @property
    @abstractmethod
    def B(self) -> np.ndarray:
        """Control matrix (n x c)"""
        pass

    @property
    @abstractmethod
    def state_dim(self) -> int:
        pass

    @abstractmethod
    def encode(self, x: np.ndarray) -> np.ndarray:
        """Lift a normalized state"""
        pass

    @abstractmethod
    def decode(self, z: np.ndarray) -> np.ndarray:
        """Map a latent vector back to a normalized state"""
        pass

    @abstractmethod
    def tracking_weight(self, q: float) -> np.ndarray:
        """Default latent state-deviation weight with scale q"""
        pass

    @property
    def latent_dim(self) -> int:
        return self.A.shape[0]

    @property
    def control_dim(self) -> int:
        return self.B.shape[1]

    def latent_step(self, z: np.ndarray, u: np.ndarray) -> np.ndarray:
        """z_next = A z + B u"""
        z = np.asarray(z, dtype=np.float64)
        u = np.asarray(u, dtype=np.float64)
        if z.shape[-1] != self.latent_dim or u.shape[-1] != self.control_dim:
            raise ShapeError(
                f"latent_step expects z of dim {self.latent_dim} and u of dim {self.control_dim}, "
                f"got {z.shape} and {u.shape}"
            )
        return z @ self.A.T + u @ self.B.T

    def rollout(self, z0: np.ndarray, controls: np.ndarray) -> np.ndarray:
        """Apply latent_step once per control; controls has shape (m, c) or (N, m, c)."""
        controls = np.asarray(controls, dtype=np.float64)
        if controls.ndim < 2 or controls.shape[-2] == 0:
            raise ArgumentError("rollout needs at least one control")
        z = np.asarray(z0, dtype=np.float64)
        for j in range(controls.shape[-2]):
            z = self.latent_step(z, controls[..., j, :])
        return z


def open_loop_rmse(model: LatentModel, windows: WindowBatch) -> float:
    """
    m-step open-loop prediction RMSE in normalized units.

    Encodes the first state of every window, rolls the lifted dynamics through
    the window's controls and compares the decoded result with the last state.
    """
    if len(windows) == 0:
        raise ArgumentError("open_loop_rmse needs at least one window")
    z = model.rollout(model.encode(windows.states[:, 0]), windows.controls)
    error = model.decode(z) - windows.states[:, -1]
    return float(np.sqrt(np.mean(error * error)))
