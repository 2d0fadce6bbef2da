"""
dkmpc MPC Configuration

Horizon, latent/input weights, normalized input bounds and solver limits.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import eigvalsh

from ..exceptions import ConfigurationError

SYMMETRY_TOL = 1e-12
PSD_FLOOR = -1e-10


def _check_psd(matrix: np.ndarray, name: str) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ConfigurationError(f"must be square, got shape {matrix.shape}", field=name)
    if np.max(np.abs(matrix - matrix.T), initial=0.0) > SYMMETRY_TOL:
        raise ConfigurationError("must be symmetric", field=name)
    if matrix.size and eigvalsh(matrix)[0] < PSD_FLOOR:
        raise ConfigurationError("must be positive semi-definite", field=name)
    return matrix


@dataclass
class MpcConfig:
    """
    Receding-horizon settings in normalized units.

    The QP optimises H+1 input blocks (k = 0..H); Q weights latent deviations
    and R weights inputs. command_min/command_max, when set, bound the raw
    command actually sent to the plant.
    """
    horizon: int
    Q: np.ndarray
    R: np.ndarray
    u_min: np.ndarray
    u_max: np.ndarray
    solver_tol: float = 1e-6
    solver_max_iters: int = 500
    command_min: Optional[float] = None
    command_max: Optional[float] = None

    def __post_init__(self):
        if self.horizon < 0:
            raise ConfigurationError(f"must be >= 0, got {self.horizon}", field="horizon")
        self.Q = _check_psd(self.Q, "Q")
        self.R = _check_psd(self.R, "R")
        self.u_min = np.asarray(self.u_min, dtype=np.float64).reshape(-1)
        self.u_max = np.asarray(self.u_max, dtype=np.float64).reshape(-1)
        if self.u_min.shape != (self.R.shape[0],) or self.u_max.shape != (self.R.shape[0],):
            raise ConfigurationError(
                f"bounds must have length {self.R.shape[0]}, got {self.u_min.shape} and {self.u_max.shape}",
                field="u_min/u_max",
            )
        if not np.all(self.u_min < self.u_max):
            raise ConfigurationError("u_min must be strictly below u_max", field="u_min/u_max")
        if self.solver_tol <= 0:
            raise ConfigurationError("must be positive", field="solver_tol")
        if self.solver_max_iters < 1:
            raise ConfigurationError("must be >= 1", field="solver_max_iters")
        if self.command_min is not None and self.command_max is not None and self.command_min >= self.command_max:
            raise ConfigurationError("command_min must be strictly below command_max", field="command_min/command_max")

    @property
    def latent_dim(self) -> int:
        return self.Q.shape[0]

    @property
    def control_dim(self) -> int:
        return self.R.shape[0]

    @classmethod
    def diagonal(
        cls,
        latent_dim: int,
        control_dim: int,
        q: float = 10.0,
        r: float = 0.1,
        horizon: int = 10,
        u_min: float = -1.0,
        u_max: float = 1.0,
        **kwargs,
    ) -> "MpcConfig":
        """Q = q I, R = r I with uniform bounds."""
        return cls(
            horizon,
            q * np.eye(latent_dim),
            r * np.eye(control_dim),
            np.full(control_dim, u_min),
            np.full(control_dim, u_max),
            **kwargs,
        )
