"""
dkmpc RBF Koopman Baseline

Fixed lifting psi(x) = [x; exp(-||x - c_j||^2 / (2 gamma^2))] with the lifted
operator fitted by damped least squares (EDMD). Decoding is projection onto
the first state_dim coordinates.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.distance import pdist

from ..data.dataset import EpisodeDataset
from ..data.normalization import NormalizationStats, fit_stats
from ..exceptions import ArgumentError, ConfigurationError, EdmdFitError, ShapeError
from ..mpc import MpcConfig, MpcController
from ..utils import get_logger
from .base import LatentModel

logger = get_logger(__name__)

DEFAULT_DAMPING = 1e-8


class Lifting(ABC):
    """
    A fixed dictionary whose output begins with the state itself.
    """

    @property
    @abstractmethod
    def state_dim(self) -> int:
        pass

    @property
    @abstractmethod
    def output_dim(self) -> int:
        pass

    @abstractmethod
    def lift(self, x: np.ndarray) -> np.ndarray:
        pass


@dataclass
class IdentityLifting(Lifting):
    """psi(x) = x; EDMD with this lifting is plain linear least squares (DMDc)."""
    dim: int

    @property
    def state_dim(self) -> int:
        return self.dim

    @property
    def output_dim(self) -> int:
        return self.dim

    def lift(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ShapeError(f"expected state dim {self.dim}, got shape {x.shape}")
        return x.copy()


@dataclass
class RbfLifting(Lifting):
    """Gaussian RBF features appended to the state."""
    centers: np.ndarray
    gamma: float

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.float64)
        if self.centers.ndim != 2 or self.centers.shape[0] < 1:
            raise ConfigurationError("need at least one center", field="n_rbf")
        if not self.gamma > 0:
            raise ConfigurationError(f"must be positive, got {self.gamma}", field="gamma")

    @property
    def n_rbf(self) -> int:
        return self.centers.shape[0]

    @property
    def state_dim(self) -> int:
        return self.centers.shape[1]

    @property
    def output_dim(self) -> int:
        return self.state_dim + self.n_rbf

    def lift(self, x: np.ndarray) -> np.ndarray:
        return rbf_lift(x, self)


def rbf_lift(x: np.ndarray, lifting: RbfLifting) -> np.ndarray:
    """[x; exp(-||x - c_j||^2 / (2 gamma^2))] for a state or a batch of states."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != lifting.state_dim:
        raise ShapeError(f"expected state dim {lifting.state_dim}, got shape {x.shape}")
    diff = x[..., None, :] - lifting.centers
    sq = np.sum(diff * diff, axis=-1)
    features = np.exp(-sq / (2.0 * lifting.gamma ** 2))
    return np.concatenate([x, features], axis=-1)


def make_rbf_lifting(states: np.ndarray, n_rbf: int = 100, seed: int = 0) -> RbfLifting:
    """
    Centers drawn uniformly over the bounding box of the (normalized) states;
    gamma is the median pairwise center distance.
    """
    states = np.asarray(states, dtype=np.float64)
    if n_rbf < 1:
        raise ConfigurationError(f"must be >= 1, got {n_rbf}", field="n_rbf")
    if states.ndim != 2 or states.shape[0] == 0:
        raise ArgumentError("need a non-empty (N, d) state array to place centers")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(states.min(axis=0), states.max(axis=0), size=(n_rbf, states.shape[1]))
    # a single center has no pairwise distance
    gamma = float(np.median(pdist(centers))) if n_rbf > 1 else 1.0
    return RbfLifting(centers, gamma)


@dataclass
class EdmdModel(LatentModel):
    """Lifted linear model with a fixed dictionary."""
    lifting: Lifting
    a: np.ndarray
    b: np.ndarray
    norm_stats: Optional[NormalizationStats] = None

    def __post_init__(self):
        n = self.lifting.output_dim
        self.a = np.asarray(self.a, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.a.shape != (n, n) or self.b.ndim != 2 or self.b.shape[0] != n:
            raise ShapeError(f"A {self.a.shape} / B {self.b.shape} inconsistent with lifted dim {n}")

    @property
    def A(self) -> np.ndarray:
        return self.a

    @property
    def B(self) -> np.ndarray:
        return self.b

    @property
    def state_dim(self) -> int:
        return self.lifting.state_dim

    def encode(self, x: np.ndarray) -> np.ndarray:
        return self.lifting.lift(x)

    def decode(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.latent_dim:
            raise ShapeError(f"expected latent dim {self.latent_dim}, got shape {z.shape}")
        return z[..., : self.state_dim].copy()

    def tracking_weight(self, q: float) -> np.ndarray:
        """q on the state passthrough coordinates, zero on the RBF features."""
        weight = np.zeros((self.latent_dim, self.latent_dim))
        idx = np.arange(self.state_dim)
        weight[idx, idx] = q
        return weight


def edmd_fit_arrays(
    x: np.ndarray,
    u: np.ndarray,
    x_next: np.ndarray,
    lifting: Lifting,
    damping: float = DEFAULT_DAMPING,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Least-squares [A B] minimising sum ||psi(x') - A psi(x) - B u||^2.

    Solves the normal equations (Theta^T Theta / N + damping I) K = Theta^T Y / N
    by Cholesky, Theta = [psi(x), u].
    """
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    n_lift = lifting.output_dim
    n_ctrl = u.shape[1]
    n_samples = x.shape[0]
    if n_samples < n_lift + n_ctrl:
        raise ArgumentError(f"need at least {n_lift + n_ctrl} transitions, got {n_samples}")

    theta = np.hstack([lifting.lift(x), u])
    target = lifting.lift(x_next)
    if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(target))):
        raise EdmdFitError("non-finite lifted data")

    gram = theta.T @ theta / n_samples + damping * np.eye(n_lift + n_ctrl)
    rhs = theta.T @ target / n_samples
    try:
        factor = cho_factor(gram)
    except LinAlgError as exc:
        raise EdmdFitError(f"Gram matrix is rank-deficient after damping {damping:g}: {exc}") from exc
    solution = cho_solve(factor, rhs)
    if not np.all(np.isfinite(solution)):
        raise EdmdFitError("normal equations produced non-finite coefficients")
    return solution[:n_lift].T, solution[n_lift:].T


def edmd_fit(
    dataset: EpisodeDataset,
    lifting: Lifting,
    norm_stats: Optional[NormalizationStats] = None,
    damping: float = DEFAULT_DAMPING,
) -> EdmdModel:
    """Fit an EdmdModel on the normalized train split."""
    stats = norm_stats or fit_stats(dataset)
    episodes = dataset.split("train") or list(dataset.episodes)
    x, u, xn = EpisodeDataset(episodes).transitions()
    a, b = edmd_fit_arrays(
        stats.normalize_state(x), stats.normalize_control(u), stats.normalize_state(xn), lifting, damping
    )
    logger.info(f"EDMD fit on {x.shape[0]} transitions, lifted dim {lifting.output_dim}")
    return EdmdModel(lifting, a, b, stats)


def kmpc_controller(model: EdmdModel, config: MpcConfig) -> MpcController:
    """MPC controller over the EDMD model; the config must match the lifted dimensions."""
    n, c = model.latent_dim, model.control_dim
    if config.Q.shape != (n, n):
        raise ConfigurationError(f"Q has shape {config.Q.shape}, lifted dim is {n}", field="mpc.Q")
    if config.R.shape != (c, c):
        raise ConfigurationError(f"R has shape {config.R.shape}, control dim is {c}", field="mpc.R")
    if config.u_min.shape != (c,):
        raise ConfigurationError(f"bounds have shape {config.u_min.shape}, control dim is {c}", field="mpc.u_min")
    return MpcController(model, config)
