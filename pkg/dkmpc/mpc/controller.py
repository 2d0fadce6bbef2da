"""
dkmpc MPC Controller

One receding-horizon step: normalize the measured state and the reference,
lift both, condense and solve the QP, and return the first input in raw units.
"""

from typing import Optional, Tuple

import numpy as np

from ..exceptions import ConfigurationError, ShapeError
from ..utils import get_logger
from .condense import build_condensed_qp
from .config import MpcConfig
from .solver import MpcSolution, solve_box_qp

logger = get_logger(__name__)


def _raw_bounds(model, config: MpcConfig) -> Tuple[np.ndarray, np.ndarray]:
    stats = model.norm_stats
    lo, hi = stats.denormalize_control(config.u_min), stats.denormalize_control(config.u_max)
    if config.command_min is not None:
        lo = np.maximum(lo, config.command_min)
    if config.command_max is not None:
        hi = np.minimum(hi, config.command_max)
    return lo, hi


def mpc_step(
    model,
    x_t: np.ndarray,
    x_ref: np.ndarray,
    config: MpcConfig,
    initial: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, MpcSolution]:
    """
    Solve the tracking QP at raw state x_t against raw references x_ref (H+1 rows).

    Returns the first input in raw units, clamped to the raw image of the
    normalized bounds and to the plant command range, and the full solution. Non-convergence is reported in
    the solution and never raises.
    """
    stats = model.norm_stats
    if stats is None:
        raise ConfigurationError("model carries no normalization stats", field="norm_stats")
    x_ref = np.asarray(x_ref, dtype=np.float64)
    if x_ref.shape != (config.horizon + 1, model.state_dim):
        raise ShapeError(
            f"reference must have shape ({config.horizon + 1}, {model.state_dim}), got {x_ref.shape}"
        )
    z_t = model.encode(stats.normalize_state(np.asarray(x_t, dtype=np.float64)))
    z_ref = model.encode(stats.normalize_state(x_ref))

    qp = build_condensed_qp(model, z_t, z_ref, config)
    solution = solve_box_qp(qp, config, initial=initial)
    if not solution.converged:
        logger.debug(
            f"MPC solver hit {solution.iterations} iterations without converging "
            f"(projected gradient {solution.projected_gradient_norm:.3e}); applying best iterate"
        )

    lo, hi = _raw_bounds(model, config)
    u_raw = np.clip(stats.denormalize_control(solution.first_input), lo, hi)
    return u_raw, solution


class MpcController:
    """
    Stateful receding-horizon controller with warm starts.

    Each solve starts from the previous solution shifted by one block with the
    last block repeated; the first solve starts at the box midpoint.
    """

    def __init__(self, model, config: MpcConfig):
        if model.norm_stats is None:
            raise ConfigurationError("model carries no normalization stats", field="norm_stats")
        if config.Q.shape != (model.latent_dim, model.latent_dim):
            raise ConfigurationError(
                f"Q has shape {config.Q.shape}, model latent dim is {model.latent_dim}", field="mpc.Q"
            )
        if config.R.shape != (model.control_dim, model.control_dim):
            raise ConfigurationError(
                f"R has shape {config.R.shape}, model control dim is {model.control_dim}", field="mpc.R"
            )
        self.model = model
        self.config = config
        self.previous: Optional[MpcSolution] = None

    @property
    def horizon(self) -> int:
        return self.config.horizon

    def reset(self) -> None:
        self.previous = None

    def warm_start(self) -> Optional[np.ndarray]:
        if self.previous is None:
            return None
        blocks = self.previous.u_star.reshape(self.config.horizon + 1, -1)
        return np.vstack([blocks[1:], blocks[-1:]]).reshape(-1)

    def step(self, x_t: np.ndarray, x_ref: np.ndarray) -> Tuple[np.ndarray, MpcSolution]:
        u_raw, solution = mpc_step(self.model, x_t, x_ref, self.config, initial=self.warm_start())
        self.previous = solution
        return u_raw, solution
