"""
dkmpc Closed-Loop Tracking

Receding-horizon loop against a plant: observe, solve, apply the first input
for one tick, log. The lookahead window pads with the final reference point.
"""

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..exceptions import DkmpcError, PlantError, ShapeError
from ..utils import get_logger
from .config import MpcConfig
from .controller import MpcController

logger = get_logger(__name__)


@dataclass
class TrackingLog:
    """Per-tick record: time, observed state, reference, applied input, objective, convergence."""
    t: np.ndarray
    x: np.ndarray
    r: np.ndarray
    u: np.ndarray
    objective: np.ndarray
    converged: np.ndarray

    def __len__(self) -> int:
        return self.t.shape[0]

    @classmethod
    def empty(cls, state_dim: int, control_dim: int) -> "TrackingLog":
        return cls(
            np.zeros(0), np.zeros((0, state_dim)), np.zeros((0, state_dim)),
            np.zeros((0, control_dim)), np.zeros(0), np.zeros(0, dtype=bool),
        )

    def errors(self) -> np.ndarray:
        """Euclidean deviation ||x_t - r_t|| per tick."""
        return np.linalg.norm(self.x - self.r, axis=1)

    def save_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        d, c = self.x.shape[1], self.u.shape[1]
        header = (
            ["t"] + [f"x{i}" for i in range(d)] + [f"r{i}" for i in range(d)]
            + [f"u{i}" for i in range(c)] + ["objective", "converged"]
        )
        with path.open("w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for k in range(len(self)):
                values = np.concatenate([[self.t[k]], self.x[k], self.r[k], self.u[k], [self.objective[k]]])
                writer.writerow(["%.17g" % v for v in values] + [str(int(self.converged[k]))])
        return path


def lookahead(points: np.ndarray, t: int, horizon: int) -> np.ndarray:
    """Rows t..t+H of points, padded with the final row."""
    idx = np.minimum(np.arange(t, t + horizon + 1), points.shape[0] - 1)
    return points[idx]


def run_tracking(
    controller: Union[MpcController, object],
    plant,
    reference,
    config: Optional[MpcConfig] = None,
    dt: Optional[float] = None,
) -> TrackingLog:
    """
    Track reference (a ReferencePath or an (T, d) array) in closed loop.

    controller is an MpcController, or a model combined with config. The
    plant is reset first. A plant failure raises PlantError carrying the
    partial log as ``partial_log``.
    """
    if not isinstance(controller, MpcController):
        controller = MpcController(controller, config)
    controller.reset()

    points = np.asarray(getattr(reference, "points", reference), dtype=np.float64)
    dt = getattr(reference, "dt", dt) or 1.0
    n_steps = points.shape[0]
    d, c = plant.state_dim, plant.control_dim
    if n_steps == 0:
        return TrackingLog.empty(d, c)
    if points.ndim != 2 or points.shape[1] != d:
        raise ShapeError(f"reference must have shape (T, {d}), got {points.shape}")

    log = TrackingLog(
        dt * np.arange(n_steps), np.zeros((n_steps, d)), points.copy(), np.zeros((n_steps, c)),
        np.zeros(n_steps), np.zeros(n_steps, dtype=bool),
    )
    x = plant.reset()
    for k in range(n_steps):
        u, solution = controller.step(x, lookahead(points, k, controller.horizon))
        log.x[k], log.u[k] = x, u
        log.objective[k], log.converged[k] = solution.objective_value, solution.converged
        try:
            x = plant.step(u)
        except DkmpcError as exc:
            error = PlantError(exc.message, step=k)
            error.partial_log = _truncate(log, k + 1)
            raise error from exc

    misses = int(np.count_nonzero(~log.converged))
    if misses:
        logger.warning(f"Solver did not converge on {misses} of {n_steps} ticks; best iterates were applied")
    logger.info(f"Tracked {n_steps} ticks, mean error {float(np.mean(log.errors())):.3f}")
    return log


def _truncate(log: TrackingLog, n: int) -> TrackingLog:
    return TrackingLog(log.t[:n], log.x[:n], log.r[:n], log.u[:n], log.objective[:n], log.converged[:n])
