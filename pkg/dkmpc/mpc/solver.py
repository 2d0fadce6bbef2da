"""
dkmpc Box QP Solver

Accelerated projected gradient (Nesterov momentum with function-value
restart) for min 1/2 u^T P u + q^T u + c subject to lower <= u <= upper.
Projection onto the box is exact, so every iterate is feasible.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from ..exceptions import NonConvexQpError, ShapeError
from ..utils import get_logger
from .condense import CondensedQp
from .config import MpcConfig

logger = get_logger(__name__)

POWER_ITERATIONS = 50
LIPSCHITZ_MARGIN = 1.05
CURVATURE_TOL = 1e-10
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITERS = 500


@dataclass
class MpcSolution:
    """Solver output; first_input is the first control block of u_star."""
    u_star: np.ndarray
    objective_value: float
    iterations: int
    converged: bool
    first_input: np.ndarray
    projected_gradient_norm: float = 0.0
    restarts: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "objective_value": self.objective_value,
            "iterations": self.iterations,
            "converged": self.converged,
            "projected_gradient_norm": self.projected_gradient_norm,
            "restarts": self.restarts,
        }


def lipschitz_estimate(hessian: np.ndarray, iterations: int = POWER_ITERATIONS) -> float:
    """Largest eigenvalue of a PSD matrix by power iteration from a fixed start."""
    v = np.random.default_rng(0).standard_normal(hessian.shape[0])
    v /= max(np.linalg.norm(v), 1e-300)
    estimate = 0.0
    for _ in range(iterations):
        w = hessian @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        estimate = float(v @ w)
        v = w / norm
    return max(estimate, float(np.linalg.norm(hessian @ v)))


def _projected_gradient_norm(qp: CondensedQp, u: np.ndarray) -> float:
    grad = qp.hessian @ u + qp.gradient
    return float(np.linalg.norm(u - qp.project(u - grad)))


def solve_box_qp(
    qp: CondensedQp,
    config: Optional[MpcConfig] = None,
    initial: Optional[np.ndarray] = None,
    tol: Optional[float] = None,
    max_iters: Optional[int] = None,
) -> MpcSolution:
    """
    Minimise the QP over its box.

    Tolerance and iteration limit come from config unless given explicitly.

    Stops when ||u - clip(u - grad f(u))|| < tol (converged) or after max_iters
    iterations. The best iterate is returned either way. Raises
    NonConvexQpError if a step exposes negative curvature.
    """
    if tol is None:
        tol = config.solver_tol if config is not None else DEFAULT_TOL
    if max_iters is None:
        max_iters = config.solver_max_iters if config is not None else DEFAULT_MAX_ITERS
    u = qp.midpoint() if initial is None else np.asarray(initial, dtype=np.float64)
    if u.shape != (qp.dim,):
        raise ShapeError(f"initial point has shape {u.shape}, expected ({qp.dim},)")
    u = qp.project(u)

    lipschitz = max(LIPSCHITZ_MARGIN * lipschitz_estimate(qp.hessian), 1e-12)
    step = 1.0 / lipschitz
    curvature_floor = -CURVATURE_TOL * max(lipschitz, 1.0)

    f_u = qp.objective(u)
    best, f_best = u, f_u
    y = u
    momentum = 1.0
    restarts = 0
    iterations = 0
    pg_norm = _projected_gradient_norm(qp, u)
    converged = pg_norm < tol

    while not converged and iterations < max_iters:
        iterations += 1
        candidate = qp.project(y - step * (qp.hessian @ y + qp.gradient))
        d = candidate - y
        dd = float(d @ d)
        if dd > 0.0:
            curvature = float(d @ qp.hessian @ d) / dd
            if curvature < curvature_floor:
                raise NonConvexQpError(curvature)

        f_candidate = qp.objective(candidate)
        if f_candidate > f_u:
            if momentum == 1.0:
                # plain step from u failed: the curvature estimate was too low
                lipschitz *= 2.0
                step = 1.0 / lipschitz
            # restart from the last accepted point without momentum
            y = u
            momentum = 1.0
            restarts += 1
            continue

        next_momentum = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * momentum * momentum))
        y = candidate + ((momentum - 1.0) / next_momentum) * (candidate - u)
        u, f_u = candidate, f_candidate
        momentum = next_momentum
        if f_u <= f_best:
            best, f_best = u, f_u

        pg_norm = _projected_gradient_norm(qp, u)
        converged = pg_norm < tol

    if not converged:
        pg_norm = _projected_gradient_norm(qp, best)
        logger.debug(f"Box QP stopped after {iterations} iterations, projected gradient {pg_norm:.3e}")

    return MpcSolution(
        u_star=best,
        objective_value=f_best,
        iterations=iterations,
        converged=converged,
        first_input=best[: qp.control_dim].copy(),
        projected_gradient_norm=pg_norm,
        restarts=restarts,
    )
