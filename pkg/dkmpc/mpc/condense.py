"""
dkmpc QP Condensation

Eliminates the lifted states of the horizon-H tracking problem

    sum_{k=0..H} (z_k - r_k)^T Q (z_k - r_k) + u_k^T R u_k,
    z_{k+1} = A z_k + B u_k,  z_0 = z_t

into a dense box-constrained QP 1/2 u^T P u + q^T u + c over the stacked
inputs u_0..u_H. The k=0 state term is constant and kept in c; u_H enters
only through R.
"""

from dataclasses import dataclass

import numpy as np

from ..exceptions import ShapeError
from .config import MpcConfig


@dataclass
class CondensedQp:
    """Dense QP over (H+1) stacked input blocks."""
    hessian: np.ndarray
    gradient: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    constant: float
    control_dim: int

    def __post_init__(self):
        dim = self.gradient.shape[0]
        if self.hessian.shape != (dim, dim):
            raise ShapeError(f"Hessian shape {self.hessian.shape} does not match gradient length {dim}")
        if self.lower.shape != (dim,) or self.upper.shape != (dim,):
            raise ShapeError("bounds must match the number of variables")
        if self.control_dim < 1 or dim % self.control_dim:
            raise ShapeError(f"{dim} variables do not split into blocks of {self.control_dim}")

    @property
    def dim(self) -> int:
        return self.gradient.shape[0]

    @property
    def n_blocks(self) -> int:
        return self.dim // self.control_dim

    def objective(self, u: np.ndarray) -> float:
        return float(0.5 * u @ self.hessian @ u + self.gradient @ u + self.constant)

    def project(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.lower, self.upper)

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)


def prediction_matrices(A: np.ndarray, B: np.ndarray, horizon: int):
    """
    Free-response powers [A^1..A^H] and the (H n) x ((H+1) c) input map G with
    block (k-1, j) = A^{k-1-j} B for j < k.
    """
    n, c = B.shape
    powers = [np.eye(n)]
    for _ in range(horizon):
        powers.append(A @ powers[-1])
    G = np.zeros((horizon * n, (horizon + 1) * c))
    for k in range(1, horizon + 1):
        for j in range(k):
            G[(k - 1) * n:k * n, j * c:(j + 1) * c] = powers[k - 1 - j] @ B
    return powers, G


def build_condensed_qp(model, z_t: np.ndarray, z_ref: np.ndarray, config: MpcConfig) -> CondensedQp:
    """
    Condense the lifted tracking problem at z_t against references r_0..r_H.

    model is any lifted linear model exposing A and B.
    """
    A = np.asarray(model.A, dtype=np.float64)
    B = np.asarray(model.B, dtype=np.float64)
    z_t = np.asarray(z_t, dtype=np.float64)
    z_ref = np.asarray(z_ref, dtype=np.float64)
    n, c = B.shape
    H = config.horizon
    if A.shape != (n, n):
        raise ShapeError(f"A has shape {A.shape}, expected ({n}, {n})")
    if config.Q.shape != (n, n) or config.R.shape != (c, c):
        raise ShapeError(
            f"Q {config.Q.shape} / R {config.R.shape} do not match latent dim {n} and control dim {c}"
        )
    if z_t.shape != (n,):
        raise ShapeError(f"z_t has shape {z_t.shape}, expected ({n},)")
    if z_ref.shape != (H + 1, n):
        raise ShapeError(f"z_ref has shape {z_ref.shape}, expected ({H + 1}, {n})")

    powers, G = prediction_matrices(A, B, H)
    # d_k = A^k z_t - r_k, k = 0..H
    free = np.stack([p @ z_t for p in powers]) - z_ref
    constant = float(np.einsum("ki,ij,kj->", free, config.Q, free))

    Q_bar = np.kron(np.eye(H), config.Q)
    R_bar = np.kron(np.eye(H + 1), config.R)
    QG = Q_bar @ G
    hessian = 2.0 * (G.T @ QG + R_bar)
    hessian = 0.5 * (hessian + hessian.T)
    gradient = 2.0 * QG.T @ free[1:].reshape(-1)

    return CondensedQp(
        hessian,
        gradient,
        np.tile(config.u_min, H + 1),
        np.tile(config.u_max, H + 1),
        constant,
        c,
    )
