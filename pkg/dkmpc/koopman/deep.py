"""
dkmpc Deep Koopman Model

Learned lifting: an MLP encoder phi, an MLP decoder phi^-1 and two
single-layer bias-free linear nets A and B, trained jointly on

    L_total = l1 * L_recon + l2 * L_pred + l3 * L_linear + l4 * L_reg

with exact reverse-mode gradients through the encoder, the decoder and the
latent rollout.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..data.dataset import WindowBatch
from ..data.normalization import NormalizationStats
from ..exceptions import ArgumentError, ConfigurationError, ShapeError
from ..nn import Activation, Mlp, mlp_forward
from ..utils import get_logger
from .base import LatentModel

logger = get_logger(__name__)

DEFAULT_HIDDEN = (128, 256)


@dataclass
class LossWeights:
    """Weights of the reconstruction, prediction, linearity and L2 terms."""
    recon: float = 1.0
    pred: float = 1.0
    linear: float = 1.0
    reg: float = 1e-6

    def __post_init__(self):
        for name in ("recon", "pred", "linear", "reg"):
            if getattr(self, name) < 0:
                raise ConfigurationError("must be non-negative", field=f"loss_weights.{name}")

    def to_dict(self) -> Dict[str, float]:
        return {"recon": self.recon, "pred": self.pred, "linear": self.linear, "reg": self.reg}


@dataclass
class LossComponents:
    """Scalar loss terms for one batch."""
    recon: float
    linear: float
    pred: float
    reg: float
    total: float

    def to_dict(self) -> Dict[str, float]:
        return {
            "recon": self.recon,
            "linear": self.linear,
            "pred": self.pred,
            "reg": self.reg,
            "total": self.total,
        }


@dataclass
class KoopmanModel(LatentModel):
    """
    Deep Koopman model: encoder, decoder and the bias-free A/B nets.
    """
    encoder: Mlp
    decoder: Mlp
    a_net: Mlp
    b_net: Mlp
    norm_stats: Optional[NormalizationStats] = None

    def __post_init__(self):
        n = self.encoder.output_dim
        if self.decoder.input_dim != n:
            raise ShapeError(f"decoder input dim {self.decoder.input_dim} != latent dim {n}")
        if self.decoder.output_dim != self.encoder.input_dim:
            raise ShapeError(
                f"decoder output dim {self.decoder.output_dim} != state dim {self.encoder.input_dim}"
            )
        if not (self.a_net.is_bias_free_linear() and self.b_net.is_bias_free_linear()):
            raise ConfigurationError("A and B nets must be bias-free identity-activation layers", field="a_net/b_net")
        if len(self.a_net.layers) != 1 or len(self.b_net.layers) != 1:
            raise ConfigurationError("A and B nets must be single layers", field="a_net/b_net")
        if self.A.shape != (n, n) or self.B.shape[0] != n:
            raise ShapeError(f"A {self.A.shape} / B {self.B.shape} inconsistent with latent dim {n}")
        if self.norm_stats is not None and (
            self.norm_stats.state_dim != self.state_dim or self.norm_stats.control_dim != self.control_dim
        ):
            raise ShapeError("normalization stats do not match model dimensions")

    @classmethod
    def initialize(
        cls,
        state_dim: int = 3,
        control_dim: int = 9,
        latent_dim: int = 12,
        encoder_hidden: Sequence[int] = DEFAULT_HIDDEN,
        decoder_hidden: Sequence[int] = DEFAULT_HIDDEN,
        seed: int = 0,
        norm_stats: Optional[NormalizationStats] = None,
    ) -> "KoopmanModel":
        """Glorot encoder/decoder, A = I, B = 0."""
        rng = np.random.default_rng(seed)
        encoder = Mlp.build([state_dim, *encoder_hidden, latent_dim], rng, Activation.RELU, Activation.IDENTITY)
        decoder = Mlp.build([latent_dim, *decoder_hidden, state_dim], rng, Activation.RELU, Activation.IDENTITY)
        return cls(
            encoder,
            decoder,
            Mlp.linear(np.eye(latent_dim)),
            Mlp.linear(np.zeros((latent_dim, control_dim))),
            norm_stats,
        )

    @property
    def A(self) -> np.ndarray:
        return self.a_net.layers[0].weights

    @property
    def B(self) -> np.ndarray:
        return self.b_net.layers[0].weights

    @property
    def state_dim(self) -> int:
        return self.encoder.input_dim

    def encode(self, x: np.ndarray) -> np.ndarray:
        return mlp_forward(self.encoder, x)

    def decode(self, z: np.ndarray) -> np.ndarray:
        return mlp_forward(self.decoder, z)

    def tracking_weight(self, q: float) -> np.ndarray:
        return q * np.eye(self.latent_dim)

    def parameters(self) -> Dict[str, np.ndarray]:
        """Live parameter arrays of all four nets."""
        params = {}
        params.update(self.encoder.parameters("encoder."))
        params.update(self.decoder.parameters("decoder."))
        params.update(self.a_net.parameters("A."))
        params.update(self.b_net.parameters("B."))
        return params

    def set_parameters(self, params: Dict[str, np.ndarray]) -> None:
        self.encoder.set_parameters(params, "encoder.")
        self.decoder.set_parameters(params, "decoder.")
        self.a_net.set_parameters(params, "A.")
        self.b_net.set_parameters(params, "B.")

    def weight_matrices(self):
        return (
            self.encoder.weight_matrices()
            + self.decoder.weight_matrices()
            + self.a_net.weight_matrices()
            + self.b_net.weight_matrices()
        )

    def copy(self) -> "KoopmanModel":
        return KoopmanModel(
            self.encoder.copy(), self.decoder.copy(), self.a_net.copy(), self.b_net.copy(), self.norm_stats
        )


def _check_batch(model: KoopmanModel, batch: WindowBatch, m: Optional[int]) -> Tuple[np.ndarray, np.ndarray]:
    if len(batch) == 0:
        raise ArgumentError("loss needs at least one window")
    horizon = batch.horizon
    if m is None:
        m = horizon
    if m < 1 or horizon < m:
        raise ArgumentError(f"windows hold {horizon + 1} states, need m+1 = {m + 1}")
    states = batch.states[:, : m + 1]
    controls = batch.controls[:, :m]
    if states.shape[2] != model.state_dim or controls.shape[2] != model.control_dim:
        raise ShapeError(
            f"windows carry state dim {states.shape[2]} / control dim {controls.shape[2]}, "
            f"model expects {model.state_dim} / {model.control_dim}"
        )
    return states, controls


def loss_and_gradients(
    model: KoopmanModel,
    batch: WindowBatch,
    weights: LossWeights,
    m: Optional[int] = None,
    pred_sum_mode: bool = False,
    with_gradients: bool = True,
) -> Tuple[LossComponents, Optional[Dict[str, np.ndarray]]]:
    """
    Loss terms and their gradients with respect to model.parameters().

    Every term is a mean over windows. L_pred compares phi(x_{k+m}) with the
    m-step latent rollout (or sums horizons 1..m with pred_sum_mode).
    """
    states, controls = _check_batch(model, batch, m)
    n_windows, steps, d = states.shape
    m = steps - 1
    n = model.latent_dim
    A, B = model.A, model.B

    z_all, enc_cache = model.encoder.forward_with_cache(states.reshape(-1, d))
    z = z_all.reshape(n_windows, steps, n)
    z0 = z[:, 0]

    x_hat, dec_cache = model.decoder.forward_with_cache(z0)
    recon_err = x_hat - states[:, 0]
    lin_err = z[:, 1] - (z0 @ A.T + controls[:, 0] @ B.T)

    rollout = [z0]
    for j in range(m):
        rollout.append(rollout[-1] @ A.T + controls[:, j] @ B.T)
    horizons = range(1, m + 1) if pred_sum_mode else (m,)
    pred_errs = {j: z[:, j] - rollout[j] for j in horizons}

    l_recon = float(np.sum(recon_err ** 2)) / n_windows
    l_linear = float(np.sum(lin_err ** 2)) / n_windows
    l_pred = sum(float(np.sum(e ** 2)) for e in pred_errs.values()) / n_windows
    l_reg = float(sum(np.sum(w ** 2) for w in model.weight_matrices()))
    total = (
        weights.recon * l_recon
        + weights.pred * l_pred
        + weights.linear * l_linear
        + weights.reg * l_reg
    )
    components = LossComponents(l_recon, l_linear, l_pred, l_reg, total)
    if not with_gradients:
        return components, None

    scale = 2.0 / n_windows
    grad_z = np.zeros_like(z)
    grad_a = np.zeros_like(A)
    grad_b = np.zeros_like(B)

    # reconstruction through the decoder
    dec_grads = model.decoder.backward(dec_cache, weights.recon * scale * recon_err)
    grad_z[:, 0] += dec_grads.input

    # one-step linearity
    g_lin = weights.linear * scale * lin_err
    grad_z[:, 1] += g_lin
    grad_a -= g_lin.T @ z0
    grad_b -= g_lin.T @ controls[:, 0]
    grad_z[:, 0] -= g_lin @ A

    # adjoint pass through the rollout; adjoint[j] = dL/d rollout[j]
    adjoint = np.zeros((n_windows, n))
    for j in range(m, 0, -1):
        if j in pred_errs:
            g_pred = weights.pred * scale * pred_errs[j]
            grad_z[:, j] += g_pred
            adjoint = adjoint - g_pred
        grad_a += adjoint.T @ rollout[j - 1]
        grad_b += adjoint.T @ controls[:, j - 1]
        adjoint = adjoint @ A
    grad_z[:, 0] += adjoint

    enc_grads = model.encoder.backward(enc_cache, grad_z.reshape(-1, n))

    grads: Dict[str, np.ndarray] = {}
    grads.update(model.encoder.named_gradients(enc_grads, "encoder."))
    grads.update(model.decoder.named_gradients(dec_grads, "decoder."))
    grads["A.0.weight"] = grad_a
    grads["B.0.weight"] = grad_b

    if weights.reg > 0:
        params = model.parameters()
        for name in grads:
            if name.endswith(".weight"):
                grads[name] = grads[name] + 2.0 * weights.reg * params[name]
    return components, grads


def loss_components(
    model: KoopmanModel,
    batch: WindowBatch,
    weights: LossWeights,
    m: Optional[int] = None,
    pred_sum_mode: bool = False,
) -> LossComponents:
    """L_recon, L_linear, L_pred, L_reg and the weighted L_total for a batch of windows."""
    components, _ = loss_and_gradients(model, batch, weights, m, pred_sum_mode, with_gradients=False)
    return components
