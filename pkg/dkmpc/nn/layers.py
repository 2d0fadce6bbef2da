"""
dkmpc Dense Layers

Minimal dense network substrate: bias-optional affine layers with ReLU or
identity activation, chained into an MLP with exact reverse-mode gradients.
Inputs may be a single vector of shape (in,) or a batch of shape (N, in).
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..exceptions import ForwardCacheError, ShapeError
from ..utils import require_finite


class Activation(str, Enum):
    """Supported element-wise activations"""
    RELU = "relu"
    IDENTITY = "identity"

    @property
    def code(self) -> int:
        return 0 if self is Activation.IDENTITY else 1

    @classmethod
    def from_code(cls, code: int) -> "Activation":
        if code == 0:
            return cls.IDENTITY
        if code == 1:
            return cls.RELU
        raise ValueError(f"unknown activation code {code}")


@dataclass
class DenseLayer:
    """
    Affine layer y = act(W x + b).

    weights has shape (out, in); bias is None for bias-free layers, which
    never add an offset.
    """
    weights: np.ndarray
    bias: Optional[np.ndarray] = None
    activation: Activation = Activation.IDENTITY

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ShapeError(f"weights must be 2-D, got shape {self.weights.shape}")
        if self.bias is not None:
            self.bias = np.asarray(self.bias, dtype=np.float64)
            if self.bias.shape != (self.weights.shape[0],):
                raise ShapeError(
                    f"bias shape {self.bias.shape} does not match {self.weights.shape[0]} outputs"
                )
        self.activation = Activation(self.activation)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def has_bias(self) -> bool:
        return self.bias is not None

    @classmethod
    def glorot(
        cls,
        in_dim: int,
        out_dim: int,
        rng: np.random.Generator,
        activation: Activation = Activation.RELU,
        bias: bool = True,
    ) -> "DenseLayer":
        """Glorot-uniform weights, zero bias."""
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        weights = rng.uniform(-limit, limit, size=(out_dim, in_dim))
        return cls(weights, np.zeros(out_dim) if bias else None, activation)

    def pre_activation(self, x: np.ndarray) -> np.ndarray:
        out = x @ self.weights.T
        if self.bias is not None:
            out = out + self.bias
        return out

    def activate(self, a: np.ndarray) -> np.ndarray:
        if self.activation is Activation.RELU:
            return np.maximum(a, 0.0)
        return a

    def copy(self) -> "DenseLayer":
        return DenseLayer(
            self.weights.copy(),
            None if self.bias is None else self.bias.copy(),
            self.activation,
        )


@dataclass
class ForwardCache:
    """Intermediates of one forward pass, consumed by backward."""
    owner: int
    inputs: List[np.ndarray]
    pre_activations: List[np.ndarray]
    single: bool


@dataclass
class MlpGradients:
    """Gradients of a scalar loss with respect to weights, biases and input."""
    weights: List[np.ndarray]
    biases: List[Optional[np.ndarray]]
    input: np.ndarray


@dataclass
class Mlp:
    """
    Multi-layer perceptron built from chained DenseLayers.
    """
    layers: List[DenseLayer] = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("an MLP needs at least one layer")
        for i in range(1, len(self.layers)):
            if self.layers[i].in_dim != self.layers[i - 1].out_dim:
                raise ShapeError(
                    f"input dim {self.layers[i].in_dim} does not chain with previous "
                    f"output dim {self.layers[i - 1].out_dim}",
                    layer_index=i,
                )

    @classmethod
    def build(
        cls,
        widths: Sequence[int],
        rng: np.random.Generator,
        hidden_activation: Activation = Activation.RELU,
        output_activation: Activation = Activation.IDENTITY,
        bias: bool = True,
    ) -> "Mlp":
        """Glorot-initialised MLP with the given layer widths, e.g. (3, 128, 256, 12)."""
        if len(widths) < 2:
            raise ShapeError(f"need at least input and output widths, got {list(widths)}")
        layers = []
        for i in range(len(widths) - 1):
            last = i == len(widths) - 2
            layers.append(DenseLayer.glorot(
                widths[i], widths[i + 1], rng,
                activation=output_activation if last else hidden_activation,
                bias=bias,
            ))
        return cls(layers)

    @classmethod
    def linear(cls, weights: np.ndarray) -> "Mlp":
        """Single bias-free identity-activation layer (a plain matrix)."""
        return cls([DenseLayer(weights, None, Activation.IDENTITY)])

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def widths(self) -> List[int]:
        return [self.input_dim] + [layer.out_dim for layer in self.layers]

    def is_bias_free_linear(self) -> bool:
        return all(
            not layer.has_bias and layer.activation is Activation.IDENTITY
            for layer in self.layers
        )

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim not in (1, 2) or x.shape[-1] != self.input_dim:
            raise ShapeError(
                f"expected input of dim {self.input_dim}, got shape {x.shape}", layer_index=0
            )
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = self._check_input(x)
        for layer in self.layers:
            out = layer.activate(layer.pre_activation(out))
        return out

    def forward_with_cache(self, x: np.ndarray):
        x = self._check_input(x)
        single = x.ndim == 1
        out = x[None, :] if single else x
        inputs, pres = [], []
        for layer in self.layers:
            inputs.append(out)
            a = layer.pre_activation(out)
            pres.append(a)
            out = layer.activate(a)
        result = out[0] if single else out
        return result, ForwardCache(id(self), inputs, pres, single)

    def backward(self, cache: Optional[ForwardCache], upstream_grad: np.ndarray) -> MlpGradients:
        if cache is None or cache.owner != id(self) or len(cache.inputs) != len(self.layers):
            raise ForwardCacheError()
        grad = np.asarray(upstream_grad, dtype=np.float64)
        if cache.single:
            grad = grad[None, :]
        if grad.shape != cache.pre_activations[-1].shape:
            raise ShapeError(
                f"upstream gradient shape {grad.shape} does not match output "
                f"{cache.pre_activations[-1].shape}",
                layer_index=len(self.layers) - 1,
            )

        weight_grads: List[np.ndarray] = [None] * len(self.layers)
        bias_grads: List[Optional[np.ndarray]] = [None] * len(self.layers)
        for i in reversed(range(len(self.layers))):
            layer = self.layers[i]
            if layer.activation is Activation.RELU:
                # subgradient at exactly 0 is 0
                grad = grad * (cache.pre_activations[i] > 0.0)
            weight_grads[i] = grad.T @ cache.inputs[i]
            if layer.has_bias:
                bias_grads[i] = grad.sum(axis=0)
            grad = grad @ layer.weights

        input_grad = grad[0] if cache.single else grad
        return MlpGradients(weight_grads, bias_grads, input_grad)

    def parameters(self, prefix: str = "") -> Dict[str, np.ndarray]:
        """Live parameter arrays keyed by '<prefix><index>.weight' / '.bias'."""
        params = {}
        for i, layer in enumerate(self.layers):
            params[f"{prefix}{i}.weight"] = layer.weights
            if layer.has_bias:
                params[f"{prefix}{i}.bias"] = layer.bias
        return params

    def named_gradients(self, grads: MlpGradients, prefix: str = "") -> Dict[str, np.ndarray]:
        named = {}
        for i, layer in enumerate(self.layers):
            named[f"{prefix}{i}.weight"] = grads.weights[i]
            if layer.has_bias:
                named[f"{prefix}{i}.bias"] = grads.biases[i]
        return named

    def set_parameters(self, params: Dict[str, np.ndarray], prefix: str = "") -> None:
        for i, layer in enumerate(self.layers):
            weights = np.asarray(params[f"{prefix}{i}.weight"], dtype=np.float64)
            if weights.shape != layer.weights.shape:
                raise ShapeError(f"weight shape {weights.shape} != {layer.weights.shape}", layer_index=i)
            layer.weights = weights
            if layer.has_bias:
                layer.bias = np.asarray(params[f"{prefix}{i}.bias"], dtype=np.float64)

    def weight_matrices(self) -> List[np.ndarray]:
        return [layer.weights for layer in self.layers]

    def copy(self) -> "Mlp":
        return Mlp([layer.copy() for layer in self.layers])


def mlp_forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Forward pass; rejects non-finite input."""
    return net.forward(require_finite(np.asarray(x, dtype=np.float64), "input"))


def mlp_backward(net: Mlp, cache: Optional[ForwardCache], upstream_grad: np.ndarray) -> MlpGradients:
    """Reverse-mode gradients for a cached forward pass."""
    return net.backward(cache, upstream_grad)
