"""
dkmpc Optimizers

Adam with bias correction over named parameter dictionaries.
"""

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from ..exceptions import ConfigurationError, NumericError, ShapeError


@dataclass
class AdamState:
    """Per-parameter moment accumulators and step counter."""
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigurationError("must be positive", field="learning_rate")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigurationError("betas must lie in [0, 1)", field="beta1/beta2")
        if self.step_count < 0:
            raise ConfigurationError("must be non-negative", field="step_count")

    @classmethod
    def for_parameters(cls, params: Dict[str, np.ndarray], **kwargs) -> "AdamState":
        return cls(
            first_moment={k: np.zeros_like(v) for k, v in params.items()},
            second_moment={k: np.zeros_like(v) for k, v in params.items()},
            **kwargs,
        )


def adam_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: AdamState,
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    One Adam update with bias correction.

    Returns new parameter arrays and a new state; the inputs are not modified.
    A zero gradient from fresh moments leaves the parameters unchanged.
    """
    for name, grad in grads.items():
        if name not in params:
            raise ShapeError(f"gradient for unknown parameter '{name}'")
        if grad.shape != params[name].shape:
            raise ShapeError(f"gradient shape {grad.shape} != parameter shape {params[name].shape} for '{name}'")
        if not np.all(np.isfinite(grad)):
            raise NumericError("non-finite gradient", parameter=name)

    t = state.step_count + 1
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t

    new_params, new_m, new_v = {}, {}, {}
    for name, value in params.items():
        m = state.first_moment.get(name, np.zeros_like(value))
        v = state.second_moment.get(name, np.zeros_like(value))
        if m.shape != value.shape or v.shape != value.shape:
            raise ShapeError(f"accumulator shape mismatch for '{name}'")
        grad = grads.get(name)
        if grad is None:
            new_params[name], new_m[name], new_v[name] = value.copy(), m.copy(), v.copy()
            continue
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        new_params[name] = value - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[name], new_v[name] = m, v

    new_state = AdamState(
        learning_rate=state.learning_rate,
        beta1=state.beta1,
        beta2=state.beta2,
        eps=state.eps,
        step_count=t,
        first_moment=new_m,
        second_moment=new_v,
    )
    return new_params, new_state
