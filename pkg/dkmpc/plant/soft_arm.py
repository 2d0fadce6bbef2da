"""
dkmpc Soft Arm Simulator

Deterministic surrogate of a three-segment pneumatic soft arm: nine chamber
pressures with first-order lag, PCC kinematics with saturating curvature
softening, observed through the 3-D tip position (mm).
"""

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.optimize import least_squares

from ..exceptions import NumericError, ShapeError
from ..utils import get_logger
from .base import Plant
from .kinematics import arm_curvatures, pcc_forward_kinematics

logger = get_logger(__name__)

N_SEGMENTS = 3
N_CHAMBERS = 9


class PlantConfig(BaseModel):
    """Soft arm constants; all lengths in mm, pressures in kPa, times in s."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    segment_lengths: Tuple[float, float, float] = (170.0, 150.0, 130.0)
    curvature_gains: Tuple[float, float, float] = (1.1e-4, 1.4e-4, 1.8e-4)
    tau: float = Field(0.25, description="pressure lag time constant")
    dt: float = Field(0.05, description="control tick")
    softening: float = Field(0.08, ge=0.0, description="curvature softening beta")
    noise_sigma: float = Field(0.0, ge=0.0, description="observation noise per axis")
    pressure_min: float = 0.0
    pressure_max: float = 40.0
    seed: int = 0

    @field_validator("segment_lengths", "curvature_gains")
    @classmethod
    def _positive(cls, value):
        if any(v <= 0 for v in value):
            raise ValueError("all values must be strictly positive")
        return value

    @model_validator(mode="after")
    def _check_timing(self):
        if self.tau <= 0 or self.dt <= 0:
            raise ValueError("tau and dt must be strictly positive")
        if self.dt > self.tau:
            raise ValueError("dt must not exceed tau (lag update must stay convex)")
        if self.pressure_max <= self.pressure_min:
            raise ValueError("pressure_max must exceed pressure_min")
        return self

    @property
    def total_length(self) -> float:
        return float(sum(self.segment_lengths))

    @property
    def lag_factor(self) -> float:
        return self.dt / self.tau


@dataclass
class PlantState:
    """Lagged chamber pressures, tick counter, noise generator and last observation."""
    q: np.ndarray
    tick_count: int
    rng: np.random.Generator
    observation: np.ndarray


def static_tip(pressures: np.ndarray, config: PlantConfig) -> np.ndarray:
    """Noiseless tip position for chamber pressures q."""
    curvatures = arm_curvatures(pressures, config.curvature_gains, config.segment_lengths, config.softening)
    return pcc_forward_kinematics(curvatures, config.segment_lengths)


def _observe(q: np.ndarray, config: PlantConfig, rng: np.random.Generator) -> np.ndarray:
    tip = static_tip(q, config)
    if config.noise_sigma > 0:
        tip = tip + rng.normal(0.0, config.noise_sigma, size=3)
    return tip


def reset(config: PlantConfig) -> PlantState:
    """Zero pressures, tick 0, generator seeded from the config."""
    rng = np.random.default_rng(config.seed)
    q = np.zeros(N_CHAMBERS)
    return PlantState(q, 0, rng, _observe(q, config, rng))


def plant_step(state: PlantState, u: np.ndarray, config: PlantConfig) -> Tuple[PlantState, np.ndarray]:
    """
    Advance one tick: q <- q + (dt/tau)(u - q), then observe.

    u is clamped to the pressure bounds; the state's generator is advanced in
    place.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (N_CHAMBERS,):
        raise ShapeError(f"command must have shape ({N_CHAMBERS},), got {u.shape}")
    if not np.all(np.isfinite(u)):
        raise NumericError("non-finite pressure command", parameter="u")
    u = np.clip(u, config.pressure_min, config.pressure_max)
    q = state.q + config.lag_factor * (u - state.q)
    observation = _observe(q, config, state.rng)
    return replace(state, q=q, tick_count=state.tick_count + 1, observation=observation), observation


def solve_static_pressures(
    target: np.ndarray,
    config: PlantConfig,
    initial: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, float]:
    """
    Steady-state pressures whose tip is closest to target.

    Returns (pressures, residual_mm) from a bounded least-squares solve.
    """
    target = np.asarray(target, dtype=np.float64)
    lo, hi = config.pressure_min, config.pressure_max
    if initial is None:
        initial = np.full(N_CHAMBERS, 0.5 * (lo + hi))
    result = least_squares(
        lambda q: static_tip(q, config) - target,
        np.clip(initial, lo, hi),
        bounds=(lo, hi),
        xtol=1e-10,
        ftol=1e-10,
    )
    return result.x, float(np.linalg.norm(result.fun))


class SoftArmPlant(Plant):
    """
    Stateful wrapper around reset/plant_step.
    """

    def __init__(self, config: Optional[PlantConfig] = None):
        self.config = config or PlantConfig()
        self.state = reset(self.config)

    @property
    def state_dim(self) -> int:
        return 3

    @property
    def control_dim(self) -> int:
        return N_CHAMBERS

    @property
    def control_bounds(self):
        return (np.full(N_CHAMBERS, self.config.pressure_min), np.full(N_CHAMBERS, self.config.pressure_max))

    def reset(self) -> np.ndarray:
        self.state = reset(self.config)
        return self.state.observation.copy()

    def observe(self) -> np.ndarray:
        return self.state.observation.copy()

    def step(self, u: np.ndarray) -> np.ndarray:
        self.state, observation = plant_step(self.state, u, self.config)
        return observation.copy()
