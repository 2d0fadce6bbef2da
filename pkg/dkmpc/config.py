"""
dkmpc Run Configuration

YAML run configuration validated by pydantic models; unknown keys are
rejected at every level. The settings build the numeric runtime objects
(TrainConfig, MpcConfig, ...) used by the pipeline.
"""

from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .exceptions import ConfigurationError, UsageError
from .koopman import LossWeights, TrainConfig
from .mpc import MpcConfig
from .plant import PlantConfig
from .tasks import TaskSettings


class _Settings(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CollectSettings(_Settings):
    n_episodes: int = Field(100, ge=0)
    steps_per_episode: int = Field(200, ge=1)
    hold_steps: int = Field(5, ge=1)
    workers: int = Field(1, ge=1)


class SplitSettings(_Settings):
    ratios: Tuple[float, float, float] = (0.8, 0.1, 0.1)


class LossWeightSettings(_Settings):
    recon: float = Field(1.0, ge=0)
    pred: float = Field(1.0, ge=0)
    linear: float = Field(1.0, ge=0)
    reg: float = Field(1e-6, ge=0)


class TrainSettings(_Settings):
    latent_dim: int = Field(12, ge=1)
    encoder_hidden: List[int] = Field(default_factory=lambda: [128, 256])
    decoder_hidden: List[int] = Field(default_factory=lambda: [128, 256])
    m: int = Field(5, ge=1)
    batch_size: int = Field(64, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    epochs: int = Field(200, ge=0)
    patience: Optional[int] = Field(20, ge=1)
    pred_sum_mode: bool = False
    log_every: int = Field(10, ge=1)
    loss_weights: LossWeightSettings = Field(default_factory=LossWeightSettings)

    def to_train_config(self, seed: int) -> TrainConfig:
        try:
            return TrainConfig(
                m=self.m,
                batch_size=self.batch_size,
                learning_rate=self.learning_rate,
                epochs=self.epochs,
                patience=self.patience,
                seed=seed,
                loss_weights=LossWeights(**self.loss_weights.model_dump()),
                pred_sum_mode=self.pred_sum_mode,
                log_every=self.log_every,
            )
        except ConfigurationError as exc:
            raise ConfigurationError(exc.message, field="train") from exc


class RbfSettings(_Settings):
    n_rbf: int = Field(100, ge=1)
    damping: float = Field(1e-8, gt=0)


class MpcSettings(_Settings):
    horizon: int = Field(10, ge=0)
    q: float = Field(10.0, ge=0, description="scale of the default latent weight")
    r: float = Field(0.1, ge=0)
    Q: Optional[List[List[float]]] = Field(None, description="full latent weight, overrides q")
    u_min: float = Field(0.0, description="raw lower pressure bound, kPa")
    u_max: float = Field(40.0, description="raw upper pressure bound, kPa")
    solver_tol: float = Field(1e-6, gt=0)
    solver_max_iters: int = Field(500, ge=1)

    def plant_range_problem(self, plant: PlantConfig) -> Optional[str]:
        """Why the bounds do not fit the plant pressure range, or None."""
        if self.u_min >= self.u_max:
            return "u_min must be strictly below u_max"
        if self.u_min < plant.pressure_min or self.u_max > plant.pressure_max:
            return (
                f"bounds [{self.u_min}, {self.u_max}] exceed the plant range "
                f"[{plant.pressure_min}, {plant.pressure_max}]"
            )
        return None

    def build(self, model, plant: Optional[PlantConfig] = None) -> MpcConfig:
        """
        MpcConfig for model: latent weight from the model family, bounds normalized with its stats.

        The bounds must lie inside the plant pressure range, which also caps the raw command.
        """
        plant = plant or PlantConfig()
        problem = self.plant_range_problem(plant)
        if problem:
            raise ConfigurationError(problem, field="mpc.u_min/u_max")
        if model.norm_stats is None:
            raise ConfigurationError("model carries no normalization stats", field="mpc")
        c = model.control_dim
        Q = np.asarray(self.Q, dtype=np.float64) if self.Q is not None else model.tracking_weight(self.q)
        if Q.shape != (model.latent_dim, model.latent_dim):
            raise ConfigurationError(f"Q has shape {Q.shape}, latent dim is {model.latent_dim}", field="mpc.Q")
        stats = model.norm_stats
        return MpcConfig(
            horizon=self.horizon,
            Q=Q,
            R=self.r * np.eye(c),
            u_min=stats.normalize_control(np.full(c, self.u_min)),
            u_max=stats.normalize_control(np.full(c, self.u_max)),
            solver_tol=self.solver_tol,
            solver_max_iters=self.solver_max_iters,
            command_min=plant.pressure_min,
            command_max=plant.pressure_max,
        )


class TrackingSettings(_Settings):
    settle_ticks: int = Field(20, ge=0)
    workers: int = Field(1, ge=1)


class RunConfig(_Settings):
    """Complete pipeline configuration."""
    seed: int = 42
    run_id: str = "default"
    output_dir: str = "out"
    plant: PlantConfig = Field(default_factory=PlantConfig)
    collect: CollectSettings = Field(default_factory=CollectSettings)
    split: SplitSettings = Field(default_factory=SplitSettings)
    train: TrainSettings = Field(default_factory=TrainSettings)
    rbf: RbfSettings = Field(default_factory=RbfSettings)
    mpc: MpcSettings = Field(default_factory=MpcSettings)
    tasks: TaskSettings = Field(default_factory=TaskSettings)
    tracking: TrackingSettings = Field(default_factory=TrackingSettings)

    @field_validator("run_id")
    @classmethod
    def _plain_run_id(cls, value: str) -> str:
        if not value or "/" in value or "\\" in value or value in (".", ".."):
            raise ValueError("run_id must be a plain directory name")
        return value

    @model_validator(mode="after")
    def _mpc_within_plant(self) -> "RunConfig":
        problem = self.mpc.plant_range_problem(self.plant)
        if problem:
            raise ValueError(f"mpc: {problem}")
        return self

    @property
    def run_dir(self) -> Path:
        return Path(self.output_dir) / self.run_id

    def with_seed(self, seed: Optional[int]) -> "RunConfig":
        return self if seed is None else self.model_copy(update={"seed": seed})

    def plant_config(self) -> PlantConfig:
        """Plant settings with the noise generator seeded from the run seed."""
        return self.plant.model_copy(update={"seed": self.seed})


def _format_errors(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        where = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{where}: {err['msg']}")
    return "; ".join(parts)


def parse_config(data: Optional[dict]) -> RunConfig:
    """Validate a parsed YAML mapping."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"top level must be a mapping, got {type(data).__name__}")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(_format_errors(exc)) from exc


def load_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """Load and validate a YAML run configuration; None gives the defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}", field="--config")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"invalid YAML in {path}: {exc}") from exc
    return parse_config(data)


DEFAULT_CONFIG_YAML = """\
# koopctl run configuration. Every key is optional; unknown keys are rejected.
# Units: lengths mm, pressures kPa, times s.

seed: 42                     # global seed for collection, splitting, training and tracking
run_id: default              # outputs go to <output_dir>/<run_id>/
output_dir: out

plant:                       # simulated three-segment soft arm
  segment_lengths: [170.0, 150.0, 130.0]
  curvature_gains: [1.1e-4, 1.4e-4, 1.8e-4]   # rad/(mm kPa), base to tip
  tau: 0.25                  # pressure lag time constant
  dt: 0.05                   # control tick
  softening: 0.08            # curvature softening beta
  noise_sigma: 0.0           # tip observation noise per axis; 0.2 emulates camera jitter
  pressure_min: 0.0
  pressure_max: 40.0
  seed: 0                    # replaced by the run seed when tracking

collect:                     # random-actuation dataset
  n_episodes: 100
  steps_per_episode: 200
  hold_steps: 5              # ticks each random command is held
  workers: 1                 # episodes collected in parallel; output is identical

split:
  ratios: [0.8, 0.1, 0.1]    # train / val / test, by episode

train:                       # deep Koopman model
  latent_dim: 12
  encoder_hidden: [128, 256]
  decoder_hidden: [128, 256]
  m: 5                       # prediction-loss horizon
  batch_size: 64
  learning_rate: 0.001
  epochs: 200
  patience: 20               # early stop after this many epochs without validation gain; null disables
  pred_sum_mode: false       # sum the prediction loss over horizons 1..m
  log_every: 10
  loss_weights:
    recon: 1.0
    pred: 1.0
    linear: 1.0
    reg: 1.0e-6

rbf:                         # K-MPC baseline
  n_rbf: 100                 # Gaussian centers, uniform over the normalized training box
  damping: 1.0e-8            # Tikhonov damping of the normal equations

mpc:
  horizon: 10
  q: 10.0                    # latent weight scale (state coordinates only for K-MPC)
  r: 0.1                     # input weight scale
  Q: null                    # optional full latent weight matrix
  u_min: 0.0                 # raw pressure bounds
  u_max: 40.0
  solver_tol: 1.0e-6
  solver_max_iters: 500

tasks:
  circle:
    center: [0.0, 0.0, 420.0]
    radius: 60.0
    duration: 10.0           # seconds per revolution
  letters:
    center: [0.0, 0.0, 420.0]
    size: 100.0              # letters fill a size x size window
    speed: 20.0              # mm/s
    corner_dwell: 3          # ticks held at each corner
  square:
    center: [0.0, 0.0, 420.0]
    half_side: 40.0
    dwell_ticks: 60          # ticks each target is held
  workspace_tol_mm: 1.0      # static reachability tolerance

tracking:
  settle_ticks: 20           # lead-in holding the first reference point, excluded from errors
  workers: 1                 # tasks tracked in parallel; output is identical
"""


def write_default_config(path: Union[str, Path], force: bool = False) -> Path:
    path = Path(path)
    if path.exists() and not force:
        raise UsageError(f"refusing to overwrite existing file {path} (use --force)")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(DEFAULT_CONFIG_YAML)
    return path
