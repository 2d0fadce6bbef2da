"""
dkmpc Tracking Tasks

Reference paths for the circle "O", the letters "T", "H", "U" and the
moving-target square, sampled at the plant tick and checked against the arm's
static workspace.

Letters are polylines over unit-square vertices, scaled into a size x size mm
window centred on the task centre, with x to the right and y up:

    T  (0,1) -> (1,1) -> (0.5,1) -> (0.5,0)
    H  (0,1) -> (0,0) -> (0,0.5) -> (1,0.5) -> (1,1) -> (1,0)
    U  (0,1) -> (0,0) -> (1,0) -> (1,1)
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .exceptions import ArgumentError, WorkspaceError
from .plant import PlantConfig, solve_static_pressures
from .utils import get_logger

logger = get_logger(__name__)

LETTER_VERTICES: Dict[str, Tuple[Tuple[float, float], ...]] = {
    "T": ((0.0, 1.0), (1.0, 1.0), (0.5, 1.0), (0.5, 0.0)),
    "H": ((0.0, 1.0), (0.0, 0.0), (0.0, 0.5), (1.0, 0.5), (1.0, 1.0), (1.0, 0.0)),
    "U": ((0.0, 1.0), (0.0, 0.0), (1.0, 0.0), (1.0, 1.0)),
}

# square corners as (sign x, sign y), visiting the first again at the end
SQUARE_CORNERS = ((1, 1), (-1, 1), (-1, -1), (1, -1), (1, 1))


class Task(str, Enum):
    """Tracking tasks"""
    O = "O"  # noqa: E741
    T = "T"
    H = "H"
    U = "U"
    SQUARE_TARGETS = "square"

    @classmethod
    def parse(cls, name: str) -> "Task":
        key = name.strip()
        if key.upper() in ("SQUARE", "SQUARE_TARGETS"):
            return cls.SQUARE_TARGETS
        try:
            return cls(key.upper())
        except ValueError:
            raise ArgumentError(f"unknown task '{name}', expected one of O, T, H, U, square") from None

    @property
    def label(self) -> str:
        return self.value


TRAJECTORY_TASKS = (Task.O, Task.T, Task.H, Task.U)


class CircleSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    center: Tuple[float, float, float] = (0.0, 0.0, 420.0)
    radius: float = Field(60.0, gt=0)
    duration: float = Field(10.0, gt=0, description="seconds for one revolution")


class LetterSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    center: Tuple[float, float, float] = (0.0, 0.0, 420.0)
    size: float = Field(100.0, gt=0, description="edge of the square window, mm")
    speed: float = Field(20.0, gt=0, description="traversal speed, mm/s")
    corner_dwell: int = Field(3, ge=0, description="ticks held at each interior vertex")


class SquareSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    center: Tuple[float, float, float] = (0.0, 0.0, 420.0)
    half_side: float = Field(40.0, gt=0)
    dwell_ticks: int = Field(60, ge=1, description="ticks each target is held")


class TaskSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    circle: CircleSettings = Field(default_factory=CircleSettings)
    letters: LetterSettings = Field(default_factory=LetterSettings)
    square: SquareSettings = Field(default_factory=SquareSettings)
    workspace_tol_mm: float = Field(1.0, gt=0)


@dataclass
class ReferencePath:
    """
    Reference tip positions at the plant tick.

    The first settle_ticks samples hold the starting point; dwell_ends lists
    the final tick of each target dwell (moving-target task only).
    """
    task: Task
    points: np.ndarray
    dt: float
    settle_ticks: int = 0
    dwell_ends: List[int] = field(default_factory=list)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(len(self))

    def to_dict(self):
        return {
            "task": self.task.value,
            "dt": self.dt,
            "settle_ticks": self.settle_ticks,
            "dwell_ends": list(self.dwell_ends),
            "points": self.points,
        }


def circle_points(settings: CircleSettings, dt: float) -> np.ndarray:
    """Closed circle at constant angular rate; first and last samples coincide."""
    n = max(int(round(settings.duration / dt)), 3)
    theta = 2.0 * np.pi * np.arange(n + 1) / n
    cx, cy, cz = settings.center
    return np.column_stack([
        cx + settings.radius * np.cos(theta),
        cy + settings.radius * np.sin(theta),
        np.full(n + 1, cz),
    ])


def letter_points(letter: str, settings: LetterSettings, dt: float) -> np.ndarray:
    """Letter polyline at constant speed with a dwell at every interior vertex."""
    cx, cy, cz = settings.center
    unit = np.asarray(LETTER_VERTICES[letter])
    vertices = np.column_stack([
        cx + (unit[:, 0] - 0.5) * settings.size,
        cy + (unit[:, 1] - 0.5) * settings.size,
        np.full(len(unit), cz),
    ])
    step = settings.speed * dt
    samples = [vertices[0]]
    for i in range(1, len(vertices)):
        start, end = vertices[i - 1], vertices[i]
        if i > 1:
            samples.extend([start] * settings.corner_dwell)
        n = max(int(round(np.linalg.norm(end - start) / step)), 1)
        for k in range(1, n + 1):
            samples.append(start + (end - start) * (k / n))
    return np.asarray(samples)


def square_points(settings: SquareSettings) -> Tuple[np.ndarray, List[int]]:
    """Piecewise-constant targets on a square; returns points and dwell end indices."""
    cx, cy, cz = settings.center
    points, ends = [], []
    for sx, sy in SQUARE_CORNERS:
        target = np.array([cx + sx * settings.half_side, cy + sy * settings.half_side, cz])
        points.extend([target] * settings.dwell_ticks)
        ends.append(len(points) - 1)
    return np.asarray(points), ends


def check_workspace(
    points: np.ndarray,
    plant_config: PlantConfig,
    tol_mm: float = 1.0,
    restarts: int = 8,
) -> None:
    """
    Raise WorkspaceError for the first point that is outside the workspace
    sphere or has no steady-state pressures within tol_mm.

    Consecutive duplicates are checked once; each solve warm-starts from the
    previous point's pressures and falls back to seeded random restarts.
    """
    radius = plant_config.total_length
    rng = np.random.default_rng(0)
    previous: Optional[np.ndarray] = None
    last_point: Optional[np.ndarray] = None
    for point in np.asarray(points, dtype=np.float64):
        if last_point is not None and np.array_equal(point, last_point):
            continue
        last_point = point
        if np.linalg.norm(point) > radius:
            raise WorkspaceError(point, f"outside the {radius:.0f} mm workspace sphere")

        pressures, residual = solve_static_pressures(point, plant_config, previous)
        attempt = 0
        while residual > tol_mm and attempt < restarts:
            guess = rng.uniform(plant_config.pressure_min, plant_config.pressure_max, size=pressures.shape)
            candidate, candidate_residual = solve_static_pressures(point, plant_config, guess)
            if candidate_residual < residual:
                pressures, residual = candidate, candidate_residual
            attempt += 1
        if residual > tol_mm:
            raise WorkspaceError(point, f"static residual {residual:.2f} mm exceeds {tol_mm} mm")
        previous = pressures


def make_reference(
    task: Task,
    settings: Optional[TaskSettings] = None,
    plant_config: Optional[PlantConfig] = None,
    settle_ticks: int = 20,
    check: bool = True,
) -> ReferencePath:
    """
    Build the reference path for task at the plant tick.

    The path is prefixed with settle_ticks copies of its first point. Raises
    WorkspaceError naming the first unreachable point when check is set.
    """
    settings = settings or TaskSettings()
    plant_config = plant_config or PlantConfig()
    if settle_ticks < 0:
        raise ArgumentError(f"settle_ticks must be >= 0, got {settle_ticks}")
    task = Task.parse(task) if isinstance(task, str) and not isinstance(task, Task) else task
    dt = plant_config.dt

    dwell_ends: Sequence[int] = []
    if task is Task.O:
        points = circle_points(settings.circle, dt)
    elif task is Task.SQUARE_TARGETS:
        points, dwell_ends = square_points(settings.square)
    else:
        points = letter_points(task.value, settings.letters, dt)

    if settle_ticks:
        points = np.vstack([np.repeat(points[:1], settle_ticks, axis=0), points])
        dwell_ends = [i + settle_ticks for i in dwell_ends]
    if check:
        check_workspace(points, plant_config, settings.workspace_tol_mm)

    logger.debug(f"Reference {task.value}: {len(points)} samples")
    return ReferencePath(task, points, dt, settle_ticks, list(dwell_ends))
