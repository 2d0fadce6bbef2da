"""
dkmpc Metrics

Tracking error metrics, per-run reports and the controller comparison table.
The tracking error is the mean Euclidean tip deviation per tick, in mm.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import numpy as np

from .exceptions import ArgumentError
from .mpc import TrackingLog
from .tasks import Task
from .utils import dump_json, load_json

CONTROLLER_LABELS = {"dk": "DK-MPC", "rbf": "K-MPC"}
TASK_ORDER = [task.value for task in Task]


def avg_tracking_error(log: TrackingLog, start: int = 0) -> float:
    """Mean of ||x_t - r_t|| over ticks start.. of the log."""
    errors = log.errors()[start:]
    if errors.size == 0:
        raise ArgumentError("cannot average the tracking error of an empty log")
    return float(np.mean(errors))


@dataclass
class TrackingReport:
    """Error summary of one (controller, task) run after the settle lead-in."""
    task: str
    controller: str
    seed: int
    avg_error: float
    max_error: float
    terminal_error: float
    errors: List[float]
    settle_ticks: int = 0
    target_errors: Optional[List[float]] = None
    solver_misses: int = 0

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "task": self.task,
            "controller": self.controller,
            "seed": self.seed,
            "avg_error": self.avg_error,
            "max_error": self.max_error,
            "terminal_error": self.terminal_error,
            "errors": self.errors,
            "settle_ticks": self.settle_ticks,
            "solver_misses": self.solver_misses,
        }
        if self.target_errors is not None:
            data["target_errors"] = self.target_errors
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrackingReport":
        return cls(**data)

    def save(self, path: Union[str, Path]) -> Path:
        return dump_json(self.to_dict(), path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "TrackingReport":
        return cls.from_dict(load_json(path))


def make_report(
    log: TrackingLog,
    task: str,
    controller: str,
    seed: int,
    settle_ticks: int = 0,
    dwell_ends: Optional[Iterable[int]] = None,
) -> TrackingReport:
    """
    Summarise a tracking log; the error series starts after settle_ticks.

    With dwell_ends given, the error at each dwell's final tick is reported as
    that target's steady-state error.
    """
    all_errors = log.errors()
    errors = all_errors[settle_ticks:]
    if errors.size == 0:
        raise ArgumentError(f"log of {len(log)} ticks has nothing after {settle_ticks} settle ticks")
    target_errors = None
    if dwell_ends is not None:
        target_errors = [float(all_errors[i]) for i in dwell_ends]
    return TrackingReport(
        task=task,
        controller=controller,
        seed=seed,
        avg_error=avg_tracking_error(log, settle_ticks),
        max_error=float(np.max(errors)),
        terminal_error=float(errors[-1]),
        errors=errors.tolist(),
        settle_ticks=settle_ticks,
        target_errors=target_errors,
        solver_misses=int(np.count_nonzero(~log.converged)),
    )


@dataclass
class ComparisonTable:
    """One row per (controller, task)."""
    rows: List[Dict[str, Any]] = field(default_factory=list)

    @classmethod
    def from_reports(cls, reports: Iterable[TrackingReport]) -> "ComparisonTable":
        rows = [
            {
                "controller": CONTROLLER_LABELS.get(r.controller, r.controller),
                "task": r.task,
                "avg_error": r.avg_error,
                "max_error": r.max_error,
                "terminal_error": r.terminal_error,
            }
            for r in reports
        ]
        task_rank = {name: i for i, name in enumerate(TASK_ORDER)}
        rows.sort(key=lambda row: (row["controller"], task_rank.get(row["task"], len(TASK_ORDER)), row["task"]))
        return cls(rows)

    def to_dict(self) -> Dict[str, Any]:
        return {"units": "mm", "rows": self.rows}

    def to_text(self) -> str:
        """Aligned text table with an Avg. Err. column."""
        header = ["Controller", "Task", "Avg. Err.", "Max Err.", "Final Err."]
        body = [
            [
                row["controller"],
                row["task"],
                f"{row['avg_error']:.2f}",
                f"{row['max_error']:.2f}",
                f"{row['terminal_error']:.2f}",
            ]
            for row in self.rows
        ]
        widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]

        def fmt(cells):
            left = [cells[0].ljust(widths[0]), cells[1].ljust(widths[1])]
            right = [c.rjust(w) for c, w in zip(cells[2:], widths[2:])]
            return "  ".join(left + right).rstrip()

        rule = "-" * len(fmt(header))
        lines = ["Tracking error (mm)", rule, fmt(header), rule] + [fmt(r) for r in body] + [rule]
        return "\n".join(lines) + "\n"
