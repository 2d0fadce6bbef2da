"""
dkmpc Gradient Check

Central finite-difference verification of analytic gradients.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from ..utils import get_logger

logger = get_logger(__name__)

LossFn = Callable[[], Tuple[float, Dict[str, np.ndarray]]]


@dataclass
class GradCheckReport:
    """Outcome of a finite-difference check."""
    max_rel_error: float
    passed: bool
    tolerance: float
    per_parameter: Dict[str, float] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)

    def to_dict(self):
        return {
            "max_rel_error": self.max_rel_error,
            "pass": self.passed,
            "tolerance": self.tolerance,
            "per_parameter": self.per_parameter,
            "failures": self.failures,
        }


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """||a - n|| / max(||a|| + ||n||, floor)"""
    diff = np.linalg.norm(analytic - numeric)
    scale = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), floor)
    return float(diff / scale)


def finite_diff_check(
    parameters: Dict[str, np.ndarray],
    loss_fn: LossFn,
    tolerance: float = 1e-4,
    step: float = 1e-5,
    sample_per_param: Optional[int] = None,
    seed: int = 0,
) -> GradCheckReport:
    """
    Compare analytic gradients with central differences.

    parameters are the live arrays the loss reads (perturbed in place and
    restored); loss_fn() returns (loss, analytic gradients by name). With
    sample_per_param set, a seeded subset of entries is checked per tensor.
    """
    _, analytic = loss_fn()
    analytic = {k: np.array(v, dtype=np.float64, copy=True) for k, v in analytic.items()}
    rng = np.random.default_rng(seed)

    per_parameter: Dict[str, float] = {}
    failures: List[str] = []
    for name, param in parameters.items():
        flat = param.reshape(-1)
        if sample_per_param is None or sample_per_param >= flat.size:
            indices = np.arange(flat.size)
        else:
            indices = np.sort(rng.choice(flat.size, size=sample_per_param, replace=False))

        numeric = np.empty(indices.size)
        for j, idx in enumerate(indices):
            original = flat[idx]
            flat[idx] = original + step
            plus, _ = loss_fn()
            flat[idx] = original - step
            minus, _ = loss_fn()
            flat[idx] = original
            numeric[j] = (plus - minus) / (2.0 * step)

        err = relative_error(analytic[name].reshape(-1)[indices], numeric)
        per_parameter[name] = err
        if not err < tolerance:
            failures.append(name)

    max_err = max(per_parameter.values()) if per_parameter else 0.0
    report = GradCheckReport(max_err, not failures, tolerance, per_parameter, failures)
    if failures:
        logger.warning(f"Gradient check failed for {failures} (max rel error {max_err:.3e})")
    return report
