"""
dkmpc Exceptions

Custom exception classes for the learning, control and simulation pipeline.
"""

from typing import Optional, Any, Dict, Sequence


class DkmpcError(Exception):
    """
    Base exception for all pipeline errors.

    Carries a human-readable message and an optional details mapping holding
    the context fields of the subclass.
    """

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.details = details or {}
        super().__init__(message)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(message='{self.message}')"


class ShapeError(DkmpcError):
    """
    Exception raised when array dimensions do not line up.
    """

    def __init__(self, message: str, layer_index: Optional[int] = None):
        self.layer_index = layer_index
        if layer_index is not None:
            message = f"layer {layer_index}: {message}"
        super().__init__(message, {"layer_index": layer_index})


class ForwardCacheError(DkmpcError):
    """
    Exception raised when a backward pass has no matching forward cache.
    """

    def __init__(self, message: str = "backward pass requires a forward cache from the same network"):
        super().__init__(message)


class NumericError(DkmpcError):
    """
    Exception raised when a non-finite value shows up.
    """

    def __init__(self, message: str, parameter: Optional[str] = None):
        self.parameter = parameter
        if parameter is not None:
            message = f"{message} (parameter '{parameter}')"
        super().__init__(message, {"parameter": parameter})


class NonConvexQpError(NumericError):
    """
    Exception raised when the QP Hessian shows negative curvature.
    """

    def __init__(self, curvature: float):
        self.curvature = curvature
        super().__init__(f"negative curvature {curvature:.3e} along a solver step; Hessian is not PSD")


class TrainingDivergedError(NumericError):
    """
    Exception raised when the training loss becomes non-finite.
    """

    def __init__(self, epoch: int, batch: int, value: float):
        self.epoch = epoch
        self.batch = batch
        self.value = value
        super().__init__(f"non-finite loss {value} at epoch {epoch}, batch {batch}")


class ArgumentError(DkmpcError):
    """
    Exception raised when an operation is called with invalid arguments.
    """


class UsageError(DkmpcError):
    """
    Exception raised when command-line input is invalid.
    """


class ConfigurationError(DkmpcError):
    """
    Exception raised when there's a configuration error.
    """

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        prefix = f"{field}: " if field else ""
        super().__init__(f"Configuration error: {prefix}{message}", {"field": field})


class DegenerateFeatureError(DkmpcError):
    """
    Exception raised when a feature has zero range in the training split.
    """

    def __init__(self, feature_index: int, feature_name: str, value: float):
        self.feature_index = feature_index
        self.feature_name = feature_name
        super().__init__(
            f"feature {feature_index} ({feature_name}) is constant at {value!r}; min == max",
            {"feature_index": feature_index},
        )


class DatasetFormatError(DkmpcError):
    """
    Exception raised when a dataset file cannot be parsed.
    """

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"Dataset format error: {where}{message}", {"line": line, "path": path})


class CheckpointError(DkmpcError):
    """
    Base exception for checkpoint loading failures.
    """

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        super().__init__(f"Checkpoint error: {message}", {"path": path})


class CheckpointVersionError(CheckpointError):
    """
    Exception raised when a checkpoint has an unknown magic or format version.
    """


class TruncatedCheckpointError(CheckpointError):
    """
    Exception raised when a checkpoint ends before its declared payload.
    """


class DimensionMismatchError(CheckpointError):
    """
    Exception raised when checkpoint dimensions are inconsistent.
    """


class EdmdFitError(DkmpcError):
    """
    Exception raised when the EDMD normal equations cannot be solved.
    """


class WorkspaceError(DkmpcError):
    """
    Exception raised when a reference point lies outside the arm's workspace.
    """

    def __init__(self, point: Sequence[float], reason: str):
        self.point = tuple(float(v) for v in point)
        formatted = ", ".join(f"{v:.3f}" for v in self.point)
        super().__init__(f"point ({formatted}) is unreachable: {reason}", {"point": self.point})


class PlantError(DkmpcError):
    """
    Exception raised when a plant step fails.
    """

    def __init__(self, message: str, episode: Optional[int] = None, step: Optional[int] = None):
        self.episode = episode
        self.step = step
        where = []
        if episode is not None:
            where.append(f"episode {episode}")
        if step is not None:
            where.append(f"step {step}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"Plant error: {prefix}{message}", {"episode": episode, "step": step})


class ArtifactNotFoundError(DkmpcError):
    """
    Exception raised when an upstream pipeline artifact is missing.
    """

    def __init__(self, path: str, hint: Optional[str] = None):
        self.path = path
        message = f"required file not found: {path}"
        if hint:
            message = f"{message} ({hint})"
        super().__init__(message, {"path": path})
