"""
dkmpc Dataset

Episode-structured transition corpus, episode-level splitting, m-step window
extraction and the CSV exchange format:

    episode,step,x0,x1,x2,u0,...,u8,xn0,xn1,xn2

One row per transition tuple (x_k, u_k, x_{k+1}); floats carry 17 significant
digits so a save/load round-trip is value-exact.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import ArgumentError, DatasetFormatError, ShapeError
from ..utils import get_logger

logger = get_logger(__name__)

SPLITS = ("train", "val", "test")
DEFAULT_RATIOS = (0.8, 0.1, 0.1)


@dataclass(frozen=True)
class TransitionTuple:
    """One sample (x_k, u_k, x_{k+1}) in raw units."""
    x_k: np.ndarray
    u_k: np.ndarray
    x_next: np.ndarray
    episode_id: int
    step_index: int


@dataclass
class Episode:
    """
    A contiguous run of transitions.

    states holds x_0..x_T (T+1 rows), controls holds u_0..u_{T-1}; tuple t is
    (states[t], controls[t], states[t+1]), so chaining holds by construction.
    """
    episode_id: int
    states: np.ndarray
    controls: np.ndarray
    split: Optional[str] = None

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.float64)
        self.controls = np.asarray(self.controls, dtype=np.float64)
        if self.states.ndim != 2 or self.controls.ndim != 2:
            raise ShapeError("episode states and controls must be 2-D")
        if self.states.shape[0] != self.controls.shape[0] + 1:
            raise ShapeError(
                f"episode {self.episode_id}: {self.states.shape[0]} states for "
                f"{self.controls.shape[0]} controls (need one more state)"
            )

    @property
    def length(self) -> int:
        return self.controls.shape[0]

    def tuples(self) -> Iterator[TransitionTuple]:
        for t in range(self.length):
            yield TransitionTuple(self.states[t], self.controls[t], self.states[t + 1], self.episode_id, t)


@dataclass
class WindowBatch:
    """
    Length-(m+1) windows: states (N, m+1, d), controls (N, m, c).
    """
    states: np.ndarray
    controls: np.ndarray

    def __post_init__(self):
        if self.states.ndim != 3 or self.controls.ndim != 3:
            raise ShapeError("window states/controls must be 3-D")
        if self.states.shape[0] != self.controls.shape[0]:
            raise ShapeError("window count mismatch between states and controls")
        if self.states.shape[1] != self.controls.shape[1] + 1:
            raise ArgumentError(
                f"windows need m+1 states for m controls, got {self.states.shape[1]} and {self.controls.shape[1]}"
            )

    @property
    def horizon(self) -> int:
        return self.controls.shape[1]

    def __len__(self) -> int:
        return self.states.shape[0]

    def take(self, indices: np.ndarray) -> "WindowBatch":
        return WindowBatch(self.states[indices], self.controls[indices])

    @classmethod
    def empty(cls, m: int, state_dim: int, control_dim: int) -> "WindowBatch":
        return cls(np.zeros((0, m + 1, state_dim)), np.zeros((0, m, control_dim)))


@dataclass
class EpisodeDataset:
    """Ordered episodes with optional split tags."""
    episodes: List[Episode] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.episodes)

    @property
    def n_tuples(self) -> int:
        return sum(ep.length for ep in self.episodes)

    @property
    def state_dim(self) -> int:
        return self.episodes[0].states.shape[1] if self.episodes else 0

    @property
    def control_dim(self) -> int:
        return self.episodes[0].controls.shape[1] if self.episodes else 0

    def tuples(self) -> Iterator[TransitionTuple]:
        for ep in self.episodes:
            yield from ep.tuples()

    def split(self, name: str) -> List[Episode]:
        if name not in SPLITS:
            raise ArgumentError(f"unknown split '{name}', expected one of {SPLITS}")
        return [ep for ep in self.episodes if ep.split == name]

    def split_counts(self) -> Dict[str, int]:
        return {name: len(self.split(name)) for name in SPLITS}

    def transitions(self, name: Optional[str] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Stacked (X, U, X_next) over one split, or all episodes."""
        episodes = self.episodes if name is None else self.split(name)
        episodes = [ep for ep in episodes if ep.length > 0]
        if not episodes:
            d, c = self.state_dim, self.control_dim
            return np.zeros((0, d)), np.zeros((0, c)), np.zeros((0, d))
        x = np.concatenate([ep.states[:-1] for ep in episodes])
        u = np.concatenate([ep.controls for ep in episodes])
        xn = np.concatenate([ep.states[1:] for ep in episodes])
        return x, u, xn


def split_dataset(
    dataset: EpisodeDataset,
    ratios: Sequence[float] = DEFAULT_RATIOS,
    seed: int = 0,
) -> EpisodeDataset:
    """
    Tag episodes train/val/test by seeded shuffle and largest-remainder counts.

    Splitting is per episode so m-step windows never leak across splits.
    """
    ratios = np.asarray(ratios, dtype=np.float64)
    if ratios.shape != (len(SPLITS),) or np.any(ratios <= 0) or abs(ratios.sum() - 1.0) > 1e-9:
        raise ArgumentError(f"split ratios must be {len(SPLITS)} positive values summing to 1, got {ratios.tolist()}")
    n = len(dataset)
    if n < len(SPLITS):
        raise ArgumentError(f"need at least {len(SPLITS)} episodes to split, got {n}")

    exact = ratios * n
    counts = np.floor(exact).astype(int)
    remainder = n - counts.sum()
    # stable order: largest fractional part first, ties by split order
    order = sorted(range(len(SPLITS)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[:remainder]:
        counts[i] += 1

    rng = np.random.default_rng(seed)
    permutation = rng.permutation(n)
    tags = np.empty(n, dtype=object)
    start = 0
    for name, count in zip(SPLITS, counts):
        tags[permutation[start:start + count]] = name
        start += count

    episodes = [Episode(ep.episode_id, ep.states, ep.controls, tags[i]) for i, ep in enumerate(dataset.episodes)]
    logger.info(f"Split {n} episodes into {dict(zip(SPLITS, counts.tolist()))}")
    return EpisodeDataset(episodes)


def extract_windows(
    episodes: Sequence[Episode],
    m: int,
    stats=None,
) -> WindowBatch:
    """
    Stride-1 windows of m controls and m+1 states, never crossing episodes.

    With stats given, states and controls are normalized.
    """
    if m < 1:
        raise ArgumentError(f"window horizon m must be >= 1, got {m}")
    state_blocks, control_blocks = [], []
    d = c = None
    for ep in episodes:
        d, c = ep.states.shape[1], ep.controls.shape[1]
        if ep.length < m:
            continue
        states, controls = ep.states, ep.controls
        if stats is not None:
            states = stats.normalize_state(states)
            controls = stats.normalize_control(controls)
        # (T-m+1, d, m+1) -> (T-m+1, m+1, d)
        sw = sliding_window_view(states, m + 1, axis=0)[: ep.length - m + 1]
        cw = sliding_window_view(controls, m, axis=0)[: ep.length - m + 1]
        state_blocks.append(np.ascontiguousarray(np.swapaxes(sw, 1, 2)))
        control_blocks.append(np.ascontiguousarray(np.swapaxes(cw, 1, 2)))
    if not state_blocks:
        return WindowBatch.empty(m, d or 0, c or 0)
    return WindowBatch(np.concatenate(state_blocks), np.concatenate(control_blocks))


def _header(state_dim: int, control_dim: int) -> List[str]:
    return (
        ["episode", "step"]
        + [f"x{i}" for i in range(state_dim)]
        + [f"u{i}" for i in range(control_dim)]
        + [f"xn{i}" for i in range(state_dim)]
    )


def _fmt(value: float) -> str:
    return "%.17g" % value


def save_csv(dataset: EpisodeDataset, path: Union[str, Path]) -> Path:
    """
    Write one row per transition tuple.

    The format carries neither empty episodes nor split tags, so both are
    rejected rather than dropped; split after loading with split_dataset.
    """
    for ep in dataset.episodes:
        if ep.length == 0:
            raise ArgumentError(f"episode {ep.episode_id} has no transitions and cannot be written")
        if ep.split is not None:
            raise ArgumentError(f"episode {ep.episode_id} carries split tag '{ep.split}', which the CSV format does not store")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    d = dataset.state_dim or 3
    c = dataset.control_dim or 9
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(_header(d, c))
        for ep in dataset.episodes:
            for t in range(ep.length):
                writer.writerow(
                    [str(ep.episode_id), str(t)]
                    + [_fmt(v) for v in ep.states[t]]
                    + [_fmt(v) for v in ep.controls[t]]
                    + [_fmt(v) for v in ep.states[t + 1]]
                )
    logger.info(f"Wrote {dataset.n_tuples} tuples in {len(dataset)} episodes to {path}")
    return path


def load_csv(
    path: Union[str, Path],
    state_dim: int = 3,
    control_dim: int = 9,
) -> EpisodeDataset:
    """
    Read a dataset written by save_csv.

    Raises DatasetFormatError for a header mismatch, a malformed row (with its
    line number), non-contiguous steps or a chaining violation.
    """
    path = Path(path)
    expected = _header(state_dim, control_dim)
    width = len(expected)
    episodes: List[Episode] = []

    current_id: Optional[int] = None
    states: List[np.ndarray] = []
    controls: List[np.ndarray] = []

    def flush():
        if current_id is not None:
            episodes.append(Episode(current_id, np.array(states), np.array(controls)))

    with path.open(newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != expected:
            raise DatasetFormatError(f"header mismatch: expected {expected}, got {header}", line=1, path=str(path))
        for line_no, row in enumerate(reader, start=2):
            if len(row) != width:
                raise DatasetFormatError(f"expected {width} fields, got {len(row)}", line=line_no, path=str(path))
            try:
                episode_id, step = int(row[0]), int(row[1])
                values = np.array([float(v) for v in row[2:]])
            except ValueError as exc:
                raise DatasetFormatError(str(exc), line=line_no, path=str(path)) from exc
            x = values[:state_dim]
            u = values[state_dim:state_dim + control_dim]
            xn = values[state_dim + control_dim:]

            if episode_id != current_id:
                flush()
                if step != 0:
                    raise DatasetFormatError(f"episode {episode_id} starts at step {step}", line=line_no, path=str(path))
                current_id, states, controls = episode_id, [x], []
            else:
                if step != len(controls):
                    raise DatasetFormatError(
                        f"episode {episode_id}: expected step {len(controls)}, got {step}", line=line_no, path=str(path)
                    )
                if not np.array_equal(states[-1], x):
                    raise DatasetFormatError(
                        f"episode {episode_id}: x_k does not chain with previous x_next", line=line_no, path=str(path)
                    )
            controls.append(u)
            states.append(xn)
        flush()

    return EpisodeDataset(episodes)
