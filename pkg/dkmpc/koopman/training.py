"""
dkmpc Training

End-to-end Adam training of the deep Koopman model on stride-1 m-step windows,
with per-epoch loss history, validation-based early stopping and a
best-validation restore. Fully deterministic under a fixed seed.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from ..data.dataset import EpisodeDataset, WindowBatch, extract_windows
from ..data.normalization import fit_stats
from ..exceptions import ArgumentError, ConfigurationError, TrainingDivergedError
from ..nn import AdamState, adam_step
from ..utils import get_logger
from .deep import KoopmanModel, LossWeights, loss_and_gradients, loss_components

logger = get_logger(__name__)


@dataclass
class TrainConfig:
    """Optimisation settings for the deep family."""
    m: int = 5
    batch_size: int = 64
    learning_rate: float = 1e-3
    epochs: int = 200
    patience: Optional[int] = 20
    seed: int = 0
    loss_weights: LossWeights = field(default_factory=LossWeights)
    pred_sum_mode: bool = False
    log_every: int = 10

    def __post_init__(self):
        if self.m < 1:
            raise ConfigurationError(f"must be >= 1, got {self.m}", field="m")
        if self.batch_size < 1:
            raise ConfigurationError(f"must be >= 1, got {self.batch_size}", field="batch_size")
        if self.learning_rate <= 0:
            raise ConfigurationError("must be positive", field="learning_rate")
        if self.epochs < 0:
            raise ConfigurationError("must be non-negative", field="epochs")
        if self.patience is not None and self.patience < 1:
            raise ConfigurationError("must be >= 1 or null", field="patience")
        if self.log_every < 1:
            raise ConfigurationError("must be >= 1", field="log_every")
        w = self.loss_weights
        if w.recon == 0 and w.pred == 0 and w.linear == 0:
            raise ConfigurationError("at least one of recon/pred/linear must be positive", field="loss_weights")


@dataclass
class EpochRecord:
    """Batch-weighted mean training losses and validation total of one epoch."""
    epoch: int
    recon: float
    linear: float
    pred: float
    reg: float
    total: float
    val_total: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epoch": self.epoch,
            "recon": self.recon,
            "linear": self.linear,
            "pred": self.pred,
            "reg": self.reg,
            "total": self.total,
            "val_total": self.val_total,
        }


@dataclass
class TrainingHistory:
    """Per-epoch records plus stopping information."""
    records: List[EpochRecord] = field(default_factory=list)
    best_epoch: Optional[int] = None
    stopped_early: bool = False

    def __len__(self) -> int:
        return len(self.records)

    @property
    def totals(self) -> np.ndarray:
        return np.array([r.total for r in self.records])

    def save_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["epoch", "recon", "linear", "pred", "reg", "total", "val_total"])
            for r in self.records:
                val = "" if r.val_total is None else "%.17g" % r.val_total
                writer.writerow(
                    [str(r.epoch)] + ["%.17g" % v for v in (r.recon, r.linear, r.pred, r.reg, r.total)] + [val]
                )
        return path


def _episodes_for(dataset: EpisodeDataset, name: str):
    tagged = dataset.split(name)
    if name == "train" and not tagged and all(ep.split is None for ep in dataset.episodes):
        return list(dataset.episodes)
    return tagged


def train(
    model: KoopmanModel,
    dataset: EpisodeDataset,
    config: TrainConfig,
) -> Tuple[KoopmanModel, TrainingHistory]:
    """
    Train a copy of model; the argument is never modified.

    Normalization stats come from the model, or are fitted on the train split
    when the model has none. Raises TrainingDivergedError with the epoch and
    batch index on a non-finite loss.
    """
    model = model.copy()
    if model.norm_stats is None:
        model.norm_stats = fit_stats(dataset)
    stats = model.norm_stats

    train_windows = extract_windows(_episodes_for(dataset, "train"), config.m, stats)
    if len(train_windows) == 0:
        raise ArgumentError(f"no training episode holds m+1 = {config.m + 1} states")
    val_windows = extract_windows(dataset.split("val"), config.m, stats)
    if len(val_windows) == 0:
        logger.warning("Validation split is empty; early stopping disabled")

    history = TrainingHistory()
    if config.epochs == 0:
        return model, history

    params = {k: v.copy() for k, v in model.parameters().items()}
    model.set_parameters(params)
    state = AdamState.for_parameters(params, learning_rate=config.learning_rate)
    shuffle_rng = np.random.default_rng([config.seed, 1])

    best_val = np.inf
    best_params: Optional[Dict[str, np.ndarray]] = None
    stale = 0
    n = len(train_windows)

    logger.info(f"Training on {n} windows (m={config.m}), {len(val_windows)} validation windows")
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        sums = np.zeros(5)
        for b, start in enumerate(range(0, n, config.batch_size)):
            batch = train_windows.take(order[start:start + config.batch_size])
            comps, grads = loss_and_gradients(
                model, batch, config.loss_weights, config.m, config.pred_sum_mode
            )
            if not np.isfinite(comps.total):
                raise TrainingDivergedError(epoch, b, comps.total)
            params, state = adam_step(params, grads, state)
            model.set_parameters(params)
            sums += len(batch) * np.array([comps.recon, comps.linear, comps.pred, comps.reg, comps.total])
            logger.debug(f"epoch {epoch} batch {b}: total={comps.total:.6e}")

        means = sums / n
        val_total = None
        if len(val_windows):
            val_total = loss_components(
                model, val_windows, config.loss_weights, config.m, config.pred_sum_mode
            ).total
        history.records.append(EpochRecord(epoch, *means.tolist(), val_total=val_total))

        if epoch % config.log_every == 0 or epoch == config.epochs - 1:
            val_text = "n/a" if val_total is None else f"{val_total:.6e}"
            logger.info(f"Epoch {epoch}: train={means[4]:.6e} val={val_text}")

        if val_total is None:
            continue
        if val_total < best_val:
            best_val = val_total
            best_params = {k: v.copy() for k, v in params.items()}
            history.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if config.patience is not None and stale >= config.patience:
                logger.warning(
                    f"Early stop at epoch {epoch}: no validation improvement for {stale} epochs "
                    f"(best epoch {history.best_epoch})"
                )
                history.stopped_early = True
                break

    if best_params is not None:
        model.set_parameters(best_params)
    return model, history
