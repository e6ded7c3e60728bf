"""Deterministic training with RAdam, per-epoch monitoring and best-epoch selection."""

from __future__ import annotations

import copy
import logging
import math
import time
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn.functional as F

from . import objectives
from .radam import RAdam, RAdamConfig

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    epochs: int = 30
    batch_size: int = 4
    seed: int = 0
    loss: str = "rmsle"
    monitor_subset_size: int = 1000
    grad_clip: float | None = None

    def __post_init__(self):
        self.optimizer_config()
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.loss not in objectives.LOSSES:
            raise ValueError(f"loss must be one of {sorted(objectives.LOSSES)}")
        if self.monitor_subset_size < 1:
            raise ValueError("monitor_subset_size must be >= 1")

    def optimizer_config(self) -> RAdamConfig:
        return RAdamConfig(self.learning_rate, self.beta1, self.beta2, self.epsilon)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_rmsle: float
    val_mae: float
    val_mape: float
    wall_time: float


@dataclass
class TileTensors:
    """Stacked inputs (N, C, H, W), targets and masks (N, 1, H', W')."""

    inputs: torch.Tensor
    targets: torch.Tensor
    masks: torch.Tensor

    def __len__(self):
        return self.inputs.shape[0]


def tiles_to_tensors(tiles, output_stride: int = 1) -> TileTensors:
    """Stack tile tuples; for coarse-output models, targets are block sums over full-valid blocks."""
    tiles = list(tiles)
    if not tiles:
        raise TrainingError("no tiles")
    x = torch.from_numpy(np.stack([t.inputs.values for t in tiles]))
    y = torch.from_numpy(np.stack([np.nan_to_num(t.target.values, nan=0.0) for t in tiles]))
    m = torch.from_numpy(np.stack([t.valid_mask.values for t in tiles]))
    if output_stride > 1:
        s = output_stride
        y = F.avg_pool2d(y, s) * (s * s)
        m = -F.max_pool2d(-m, s)
    return TileTensors(x, y * m, m)


def predict(model, inputs: torch.Tensor, batch_size: int = 4) -> torch.Tensor:
    model.eval()
    outs = []
    with torch.no_grad():
        for i in range(0, inputs.shape[0], batch_size):
            outs.append(model(inputs[i : i + batch_size]))
    return torch.cat(outs)


def monitor_metrics(model, data: TileTensors, batch_size: int = 4) -> dict:
    """Per-tile masked metrics averaged over tiles that have valid pixels."""
    pred = predict(model, data.inputs, batch_size).numpy()
    y = data.targets.numpy()
    m = data.masks.numpy()
    rows = {name: [] for name in objectives.METRICS}
    for i in range(len(pred)):
        if not m[i].any():
            continue
        for name, fn in objectives.METRICS.items():
            rows[name].append(fn(pred[i], y[i], m[i]))
    if not rows["rmsle"]:
        raise TrainingError("monitor tiles contain no valid pixels")
    return {name: float(np.mean(v)) for name, v in rows.items()}


def select_best_epoch(val_rmsle) -> int:
    """1-based epoch with the lowest monitor RMSLE; ties go to the earlier epoch."""
    vals = list(val_rmsle)
    if not vals:
        raise TrainingError("empty history")
    return int(np.argmin(vals)) + 1


def _epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, epoch]))
    return rng.permutation(n)


def train(model, train_tiles, monitor_tiles, cfg: TrainConfig, monitor_fn=None):
    """Fit ``model`` and return it loaded with its best-monitor-RMSLE weights plus the history.

    ``train_tiles``/``monitor_tiles`` are sequences of tile tuples or
    :class:`TileTensors`. ``monitor_fn(model, epoch)`` may replace the monitor
    evaluation; it must return a dict with ``rmsle``, ``mae`` and ``mape``.
    """
    stride = model.config.output_stride
    train_data = _as_tensors(train_tiles, stride, "training")
    monitor_data = _as_tensors(monitor_tiles, stride, "monitor")
    loss_fn = objectives.LOSSES[cfg.loss]

    torch.manual_seed(cfg.seed)
    opt = RAdam(model.parameters(), cfg.optimizer_config())
    history: list[EpochRecord] = []
    best_rmsle = math.inf
    best_state = None
    t0 = time.perf_counter()

    for epoch in range(1, cfg.epochs + 1):
        model.train()
        order = _epoch_order(len(train_data), cfg.seed, epoch)
        losses = []
        for i in range(0, len(order), cfg.batch_size):
            idx = torch.from_numpy(order[i : i + cfg.batch_size])
            pred = model(train_data.inputs[idx])
            loss = loss_fn(pred, train_data.targets[idx], train_data.masks[idx])
            if not torch.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss {loss.item()} at epoch {epoch}, batch {i // cfg.batch_size}"
                )
            opt.zero_grad()
            loss.backward()
            if cfg.grad_clip is not None:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            opt.step()
            losses.append(loss.item())

        if monitor_fn is not None:
            metrics = monitor_fn(model, epoch)
        else:
            metrics = monitor_metrics(model, monitor_data, cfg.batch_size)
        record = EpochRecord(
            epoch,
            float(np.mean(losses)),
            float(metrics["rmsle"]),
            float(metrics["mae"]),
            float(metrics["mape"]),
            time.perf_counter() - t0,
        )
        history.append(record)
        log.info(
            "epoch %d loss %.4f val rmsle %.4f mae %.3f mape %.1f",
            epoch, record.train_loss, record.val_rmsle, record.val_mae, record.val_mape,
        )
        if record.val_rmsle < best_rmsle:
            best_rmsle = record.val_rmsle
            best_state = copy.deepcopy(model.state_dict())

    model.load_state_dict(best_state)
    model.eval()
    return model, history


def _as_tensors(tiles, stride, what) -> TileTensors:
    if isinstance(tiles, TileTensors):
        data = tiles
    else:
        tiles = list(tiles)
        if not tiles:
            raise TrainingError(f"empty {what} set")
        data = tiles_to_tensors(tiles, stride)
    if len(data) == 0:
        raise TrainingError(f"empty {what} set")
    return data


def history_to_json(history) -> list[dict]:
    return [asdict(r) for r in history]
