"""Epoch loop: batched MAE/Adam training, feedback validation, best-epoch choice."""

from __future__ import annotations

import csv
import io
import logging
from pathlib import Path

import numpy as np

from . import metrics
from .checkpoint import Checkpoint, EpochRecord, save_checkpoint
from .config import TrainConfig
from .errors import BoundsError, ContractError
from .features import FeatureFrame, Normalizer, fit_normalizer, target_ranges
from .ingest import MeasurementSeries
from .model import LstmModel, LstmState, backward, forward, init_model, sample_masks, zero_state
from .optim import AdamState, adam_step, clip_gradients, mae_loss

log = logging.getLogger(__name__)

HISTORY_HEADER = ("epoch", "train_mae_kwh", "val_mae_kwh", "val_mape_pct")


def batches(n: int, batch_size: int, order: np.ndarray | None = None) -> list:
    """Partition ``range(n)`` (or ``order``) into consecutive chunks."""
    idx = np.arange(n) if order is None else np.asarray(order)
    return [idx[k : k + batch_size] for k in range(0, n, batch_size)]


def train_epoch(model: LstmModel, frame: FeatureFrame, targets: range, config: TrainConfig,
                adam: AdamState, rng: np.random.Generator):
    """One pass over the training targets.

    Returns ``(train_mae_kwh, state)``; ``state`` is the carried hidden
    state at the end of the epoch in flat mode and None in sequence mode.
    """
    targets = np.arange(targets.start, targets.stop)
    if targets.size == 0:
        raise ContractError("training set is empty")
    order = rng.permutation(targets.size) if config.shuffle else None
    params = model.params()
    dropout = model.dropout_keep < 1.0
    sequence = model.input_mode == "sequence"
    state = None if sequence else zero_state(model, 1)
    losses = []
    for chunk in batches(targets.size, config.batch_size, order):
        idx = targets[chunk]
        x = frame.inputs(idx)
        y = frame.values[idx]
        if sequence:
            x = x.transpose(1, 0, 2)
        else:
            x = x[:, None, :]
        T, B = x.shape[:2]
        masks = sample_masks(model, T, B, rng) if dropout else None
        preds, state_out, tape = forward(model, x, state, masks)
        if sequence:
            loss, g = mae_loss(preds[-1], y)
            d_pred = np.zeros((T, B))
            d_pred[-1] = g
        else:
            loss, g = mae_loss(preds[:, 0], y)
            d_pred = g[:, None]
            state = state_out
        grads = backward(model, tape, d_pred)
        grads = clip_gradients(grads, config.clip_norm)
        adam_step(params, grads, adam)
        losses.append(loss)
    return float(np.mean(losses)) * frame.normalizer.target_scale, state


def rollout(model, frame: FeatureFrame, start: int, steps: int, state: LstmState | None = None):
    """Autoregressive one-step-ahead predictions for targets start..start+steps-1.

    Each prediction (normalized) replaces the measurement at its index in
    a private copy of the buffer, so later windows see predictions rather
    than measurements.  Returns normalized predictions.
    """
    if start < frame.schema.history or start + steps > frame.length:
        raise BoundsError(
            f"rollout over [{start}, {start + steps}) needs indices from "
            f"{start - frame.schema.history} to {start + steps - 1}, frame has {frame.length}"
        )
    buf = frame.values.copy()
    if state is not None:
        state = state.copy()
    out = np.empty(steps)
    for j, k in enumerate(range(start, start + steps)):
        x = frame.inputs([k], buf)[0]
        pred, state = model.predict_one(x, state)
        out[j] = pred
        buf[k] = pred
    return out


def validate(model, series: MeasurementSeries, config: TrainConfig,
             normalizer: Normalizer | None = None, state: LstmState | None = None):
    """Sequential feedback validation over the configured validation range.

    Returns ``(val_mae_kwh, val_mape_pct, predictions_kwh)``.  ``model``
    is anything with ``predict_one(x, state) -> (prediction, state)``.
    """
    split = config.split if config.split is not None else config.resolve_split(len(series))
    if split.val_end > len(series):
        raise BoundsError(f"validation ends at {split.val_end}, series has {len(series)} points")
    if split.val_end <= split.train_end:
        raise ContractError("validation range is empty")
    if normalizer is None:
        normalizer = fit_normalizer(series, config.schema, split)
    frame = FeatureFrame(series, config.schema, normalizer)
    steps = split.val_end - split.train_end
    preds = normalizer.denormalize_target(rollout(model, frame, split.train_end, steps, state))
    actual = series.values[split.train_end : split.val_end]
    pct, _ = metrics.mape(actual, preds, config.zero_floor)
    return metrics.mae(actual, preds), pct, preds


def history_csv(records: list) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(HISTORY_HEADER)
    for r in records:
        writer.writerow([r.epoch, repr(r.train_mae), repr(r.val_mae), repr(r.val_mape)])
    return out.getvalue()


def fit(series: MeasurementSeries, config: TrainConfig, checkpoint_dir: str | Path | None = None,
        keep_epoch_checkpoints: bool = True):
    """Train for ``config.epochs`` epochs and return (best checkpoint, history).

    With ``checkpoint_dir`` set, every epoch is written as
    ``epoch_NNNN.ckpt`` (unless ``keep_epoch_checkpoints`` is false) plus
    ``best.ckpt`` and ``last.ckpt``.  Only the best and latest models are
    kept in memory.  Ties in validation MAE go to the earlier epoch.
    """
    split = config.resolve_split(len(series))
    config = config.with_split(split)
    schema = config.schema
    normalizer = fit_normalizer(series, schema, split)
    frame = FeatureFrame(series, schema, normalizer)
    train_targets, _ = target_ranges(split, schema.history)

    rng = np.random.default_rng(config.seed)
    model = init_model(config.layer_count, config.units, schema.input_dim,
                       config.dropout_keep, seed=config.seed, input_mode=config.input_mode)
    adam = AdamState.for_params(model.params(), lr=config.learning_rate, beta1=config.beta1,
                                beta2=config.beta2, eps=config.adam_eps)
    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    history = []
    best = None
    last = None
    for epoch in range(1, config.epochs + 1):
        train_mae, state = train_epoch(model, frame, train_targets, config, adam, rng)
        val_mae, val_mape, _ = validate(model, series, config, normalizer, state)
        record = EpochRecord(epoch, train_mae, val_mae, val_mape)
        history.append(record)
        log.info("epoch %d train_mae=%.4f val_mae=%.4f val_mape=%.3f%%",
                 epoch, train_mae, val_mae, val_mape)
        last = Checkpoint(
            config, normalizer, model.copy(),
            state.copy() if state is not None else zero_state(model, 1),
            epoch, record,
            AdamState(adam.lr, adam.beta1, adam.beta2, adam.eps, adam.t,
                      {k: v.copy() for k, v in adam.m.items()},
                      {k: v.copy() for k, v in adam.v.items()}),
        )
        if best is None or val_mae < best.record.val_mae:
            best = last
        if checkpoint_dir is not None and keep_epoch_checkpoints:
            save_checkpoint(last, checkpoint_dir / f"epoch_{epoch:04d}.ckpt")

    if checkpoint_dir is not None:
        save_checkpoint(best, checkpoint_dir / "best.ckpt")
        save_checkpoint(last, checkpoint_dir / "last.ckpt")
    return best, history
