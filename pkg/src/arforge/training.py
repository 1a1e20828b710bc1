"""Training loop: token-budget batches, Adam with warmup decay, best-dev
checkpoint selection.  Fully deterministic for a fixed schedule seed."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import TokenizedPair, batch_by_length
from .model import (TransformerModel, forward_logits, label_smoothed_loss,
                    make_training_batch, save_model)
from .optim import AdamState, LrSchedule, adam_step, learning_rate
from .rng import SplitMix64, derive_seed
from .tensor import backward, no_grad


class TrainingDivergedError(RuntimeError):
    def __init__(self, step: int, loss: float):
        super().__init__(f"training loss became non-finite ({loss}) at step {step}")
        self.step = step
        self.loss = loss


@dataclass
class TrainingSchedule:
    max_steps: int
    warmup_steps: int = 400
    source_token_budget: int = 2000
    target_token_budget: int = 2000
    label_smoothing: float = 0.1
    dropout: float = 0.1
    checkpoint_interval: int = 100
    lr_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.max_steps < 0:
            raise ValueError(f"max_steps must be >= 0, got {self.max_steps}")
        if self.warmup_steps < 1:
            raise ValueError(f"warmup_steps must be >= 1, got {self.warmup_steps}")
        if self.checkpoint_interval < 1:
            raise ValueError(f"checkpoint_interval must be >= 1, got {self.checkpoint_interval}")
        if self.lr_scale <= 0:
            raise ValueError(f"lr_scale must be positive, got {self.lr_scale}")


@dataclass
class TrainLog:
    losses: list[float] = field(default_factory=list)
    dev_losses: list[tuple[int, float]] = field(default_factory=list)
    best_step: int = 0
    steps_run: int = 0


def evaluate_loss(model: TransformerModel, pairs: list[TokenizedPair],
                  schedule: TrainingSchedule) -> float:
    """Token-weighted mean smoothed cross-entropy, dropout off."""
    if not pairs:
        raise ValueError("cannot evaluate on an empty pair list")
    batches = batch_by_length(pairs, schedule.source_token_budget,
                              schedule.target_token_budget)
    total = 0.0
    tokens = 0
    with no_grad():
        for batch in batches:
            src, dec_in, gold, mask = make_training_batch([pairs[i] for i in batch])
            logits = forward_logits(model, src, dec_in)
            loss = label_smoothed_loss(logits, gold, schedule.label_smoothing, mask)
            n = int(mask.sum())
            total += loss.item() * n
            tokens += n
    return total / tokens


def train(model: TransformerModel, train_pairs: list[TokenizedPair],
          dev_pairs: list[TokenizedPair], schedule: TrainingSchedule,
          checkpoint_prefix: str | os.PathLike | None = None,
          start_step: int = 0) -> tuple[TransformerModel, TrainLog]:
    """Train in place and return the parameters that scored best on dev.

    Batches are packed once under the token budgets, then visited in a
    seeded random batch order each epoch.  The learning rate follows the
    warmup/inverse-sqrt schedule continued from `start_step` (so a
    fine-tuning phase inherits the decayed rate).  Every
    `checkpoint_interval` steps the dev loss is evaluated (dropout off) and
    the best parameter snapshot is kept; with no dev pairs the final
    parameters win.  A non-finite training loss aborts.
    """
    log = TrainLog()
    if schedule.max_steps == 0:
        return model, log
    if not train_pairs:
        raise ValueError("cannot train on an empty pair list")
    # the schedule owns the dropout rate during this run
    model.config = replace(model.config, dropout=schedule.dropout)
    batches = batch_by_length(train_pairs, schedule.source_token_budget,
                              schedule.target_token_budget)
    order_rng = SplitMix64(derive_seed(schedule.seed, "batch-order"))
    dropout_rng = SplitMix64(derive_seed(schedule.seed, "dropout"))
    dropout_rng = dropout_rng if schedule.dropout > 0 else None
    params = model.parameters()
    state = AdamState.init(params)
    lr_schedule = LrSchedule(model.config.model_dim, schedule.warmup_steps)

    best_loss = math.inf
    best_snapshot: dict[str, np.ndarray] | None = None
    queue: list[int] = []
    for step in range(1, schedule.max_steps + 1):
        if not queue:
            queue = list(range(len(batches)))
            order_rng.shuffle(queue)
        batch = batches[queue.pop()]
        src, dec_in, gold, mask = make_training_batch([train_pairs[i] for i in batch])
        logits = forward_logits(model, src, dec_in, dropout_rng)
        loss = label_smoothed_loss(logits, gold, schedule.label_smoothing, mask)
        loss_value = loss.item()
        if not math.isfinite(loss_value):
            raise TrainingDivergedError(step, loss_value)
        log.losses.append(loss_value)
        grads = backward(loss, params=params)
        lr = learning_rate(lr_schedule, start_step + step) * schedule.lr_scale
        adam_step(params, [grads[p] for p in params], state, lr)
        log.steps_run = step

        if step % schedule.checkpoint_interval == 0 or step == schedule.max_steps:
            if dev_pairs:
                dev_loss = evaluate_loss(model, dev_pairs, schedule)
                log.dev_losses.append((start_step + step, dev_loss))
                if dev_loss < best_loss:
                    best_loss = dev_loss
                    best_snapshot = model.snapshot()
                    log.best_step = start_step + step
            if checkpoint_prefix is not None:
                save_model(model, checkpoint_prefix)

    if best_snapshot is not None:
        model.restore(best_snapshot)
    if checkpoint_prefix is not None:
        save_model(model, checkpoint_prefix)
    return model, log
