"""Mini-batch training with Adam, gradient clipping and early stopping."""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import FeatureSet, atomic_write
from .nn.model import ModelParams, loss_and_grad, predict
from .nn.optim import AdamState, adam_step, clip_grad_norm

log = logging.getLogger(__name__)


class NonFiniteLossError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    epochs: int = 15
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = 5.0
    seed: int = 0
    eval_every: int = 1
    patience: int = 5
    lr_schedule: str = "constant"

    def __post_init__(self):
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"lr_schedule must be 'constant' or 'cosine', got {self.lr_schedule!r}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")


@dataclass
class TrainReport:
    epochs: list[int] = field(default_factory=list)
    epoch_loss: list[float] = field(default_factory=list)
    val_accuracy: list[tuple[int, float]] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)
    stopped_early: bool = False

    def rows(self):
        val = dict(self.val_accuracy)
        for epoch, loss in zip(self.epochs, self.epoch_loss):
            yield epoch, loss, val.get(epoch)


@dataclass
class TrainState:
    """Everything needed to continue a run exactly where it stopped."""

    model: ModelParams
    optimizer: AdamState
    epoch: int = 0
    best_val: float = -1.0
    evals_since_best: int = 0

    def meta(self) -> dict:
        return {
            "epoch": self.epoch,
            "best_val": self.best_val,
            "evals_since_best": self.evals_since_best,
        }


def make_batches(n, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffled index batches; the final partial batch is kept."""
    n = n if isinstance(n, (int, np.integer)) else len(n)
    if n <= 0:
        raise ValueError("cannot batch an empty dataset")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = rng.permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    # one generator per (seed, epoch) so a resumed run shuffles identically
    return np.random.default_rng([seed, epoch])


def accuracy(model: ModelParams, data: FeatureSet) -> float:
    return float(np.mean(predict(model, data.features) == data.labels))


def learning_rate(config: TrainConfig, step: int, total_steps: int) -> float:
    """Rate for the 0-based optimizer ``step``; cosine decays to 0 over ``total_steps``."""
    if config.lr_schedule == "constant":
        return config.lr
    return config.lr * 0.5 * (1.0 + math.cos(math.pi * min(step, total_steps) / total_steps))


def train_epoch(state: TrainState, data: FeatureSet, config: TrainConfig) -> float:
    total = 0.0
    total_steps = config.epochs * math.ceil(len(data) / config.batch_size)
    for idx in make_batches(len(data), config.batch_size, epoch_rng(config.seed, state.epoch)):
        loss, grads, _ = loss_and_grad(state.model, data.features[idx], data.labels[idx])
        if not np.isfinite(loss):
            raise NonFiniteLossError(
                f"non-finite loss {loss} at epoch {state.epoch + 1}, step {state.optimizer.step + 1}"
            )
        clip_grad_norm(grads, config.clip_norm)
        lr = learning_rate(config, state.optimizer.step, total_steps)
        adam_step(
            state.model, grads, state.optimizer,
            lr=lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps,
        )
        total += loss * len(idx)
    state.epoch += 1
    return total / len(data)


def train(
    model: ModelParams,
    train_set: FeatureSet,
    val_set: FeatureSet | None,
    config: TrainConfig,
    state: TrainState | None = None,
    on_epoch=None,
) -> tuple[ModelParams, TrainReport, TrainState]:
    """Train ``model`` in place; pass ``state`` to resume a checkpointed run.

    ``on_epoch(state, report)`` is called after every epoch (e.g. to save a
    checkpoint). Training stops early once validation accuracy has not
    improved for ``config.patience`` consecutive evaluations.
    """
    if len(train_set) == 0:
        raise ValueError("empty training set")
    if state is None:
        state = TrainState(model=model, optimizer=AdamState.for_model(model))
    report = TrainReport()
    while state.epoch < config.epochs:
        t0 = time.perf_counter()
        loss = train_epoch(state, train_set, config)
        report.epochs.append(state.epoch)
        report.epoch_loss.append(loss)
        msg = f"epoch {state.epoch}: loss {loss:.4f}"
        if val_set is not None and len(val_set) and state.epoch % config.eval_every == 0:
            acc = accuracy(state.model, val_set)
            report.val_accuracy.append((state.epoch, acc))
            msg += f", val acc {acc:.4f}"
            if acc > state.best_val:
                state.best_val, state.evals_since_best = acc, 0
            else:
                state.evals_since_best += 1
        report.epoch_seconds.append(time.perf_counter() - t0)
        log.info(msg)
        if on_epoch is not None:
            on_epoch(state, report)
        if state.evals_since_best >= config.patience:
            report.stopped_early = True
            log.info("early stop: no validation improvement in %d evals", config.patience)
            break
    return state.model, report, state


def write_train_log(path, report: TrainReport) -> None:
    with atomic_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss", "val_accuracy"])
        for epoch, loss, acc in report.rows():
            w.writerow([epoch, repr(loss), "" if acc is None else repr(acc)])


def config_dict(config: TrainConfig) -> dict:
    return asdict(config)
