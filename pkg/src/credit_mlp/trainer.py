"""Full-batch training loop and the hidden-width sweep."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from credit_mlp.errors import ConfigError, NumericError
from credit_mlp.evaluate import eval_report
from credit_mlp.ingest import Dataset
from credit_mlp.neural_net import AdamState, MLPConfig, MLPParams, OptimizerConfig, backward, init_params, optimizer_step

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 3000
    batch_size: int | None = None  # None = one full-batch step per epoch
    optimizer: OptimizerConfig = OptimizerConfig()
    seed: int = 0
    eval_every: int = 100

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


@dataclass
class Snapshot:
    epoch: int
    train_loss: float
    train_metric: float  # accuracy (classification) or RMS (regression)
    test_metric: float | None = None


@dataclass
class TrainHistory:
    head: str
    snapshots: list[Snapshot] = field(default_factory=list)

    @property
    def metric_name(self) -> str:
        return "accuracy" if self.head == "classification" else "rms"

    def losses(self) -> list[float]:
        return [s.train_loss for s in self.snapshots]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", f"train_{self.metric_name}", f"test_{self.metric_name}"])
            for s in self.snapshots:
                w.writerow([s.epoch, repr(s.train_loss), repr(s.train_metric), "" if s.test_metric is None else repr(s.test_metric)])


class DivergenceError(NumericError):
    """Training hit a non-finite value; carries the last finite state."""

    def __init__(self, message: str, params: MLPParams, history: TrainHistory, epoch: int):
        super().__init__(message)
        self.params = params
        self.history = history
        self.epoch = epoch


def _targets(data: Dataset, head: str) -> np.ndarray:
    y = data.y
    return y if head == "classification" else y.astype(np.float64)


def _snapshot(params: MLPParams, epoch: int, train_set: Dataset, test_set: Dataset | None) -> Snapshot:
    head = params.config.head
    rep = eval_report(params, train_set)
    _, loss = backward(params, train_set.X, _targets(train_set, head))
    metric = rep.accuracy if head == "classification" else rep.rms
    test_metric = None
    if test_set is not None and len(test_set):
        trep = eval_report(params, test_set)
        test_metric = trep.accuracy if head == "classification" else trep.rms
    return Snapshot(epoch, loss, metric, test_metric)


def train(
    train_set: Dataset,
    config: MLPConfig,
    train_config: TrainConfig = TrainConfig(),
    test_set: Dataset | None = None,
    init_seed: int | None = None,
) -> tuple[MLPParams, TrainHistory]:
    """Run exactly ``train_config.epochs`` epochs from a seeded initialization.

    Snapshots are taken after epoch 1, every ``eval_every`` epochs, and after
    the last epoch. Classification targets are class indices; regression
    targets are the same indices as floats.
    """
    if len(train_set) == 0:
        raise ConfigError("training set is empty")
    if train_set.X.shape[1] != config.input_dim:
        raise ConfigError(f"training data has {train_set.X.shape[1]} features, config expects {config.input_dim}")
    if config.head == "classification" and train_set.class_map.n_classes != config.n_classes:
        raise ConfigError(f"config has {config.n_classes} classes, data has {train_set.class_map.n_classes}")

    params = init_params(config, train_config.seed if init_seed is None else init_seed)
    X, t = train_set.X, _targets(train_set, config.head)
    m = len(X)
    batch = m if train_config.batch_size is None else min(train_config.batch_size, m)
    rng = np.random.default_rng(train_config.seed)
    state: AdamState | None = None
    history = TrainHistory(config.head)

    for epoch in range(1, train_config.epochs + 1):
        try:
            if batch == m:
                grads, _ = backward(params, X, t)
                params, state = optimizer_step(params, grads, state, train_config.optimizer)
            else:
                order = rng.permutation(m)
                for start in range(0, m, batch):
                    idx = order[start : start + batch]
                    grads, _ = backward(params, X[idx], t[idx])
                    params, state = optimizer_step(params, grads, state, train_config.optimizer)
            if epoch == 1 or epoch % train_config.eval_every == 0 or epoch == train_config.epochs:
                history.snapshots.append(_snapshot(params, epoch, train_set, test_set))
        except NumericError as exc:
            last = history.snapshots[-1].epoch if history.snapshots else 0
            raise DivergenceError(f"training diverged at epoch {epoch}: {exc}", params, history, last) from exc
    return params, history


@dataclass
class SweepRow:
    width: int
    classification_accuracy: float
    classification_rms: float
    classification_notch: float
    regression_accuracy: float
    regression_rms: float
    regression_notch: float
    classification_train_accuracy: float
    regression_train_rms: float


SWEEP_COLUMNS = (
    "width",
    "classification_accuracy",
    "classification_rms",
    "classification_notch",
    "regression_accuracy",
    "regression_rms",
    "regression_notch",
    "classification_train_accuracy",
    "regression_train_rms",
)


def width_seed(base_seed: int, width: int) -> int:
    return int(np.random.SeedSequence([base_seed, width]).generate_state(1)[0])


def sweep(
    widths: Sequence[int],
    train_set: Dataset,
    test_set: Dataset,
    template: MLPConfig,
    train_config: TrainConfig = TrainConfig(),
) -> list[SweepRow]:
    """Train one classifier and one regressor per width on the same data.

    Both heads at a given width share an initialization seed derived from
    ``(train_config.seed, width)``; every cell starts from scratch.
    """
    widths = list(widths)
    if not widths:
        raise ConfigError("sweep needs at least one width")
    rows = []
    for width in sorted(widths):
        cfg_seed = replace(train_config, seed=width_seed(train_config.seed, width))
        reports = {}
        for head in ("classification", "regression"):
            cfg = replace(template, hidden_width=width, head=head, n_classes=train_set.class_map.n_classes)
            params, _ = train(train_set, cfg, cfg_seed)
            reports[head] = (eval_report(params, test_set), eval_report(params, train_set))
            logger.info("width %d %s: test acc %.3f rms %.3f", width, head, reports[head][0].accuracy, reports[head][0].rms)
        (c_test, c_train), (r_test, r_train) = reports["classification"], reports["regression"]
        rows.append(
            SweepRow(
                width,
                c_test.accuracy, c_test.rms, c_test.mean_notch_distance,
                r_test.accuracy, r_test.rms, r_test.mean_notch_distance,
                c_train.accuracy, r_train.rms,
            )
        )
    return rows


def write_sweep_csv(rows: Sequence[SweepRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([r.width, *(repr(float(getattr(r, c))) for c in SWEEP_COLUMNS[1:])])
