"""Accuracy, RMS, confusion matrices, notch distance, trends and correlations.

Class indices grow with credit risk, so a rising score means deteriorating
credit and a notch distance is simply ``|true - predicted|``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy.stats import rankdata

from credit_mlp.errors import DataError
from credit_mlp.ingest import Dataset
from credit_mlp.model import CreditModel
from credit_mlp.neural_net import MLPParams, forward

logger = logging.getLogger(__name__)


def _params(model) -> MLPParams:
    return model.params if isinstance(model, CreditModel) else model


def _n_classes(model) -> int:
    return model.n_classes if isinstance(model, CreditModel) else model.config.n_classes


def classes_from_output(output: np.ndarray, head: str, n_classes: int) -> np.ndarray:
    """Argmax (first maximum wins) or round-half-up then clamp to ``[0, C-1]``."""
    output = np.asarray(output, dtype=np.float64)
    if head == "classification":
        return np.argmax(np.atleast_2d(output), axis=1)
    return np.clip(np.floor(np.atleast_1d(output) + 0.5), 0, n_classes - 1).astype(np.int64)


def scores_from_output(output: np.ndarray, head: str) -> np.ndarray:
    """Continuous risk score: the raw regression output, or the argmax index."""
    if head == "classification":
        return np.argmax(np.atleast_2d(output), axis=1).astype(np.float64)
    return np.atleast_1d(np.asarray(output, dtype=np.float64))


def predict(model, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Class indices and raw scores for an already-normalized batch."""
    params = _params(model)
    out = forward(params, np.atleast_2d(X))
    head = params.config.head
    return classes_from_output(out, head, _n_classes(model)), scores_from_output(out, head)


def predict_class(model, x) -> int | np.ndarray:
    """Class index for one normalized vector, or an array of them for a batch."""
    classes, _ = predict(model, x)
    return int(classes[0]) if np.ndim(x) == 1 else classes


def confusion_matrix(true: np.ndarray, pred: np.ndarray, n_classes: int) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(true, dtype=np.int64), np.asarray(pred, dtype=np.int64)), 1)
    return cm


def mean_notch_distance(confusion: np.ndarray) -> float:
    confusion = np.asarray(confusion)
    n = confusion.sum()
    if n == 0:
        return 0.0
    i, j = np.indices(confusion.shape)
    return float((confusion * np.abs(i - j)).sum() / n)


@dataclass
class EvalReport:
    head: str
    n: int
    accuracy: float
    rms: float
    rms_basis: str  # "raw_score" (regression) or "argmax_index" (classification)
    confusion: np.ndarray
    mean_notch_distance: float
    predictions: np.ndarray = field(repr=False)
    scores: np.ndarray = field(repr=False)
    targets: np.ndarray = field(repr=False)

    def __post_init__(self):
        assert self.confusion.sum() == self.n
        assert self.accuracy == np.trace(self.confusion) / self.n
        assert (self.mean_notch_distance == 0.0) == (self.accuracy == 1.0)

    def summary(self) -> dict:
        return {
            "head": self.head,
            "n": self.n,
            "accuracy": self.accuracy,
            "rms": self.rms,
            "rms_basis": self.rms_basis,
            "mean_notch_distance": self.mean_notch_distance,
            "confusion": self.confusion.tolist(),
        }


def report_from_predictions(
    targets: np.ndarray, predictions: np.ndarray, scores: np.ndarray, n_classes: int, head: str
) -> EvalReport:
    targets = np.asarray(targets, dtype=np.int64)
    n = len(targets)
    if n == 0:
        raise DataError("cannot evaluate on an empty dataset")
    cm = confusion_matrix(targets, predictions, n_classes)
    rms = float(np.sqrt(np.mean((np.asarray(scores, dtype=np.float64) - targets) ** 2)))
    return EvalReport(
        head=head,
        n=n,
        accuracy=float(np.trace(cm) / n),
        rms=rms,
        rms_basis="raw_score" if head == "regression" else "argmax_index",
        confusion=cm,
        mean_notch_distance=mean_notch_distance(cm),
        predictions=np.asarray(predictions, dtype=np.int64),
        scores=np.asarray(scores, dtype=np.float64),
        targets=targets,
    )


def eval_report(model, dataset: Dataset) -> EvalReport:
    """Evaluate on a normalized, labeled dataset."""
    if len(dataset) == 0:
        raise DataError("cannot evaluate on an empty dataset")
    classes, scores = predict(model, dataset.X)
    return report_from_predictions(dataset.y, classes, scores, _n_classes(model), _params(model).config.head)


@dataclass
class CompanyTrend:
    slope: float
    intercept: float
    years: tuple[int, ...]


@dataclass
class TrendResult:
    companies: dict[str, CompanyTrend]
    mean_slope: float  # mean of per-company slopes; NaN when no company qualifies
    yearly_mean: dict[int, float]  # cross-company mean score per year
    yearly_mean_slope: float
    excluded: list[str]


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    xc = x - x.mean()
    slope = float((xc * (y - y.mean())).sum() / (xc * xc).sum())
    return slope, float(y.mean() - slope * x.mean())


def trend_slope(scores: Mapping[str, Iterable[tuple[int, float]]] | Iterable[tuple[str, int, float]]) -> TrendResult:
    """Least-squares slope of score against year, per company and for the cohort.

    Accepts ``{company: [(year, score), ...]}`` or ``(company, year, score)``
    triples. Companies with fewer than two distinct years are dropped with a
    warning.
    """
    if isinstance(scores, Mapping):
        series = {str(c): [(int(y), float(s)) for y, s in pts] for c, pts in scores.items()}
    else:
        series = {}
        for c, y, s in scores:
            series.setdefault(str(c), []).append((int(y), float(s)))

    companies, excluded = {}, []
    by_year: dict[int, list[float]] = {}
    for company, pts in series.items():
        years = np.array([p[0] for p in pts], dtype=np.float64)
        vals = np.array([p[1] for p in pts], dtype=np.float64)
        if len(np.unique(years)) < 2:
            logger.warning("company %s has fewer than 2 distinct years; excluded from trend", company)
            excluded.append(company)
            continue
        slope, intercept = _ols(years, vals)
        companies[company] = CompanyTrend(slope, intercept, tuple(sorted({int(y) for y in years})))
        for y, v in pts:
            by_year.setdefault(y, []).append(v)

    yearly = {y: float(np.mean(v)) for y, v in sorted(by_year.items())}
    if len(yearly) >= 2:
        yearly_slope = _ols(np.array(list(yearly), dtype=np.float64), np.array(list(yearly.values())))[0]
    else:
        yearly_slope = math.nan
    mean_slope = float(np.mean([t.slope for t in companies.values()])) if companies else math.nan
    return TrendResult(companies, mean_slope, yearly, yearly_slope, excluded)


@dataclass
class CorrelationResult:
    pearson: float | None  # None when either input has zero variance
    spearman: float | None
    n: int
    note: str = ""


def _pearson(a: np.ndarray, b: np.ndarray) -> float | None:
    ac, bc = a - a.mean(), b - b.mean()
    denom = math.sqrt(float((ac * ac).sum()) * float((bc * bc).sum()))
    if denom == 0.0:
        return None
    return float(np.clip((ac * bc).sum() / denom, -1.0, 1.0))


def correlation(model_scores, external_scores) -> CorrelationResult:
    """Pearson on values and Spearman on average-tied ranks."""
    a = np.asarray(model_scores, dtype=np.float64)
    b = np.asarray(external_scores, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError(f"score lists differ in length: {a.shape} vs {b.shape}")
    n = len(a)
    if n < 3:
        raise DataError(f"correlation needs at least 3 pairs, got {n}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DataError("correlation inputs must be finite")
    pearson = _pearson(a, b)
    spearman = _pearson(rankdata(a), rankdata(b))
    note = "" if pearson is not None else "undefined: zero variance in at least one input"
    return CorrelationResult(pearson, spearman, n, note)


@dataclass
class ScoreRange:
    min: float
    max: float
    spread: float
    std: float


def score_range(scores) -> ScoreRange:
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise DataError("score_range needs at least one score")
    lo, hi = float(s.min()), float(s.max())
    return ScoreRange(lo, hi, hi - lo, float(s.std()))
