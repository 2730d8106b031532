"""Splitting, z-score normalization and SMOTE class balancing."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from credit_mlp.errors import ConfigError, DataError
from credit_mlp.ingest import Dataset

logger = logging.getLogger(__name__)

DEGENERATE_STD = 1e-12


@dataclass(frozen=True)
class NormalizationStats:
    mean: np.ndarray
    std: np.ndarray  # population std; degenerate features hold 1.0
    degenerate: np.ndarray

    def __post_init__(self):
        if self.mean.shape != self.std.shape:
            raise DataError("mean and std vectors differ in length")
        if np.any(self.std <= 0):
            raise DataError("normalization std entries must be positive")

    @property
    def n_features(self) -> int:
        return len(self.mean)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "degenerate": self.degenerate.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationStats":
        return cls(
            np.asarray(d["mean"], dtype=np.float64),
            np.asarray(d["std"], dtype=np.float64),
            np.asarray(d["degenerate"], dtype=bool),
        )


@dataclass
class SplitResult:
    train: Dataset
    test: Dataset
    seed: int
    train_index: np.ndarray
    test_index: np.ndarray


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split(dataset: Dataset, train_fraction: float = 0.8, seed: int = 0, by_company: bool = False) -> SplitResult:
    """Random sample-level partition into train and test.

    With ``by_company`` whole companies go to one side, for leakage studies;
    the train size is then only approximately ``train_fraction``.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    m = len(dataset)
    if m < 2:
        raise DataError(f"need at least 2 samples to split, got {m}")
    rng = np.random.default_rng(seed)
    n_train = min(max(_round_half_up(train_fraction * m), 1), m - 1)
    if by_company:
        companies = np.array(dataset.companies, dtype=object)
        order = companies[rng.permutation(len(companies))]
        sizes = {c: int(np.sum(dataset.company_ids == c)) for c in order}
        chosen, total = set(), 0
        for c in order:
            if total >= n_train:
                break
            chosen.add(c)
            total += sizes[c]
        in_train = np.array([c in chosen for c in dataset.company_ids], dtype=bool)
        train_idx = np.flatnonzero(in_train)
        test_idx = np.flatnonzero(~in_train)
    else:
        perm = rng.permutation(m)
        train_idx = np.sort(perm[:n_train])
        test_idx = np.sort(perm[n_train:])
    return SplitResult(dataset.subset(train_idx), dataset.subset(test_idx), seed, train_idx, test_idx)


def _matrix(data) -> np.ndarray:
    X = data.X if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    return X.reshape(len(X), -1) if X.ndim != 2 else X


def fit_normalizer(train) -> NormalizationStats:
    """Per-feature mean and population std over the rows of ``train``."""
    X = _matrix(train)
    if X.shape[0] == 0:
        raise DataError("cannot fit normalization statistics on an empty dataset")
    if not np.all(np.isfinite(X)):
        raise DataError("normalization input contains missing or non-finite values")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    # roundoff can leave a constant column with std just above the threshold
    degenerate = (std < DEGENERATE_STD) | (X.max(axis=0) == X.min(axis=0))
    std = np.where(degenerate, 1.0, std)
    if degenerate.any():
        logger.warning("%d degenerate feature(s) get std 1", int(degenerate.sum()))
    return NormalizationStats(mean, std, degenerate)


def apply_normalizer(stats: NormalizationStats, data) -> np.ndarray:
    """``(x - mean) / std`` column-wise. No clamping outside the training range."""
    X = _matrix(data)
    if X.shape[1] != stats.n_features:
        raise DataError(f"data has {X.shape[1]} features, normalization stats expect {stats.n_features}")
    out = (X - stats.mean) / stats.std
    out[:, stats.degenerate] = 0.0
    return out


def smote(train: Dataset, k: int = 5, seed: int = 0) -> Dataset:
    """Oversample every minority class up to the majority count.

    Synthetic rows interpolate between a source row and one of its ``k``
    nearest same-class neighbours (Euclidean, on whatever features ``train``
    carries, normally normalized ones). Source rows are taken round-robin
    over a seeded permutation so each original is reused as evenly as
    possible. Originals are returned first and untouched.
    """
    if k < 1:
        raise ConfigError(f"SMOTE needs k >= 1, got {k}")
    if len(train) == 0:
        raise DataError("cannot oversample an empty dataset")
    y = train.y
    classes, counts = np.unique(y, return_counts=True)
    majority = int(counts.max())
    rng = np.random.default_rng(seed)

    new_X, new_grades, new_years, new_ids = [], [], [], []
    for c, n_c in zip(classes.tolist(), counts.tolist()):
        need = majority - n_c
        if need == 0:
            continue
        grade = train.class_map.index_to_grade(c)
        if n_c < 2:
            raise DataError(f"SMOTE needs at least 2 samples per class; class {grade!r} has {n_c}")
        kk = k
        if k > n_c - 1:
            kk = n_c - 1
            logger.warning("SMOTE k=%d clamped to %d for class %r (%d samples)", k, kk, grade, n_c)
        members = np.flatnonzero(y == c)
        Xc = train.X[members]
        dist = cdist(Xc, Xc)
        np.fill_diagonal(dist, np.inf)
        neighbors = np.argsort(dist, axis=1, kind="stable")[:, :kk]

        src = rng.permutation(n_c)[np.arange(need) % n_c]
        nn = neighbors[src, rng.integers(0, kk, size=need)]
        u = rng.random(need)[:, None]
        a, b = Xc[src], Xc[nn]
        x_new = np.clip(a + u * (b - a), np.minimum(a, b), np.maximum(a, b))

        new_X.append(x_new)
        new_grades.extend([grade] * need)
        new_years.append(train.years[members][src])
        new_ids.extend(f"smote:{grade}:{j}" for j in range(need))

    if not new_X:
        return train
    n_new = len(new_ids)
    return Dataset(
        company_ids=np.concatenate([train.company_ids, np.array(new_ids, dtype=object)]),
        years=np.concatenate([train.years, *new_years]),
        X=np.vstack([train.X, *new_X]),
        manifest=train.manifest,
        grades=train.grades + tuple(new_grades),
        class_map=train.class_map,
        synthetic=np.concatenate([train.synthetic, np.ones(n_new, dtype=bool)]),
    )


@dataclass
class PreparedData:
    """Output of the standard split -> normalize -> balance pipeline."""

    split: SplitResult
    stats: NormalizationStats
    train: Dataset  # normalized, before SMOTE
    test: Dataset  # normalized with the training statistics
    balanced: Dataset  # normalized train after SMOTE


def prepare(
    dataset: Dataset,
    train_fraction: float = 0.8,
    split_seed: int = 0,
    smote_k: int = 5,
    smote_seed: int = 0,
    normalization: str = "train",
    by_company: bool = False,
    balance: bool = True,
) -> PreparedData:
    """Split, fit statistics (on train, or on everything with ``"full"``), normalize, SMOTE."""
    if normalization not in ("train", "full"):
        raise ConfigError(f"normalization mode must be 'train' or 'full', got {normalization!r}")
    parts = split(dataset, train_fraction, split_seed, by_company=by_company)
    stats = fit_normalizer(parts.train if normalization == "train" else dataset)
    train = parts.train.with_features(apply_normalizer(stats, parts.train))
    test = parts.test.with_features(apply_normalizer(stats, parts.test))
    balanced = smote(train, smote_k, smote_seed) if balance else train
    return PreparedData(parts, stats, train, test, balanced)
