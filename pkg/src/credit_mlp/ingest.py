"""Loading and joining company-year financial statement rows.

Feature files are comma-delimited with a header row. Columns are bound by
name, so the manifest (not the column position) fixes feature order. Empty
cells, ``NA`` and any other non-numeric token load as NaN and are never
coerced to zero.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from credit_mlp.errors import ConfigError, DataError
from credit_mlp.rating_scale import ClassIndexMap, RatingScale, build_class_map, parse_grade

logger = logging.getLogger(__name__)

STATEMENT_GROUPS = ("income", "balance", "cashflow")
KEY_COLUMNS = ("company_id", "fiscal_year")
LABEL_COLUMNS = ("company_id", "fiscal_year", "rating")
DEFAULT_PERIOD = (2010, 2016)


@dataclass(frozen=True)
class FeatureManifest:
    """Ordered (field, statement group) pairs defining the feature vector."""

    entries: tuple[tuple[str, str], ...]

    def __post_init__(self):
        entries = tuple((str(n), str(g)) for n, g in self.entries)
        object.__setattr__(self, "entries", entries)
        if not entries:
            raise ConfigError("feature manifest must list at least one field")
        names = [n for n, _ in entries]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ConfigError(f"duplicate manifest fields: {dupes}")
        bad = [(n, g) for n, g in entries if g not in STATEMENT_GROUPS]
        if bad:
            raise ConfigError(f"unknown statement group for {bad[0][0]!r}: {bad[0][1]!r}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def load(cls, path: str | Path) -> "FeatureManifest":
        with open(path, newline="", encoding="utf-8") as fh:
            return cls._from_rows(csv.DictReader(fh), str(path))

    @classmethod
    def default(cls) -> "FeatureManifest":
        text = resources.files("credit_mlp").joinpath("data/default_manifest.csv").read_text("utf-8")
        return cls._from_rows(csv.DictReader(text.splitlines()), "default manifest")

    @classmethod
    def generic(cls, n_features: int) -> "FeatureManifest":
        """Placeholder names ``f00``, ``f01``, ... for non-default widths."""
        return cls(tuple((f"f{i:02d}", STATEMENT_GROUPS[i % 3]) for i in range(n_features)))

    @classmethod
    def _from_rows(cls, reader: csv.DictReader, source: str) -> "FeatureManifest":
        if reader.fieldnames is None or not {"field", "group"} <= set(reader.fieldnames):
            raise ConfigError(f"{source}: manifest needs 'field' and 'group' columns")
        return cls(tuple((row["field"].strip(), row["group"].strip()) for row in reader))

    def write(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["field", "group"])
            writer.writerows(self.entries)


@dataclass
class CompanyYearRecord:
    company_id: str
    fiscal_year: int
    values: np.ndarray  # NaN marks a missing cell
    label: str | None = None

    @property
    def complete(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))


@dataclass
class Dataset:
    """Complete company-year samples with a design-matrix view.

    ``X`` has one row per sample in manifest order. ``grades`` is ``None`` for
    unlabeled cohorts. ``synthetic`` flags rows created by oversampling.
    """

    company_ids: np.ndarray
    years: np.ndarray
    X: np.ndarray
    manifest: FeatureManifest
    grades: tuple[str, ...] | None = None
    class_map: ClassIndexMap | None = None
    synthetic: np.ndarray = field(default=None)

    def __post_init__(self):
        self.company_ids = np.asarray(self.company_ids, dtype=object)
        self.years = np.asarray(self.years, dtype=np.int64)
        m = len(self.company_ids)
        self.X = np.asarray(self.X, dtype=np.float64).reshape(m, -1 if m else len(self.manifest))
        if self.X.shape[1] != len(self.manifest):
            raise DataError(f"design matrix has {self.X.shape[1]} columns, manifest has {len(self.manifest)}")
        if len(self.years) != m:
            raise DataError("company_ids and years differ in length")
        if self.synthetic is None:
            self.synthetic = np.zeros(m, dtype=bool)
        self.synthetic = np.asarray(self.synthetic, dtype=bool)
        if self.grades is not None:
            self.grades = tuple(self.grades)
            if len(self.grades) != m:
                raise DataError("grades and samples differ in length")
            if self.class_map is None and m:
                raise DataError("labeled dataset needs a class map")
            if self.class_map is not None:
                self.class_map.encode(self.grades)

    def __len__(self) -> int:
        return len(self.company_ids)

    @property
    def m(self) -> int:
        return len(self)

    @property
    def labeled(self) -> bool:
        return self.grades is not None

    @property
    def y(self) -> np.ndarray:
        """Class indices of the labels (0 = best observed class)."""
        if self.grades is None:
            raise DataError("dataset is unlabeled")
        return np.asarray(self.class_map.encode(self.grades), dtype=np.int64)

    @property
    def companies(self) -> list[str]:
        return list(dict.fromkeys(self.company_ids.tolist()))

    def subset(self, idx: Sequence[int] | np.ndarray) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(
            self,
            company_ids=self.company_ids[idx],
            years=self.years[idx],
            X=self.X[idx],
            grades=None if self.grades is None else tuple(self.grades[i] for i in idx),
            synthetic=self.synthetic[idx],
        )

    def with_features(self, X: np.ndarray) -> "Dataset":
        return replace(self, X=np.asarray(X, dtype=np.float64))

    def records(self) -> Iterator[CompanyYearRecord]:
        for i in range(len(self)):
            label = None if self.grades is None else self.grades[i]
            yield CompanyYearRecord(str(self.company_ids[i]), int(self.years[i]), self.X[i].copy(), label)


def _parse_cell(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        return math.nan
    return value if math.isfinite(value) else math.nan


def load_financials(path: str | Path, manifest: FeatureManifest) -> list[CompanyYearRecord]:
    """Read one record per data row of a feature file."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"feature file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        absent = [c for c in (*KEY_COLUMNS, *manifest.names) if c not in header]
        if absent:
            raise DataError(f"{path}: header lacks required columns: {', '.join(absent)}")
        pos = {name: header.index(name) for name in (*KEY_COLUMNS, *manifest.names)}
        feature_pos = [pos[n] for n in manifest.names]
        records = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {line} has {len(row)} cells, header has {len(header)}")
            company = row[pos["company_id"]].strip()
            if not company:
                raise DataError(f"{path}: row {line} has an empty company_id")
            try:
                year = int(row[pos["fiscal_year"]])
            except ValueError:
                raise DataError(f"{path}: row {line} has a malformed fiscal_year {row[pos['fiscal_year']]!r}") from None
            values = np.array([_parse_cell(row[p]) for p in feature_pos], dtype=np.float64)
            records.append(CompanyYearRecord(company, year, values))
    return records


def read_labels(path: str | Path, scale: RatingScale) -> dict[tuple[str, int], str]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"label file not found: {path}")
    labels: dict[tuple[str, int], str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(LABEL_COLUMNS) <= {f.strip() for f in reader.fieldnames}:
            raise DataError(f"{path}: label file needs columns {', '.join(LABEL_COLUMNS)}")
        for row in reader:
            row = {k.strip(): (v or "").strip() for k, v in row.items()}
            try:
                key = (row["company_id"], int(row["fiscal_year"]))
            except ValueError:
                raise DataError(f"{path}: row {reader.line_num} has a malformed fiscal_year") from None
            grade = row["rating"]
            parse_grade(grade, scale)
            if key in labels:
                raise DataError(f"{path}: duplicate label for company {key[0]!r} year {key[1]}")
            labels[key] = grade
    return labels


def join_labels(
    records: Iterable[CompanyYearRecord], labels_path: str | Path, scale: RatingScale | None = None
) -> list[CompanyYearRecord]:
    """Attach grades by (company_id, fiscal_year); unmatched rows stay unlabeled."""
    labels = read_labels(labels_path, scale if scale is not None else RatingScale())
    return [replace(r, label=labels.get((r.company_id, r.fiscal_year), r.label)) for r in records]


def filter_complete(
    records: Iterable[CompanyYearRecord],
    period: tuple[int, int] = DEFAULT_PERIOD,
    manifest: FeatureManifest | None = None,
    scale: RatingScale | None = None,
    class_map: ClassIndexMap | None = None,
    require_labels: bool = True,
) -> Dataset:
    """Keep only companies with a complete, labeled record for every year.

    ``period`` is an inclusive (first, last) year range. Exclusion is
    company-level: one gap anywhere drops all of that company's years.
    """
    first, last = period
    if last < first:
        raise ConfigError(f"period end {last} precedes start {first}")
    years = list(range(first, last + 1))
    scale = scale if scale is not None else RatingScale()
    by_company: dict[str, dict[int, CompanyYearRecord]] = {}
    n_features = None
    for r in records:
        n_features = len(r.values) if n_features is None else n_features
        if len(r.values) != n_features:
            raise DataError(f"record ({r.company_id}, {r.fiscal_year}) has {len(r.values)} values, expected {n_features}")
        per_year = by_company.setdefault(r.company_id, {})
        if r.fiscal_year in per_year:
            raise DataError(f"duplicate record for company {r.company_id!r} year {r.fiscal_year}")
        per_year[r.fiscal_year] = r
    if manifest is None:
        manifest = FeatureManifest.default() if n_features in (None, 43) else FeatureManifest.generic(n_features)
    if n_features is not None and n_features != len(manifest):
        raise DataError(f"records have {n_features} values, manifest has {len(manifest)}")

    kept: list[CompanyYearRecord] = []
    n_companies = 0
    for company, per_year in by_company.items():
        rows = [per_year.get(y) for y in years]
        if any(r is None or not r.complete or (require_labels and r.label is None) for r in rows):
            continue
        n_companies += 1
        kept.extend(rows)
    logger.info("completeness filter kept %d of %d companies", n_companies, len(by_company))
    if not kept:
        logger.warning("completeness filter left no companies for period %d-%d", first, last)

    labeled = require_labels and all(r.label is not None for r in kept)
    grades = tuple(r.label for r in kept) if labeled else None
    if grades is not None and class_map is None and kept:
        class_map = build_class_map(grades, scale)
    X = np.array([r.values for r in kept], dtype=np.float64).reshape(len(kept), len(manifest))
    return Dataset(
        company_ids=np.array([r.company_id for r in kept], dtype=object),
        years=np.array([r.fiscal_year for r in kept], dtype=np.int64),
        X=X,
        manifest=manifest,
        grades=grades,
        class_map=class_map,
    )


def records_to_dataset(records: Sequence[CompanyYearRecord], manifest: FeatureManifest) -> Dataset:
    """Wrap complete, unlabeled rows (e.g. a scoring cohort) without the period filter."""
    incomplete = [(r.company_id, r.fiscal_year) for r in records if not r.complete]
    if incomplete:
        raise DataError(f"{len(incomplete)} rows have missing values, first: {incomplete[0]}")
    X = np.array([r.values for r in records], dtype=np.float64).reshape(len(records), len(manifest))
    return Dataset(
        company_ids=np.array([r.company_id for r in records], dtype=object),
        years=np.array([r.fiscal_year for r in records], dtype=np.int64),
        X=X,
        manifest=manifest,
    )


def _format(value: float) -> str:
    return "" if not math.isfinite(value) else repr(float(value))


def write_financials(path: str | Path, records: Iterable[CompanyYearRecord], manifest: FeatureManifest) -> None:
    """Inverse of :func:`load_financials`; floats use ``repr`` so reloading is exact."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*KEY_COLUMNS, *manifest.names])
        for r in records:
            writer.writerow([r.company_id, r.fiscal_year, *(_format(v) for v in r.values)])


def write_labels(path: str | Path, records: Iterable[CompanyYearRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LABEL_COLUMNS)
        for r in records:
            if r.label is not None:
                writer.writerow([r.company_id, r.fiscal_year, r.label])
