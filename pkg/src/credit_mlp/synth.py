"""Synthetic company-year panels with persistent, slowly migrating ratings.

Each company draws a first-year class from ``class_weights``; every later
year it moves one notch with probability ``transition_prob``. Features are a
class prototype plus Gaussian noise. Prototypes sit on a latent risk axis
(grade position on the rating scale) with an extra class-specific offset, and
are then mapped to currency-like units whose magnitude differs by orders of
magnitude between features, so normalization matters.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from credit_mlp.errors import ConfigError, DataError
from credit_mlp.ingest import (
    CompanyYearRecord,
    Dataset,
    FeatureManifest,
    filter_complete,
    write_financials,
    write_labels,
)
from credit_mlp.rating_scale import OBSERVED_GRADES, ClassIndexMap, RatingScale

logger = logging.getLogger(__name__)

# Illustrative bi-modal prior: two dominant classes, four rare ones.
DEFAULT_CLASS_WEIGHTS = (0.06, 0.38, 0.08, 0.34, 0.08, 0.06)
DIRECTIONS = ("both", "worse", "better")


@dataclass
class SynthConfig:
    companies: int = 306
    years: int = 7
    start_year: int = 2010
    feature_dim: int = 43
    grades: tuple[str, ...] = OBSERVED_GRADES
    class_weights: tuple[float, ...] = DEFAULT_CLASS_WEIGHTS
    transition_prob: float = 0.07
    transition_direction: str = "both"
    noise: float = 1.0  # latent noise std, relative to one notch of separation
    class_offset: float = 0.5  # std of the class-specific (non-ordinal) prototype component
    incomplete_companies: int = 70  # companies given one missing cell
    prototypes: np.ndarray | None = None  # (C, F) in latent units; generated when None
    seed: int = 0
    world_seed: int | None = None  # prototypes and feature units; defaults to seed
    scale: RatingScale = field(default_factory=RatingScale)

    def __post_init__(self):
        self.grades = tuple(self.grades)
        self.class_weights = tuple(float(w) for w in self.class_weights)
        if self.companies < 0 or self.years < 1 or self.feature_dim < 1:
            raise ConfigError("companies >= 0, years >= 1 and feature_dim >= 1 required")
        if len(self.class_weights) != len(self.grades):
            raise ConfigError(f"{len(self.class_weights)} class weights for {len(self.grades)} classes")
        if any(w < 0 for w in self.class_weights) or not np.isclose(sum(self.class_weights), 1.0, atol=1e-9):
            raise ConfigError("class weights must be non-negative and sum to 1")
        if not 0.0 <= self.transition_prob <= 1.0:
            raise ConfigError(f"transition_prob must lie in [0, 1], got {self.transition_prob}")
        if self.transition_direction not in DIRECTIONS:
            raise ConfigError(f"transition_direction must be one of {DIRECTIONS}")
        if self.noise < 0 or self.class_offset < 0:
            raise ConfigError("noise and class_offset must be non-negative")
        if not 0 <= self.incomplete_companies <= self.companies:
            raise ConfigError("incomplete_companies must lie in [0, companies]")
        if self.prototypes is not None:
            self.prototypes = np.asarray(self.prototypes, dtype=np.float64)
            if self.prototypes.shape != (len(self.grades), self.feature_dim):
                raise ConfigError(f"prototypes must have shape {(len(self.grades), self.feature_dim)}")
        try:
            ClassIndexMap(self.grades, self.scale)
        except DataError as exc:
            raise ConfigError(f"synth grades: {exc}") from None

    @property
    def period(self) -> tuple[int, int]:
        return self.start_year, self.start_year + self.years - 1

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        if "scale" in d:
            d["scale"] = RatingScale.from_config(d["scale"])
        for key in ("grades", "class_weights"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class SynthPanel:
    config: SynthConfig
    manifest: FeatureManifest
    class_map: ClassIndexMap
    records: list[CompanyYearRecord]
    classes: np.ndarray  # (companies, years) true class index
    prototypes: np.ndarray  # (C, F) in feature (currency) units
    noise_scale: np.ndarray  # (F,) per-feature noise std in feature units

    def dataset(self) -> Dataset:
        """Complete-company dataset over the generated period."""
        return filter_complete(self.records, self.config.period, self.manifest, self.config.scale, self.class_map)

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        features, labels = out / "features.csv", out / "labels.csv"
        write_financials(features, self.records, self.manifest)
        write_labels(labels, self.records)
        return features, labels


def _manifest(feature_dim: int) -> FeatureManifest:
    return FeatureManifest.default() if feature_dim == 43 else FeatureManifest.generic(feature_dim)


def latent_prototypes(config: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """``(C, F)`` prototypes: risk position times loadings plus class offsets."""
    positions = np.array([config.scale.index(g) for g in config.grades], dtype=np.float64)
    positions = positions - positions.mean()
    loadings = rng.normal(size=config.feature_dim)
    loadings /= np.linalg.norm(loadings)
    offsets = rng.normal(scale=config.class_offset, size=(len(config.grades), config.feature_dim))
    return positions[:, None] * loadings[None, :] + offsets


def _step(cls: int, n_classes: int, direction: str, rng: np.random.Generator) -> int:
    if n_classes == 1:
        return cls
    if direction == "worse":
        return min(cls + 1, n_classes - 1)
    if direction == "better":
        return max(cls - 1, 0)
    if cls == 0:
        return 1
    if cls == n_classes - 1:
        return cls - 1
    return cls + (1 if rng.random() < 0.5 else -1)


def class_paths(config: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Per-company class index for each year, shape ``(companies, years)``."""
    n_classes = len(config.grades)
    paths = np.empty((config.companies, config.years), dtype=np.int64)
    for i in range(config.companies):
        cls = int(rng.choice(n_classes, p=np.asarray(config.class_weights)))
        paths[i, 0] = cls
        for t in range(1, config.years):
            if rng.random() < config.transition_prob:
                cls = _step(cls, n_classes, config.transition_direction, rng)
            paths[i, t] = cls
    return paths


def generate(config: SynthConfig | None = None) -> SynthPanel:
    """Draw a labeled panel; independent streams keep parts stable across settings.

    Prototypes and feature units depend only on ``world_seed``, so a cohort
    drawn with a different ``seed`` lives in the same feature space as the
    training panel. Changing ``noise`` does not move the class paths.
    """
    config = config if config is not None else SynthConfig()
    world = config.seed if config.world_seed is None else config.world_seed
    proto_ss, unit_ss = np.random.SeedSequence([world, 1]).spawn(2)
    path_ss, noise_ss, miss_ss = np.random.SeedSequence([config.seed, 2]).spawn(3)
    manifest = _manifest(config.feature_dim)
    class_map = ClassIndexMap(config.grades, config.scale)

    latent = config.prototypes if config.prototypes is not None else latent_prototypes(config, np.random.default_rng(proto_ss))
    unit_rng = np.random.default_rng(unit_ss)
    units = 10.0 ** unit_rng.uniform(5.0, 9.0, size=config.feature_dim)
    centre = units * unit_rng.normal(scale=3.0, size=config.feature_dim)
    prototypes = centre + units * latent
    noise_scale = units * config.noise

    paths = class_paths(config, np.random.default_rng(path_ss))
    noise_rng = np.random.default_rng(noise_ss)
    values = prototypes[paths] + noise_rng.normal(size=(*paths.shape, config.feature_dim)) * noise_scale

    miss_rng = np.random.default_rng(miss_ss)
    for i in miss_rng.choice(config.companies, size=config.incomplete_companies, replace=False):
        values[i, miss_rng.integers(config.years), miss_rng.integers(config.feature_dim)] = np.nan

    width = max(4, len(str(max(config.companies - 1, 0))))
    records = [
        CompanyYearRecord(
            f"C{i:0{width}d}",
            config.start_year + t,
            values[i, t].copy(),
            config.grades[paths[i, t]],
        )
        for i in range(config.companies)
        for t in range(config.years)
    ]
    return SynthPanel(config, manifest, class_map, records, paths, prototypes, noise_scale)


def deteriorating_cohort(
    seed: int = 0, world_seed: int = 0, companies: int = 7, years: int = 5, start_year: int = 2016, **overrides
) -> SynthConfig:
    """Small cohort whose ratings only ever worsen, for adverse-event trend checks."""
    params = dict(
        companies=companies,
        years=years,
        start_year=start_year,
        class_weights=(0.3, 0.3, 0.2, 0.2, 0.0, 0.0),
        transition_prob=0.5,
        transition_direction="worse",
        incomplete_companies=0,
        seed=seed,
        world_seed=world_seed,
    )
    params.update(overrides)
    return SynthConfig(**params)
