"""Run configuration: one YAML document, every key optional.

Example::

    paths:
      features: data/features.csv
      labels: data/labels.csv
      out_dir: runs/cls50
    period: [2010, 2016]
    preprocess: {train_fraction: 0.8, split_seed: 0, smote_k: 5}
    model: {head: classification, hidden_width: 50, hidden_layers: 3}
    train: {epochs: 3000, seed: 0, optimizer: {kind: adam, learning_rate: 0.001}}
    sweep: {widths: [10, 25, 50, 100, 200]}
    synth: {companies: 306, seed: 0}
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from credit_mlp.errors import ConfigError
from credit_mlp.ingest import DEFAULT_PERIOD, FeatureManifest
from credit_mlp.neural_net import OptimizerConfig
from credit_mlp.rating_scale import RatingScale
from credit_mlp.synth import SynthConfig
from credit_mlp.trainer import TrainConfig


@dataclass
class Paths:
    features: str | None = None
    labels: str | None = None
    manifest: str | None = None
    model: str | None = None
    out_dir: str = "out"


@dataclass
class PreprocessConfig:
    train_fraction: float = 0.8
    split_seed: int = 0
    smote: bool = True
    smote_k: int = 5
    smote_seed: int = 0
    normalization: str = "train"  # or "full"
    by_company: bool = False


@dataclass
class ModelSection:
    hidden_layers: int = 3
    hidden_width: int = 50
    head: str = "classification"
    activation: str = "relu"


@dataclass
class RunConfig:
    paths: Paths = field(default_factory=Paths)
    scale: RatingScale = field(default_factory=RatingScale)
    period: tuple[int, int] = DEFAULT_PERIOD
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainConfig = field(default_factory=TrainConfig)
    sweep_widths: tuple[int, ...] = (10, 25, 50, 100, 200)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def manifest(self) -> FeatureManifest:
        return FeatureManifest.load(self.paths.manifest) if self.paths.manifest else FeatureManifest.default()


def _build(cls, section, name):
    if section is None:
        return cls()
    if not isinstance(section, dict):
        raise ConfigError(f"config section {name!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(section) - known)
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {', '.join(unknown)}")
    try:
        return cls(**section)
    except TypeError as exc:
        raise ConfigError(f"bad {name!r} section: {exc}") from None


def from_dict(doc: dict | None) -> RunConfig:
    doc = dict(doc or {})
    unknown = sorted(set(doc) - {"paths", "scale", "period", "preprocess", "model", "train", "sweep", "synth"})
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(unknown)}")
    train_doc = dict(doc.get("train") or {})
    if "optimizer" in train_doc:
        train_doc["optimizer"] = _build(OptimizerConfig, train_doc["optimizer"], "train.optimizer")
    scale = RatingScale.from_config(doc.get("scale"))
    synth_doc = dict(doc.get("synth") or {})
    synth_doc.setdefault("scale", list(scale.grades))
    period = doc.get("period", DEFAULT_PERIOD)
    if not (isinstance(period, (list, tuple)) and len(period) == 2):
        raise ConfigError("period must be a [first_year, last_year] pair")
    widths = (doc.get("sweep") or {}).get("widths", RunConfig.sweep_widths)
    try:
        synth = SynthConfig.from_dict(synth_doc)
    except TypeError as exc:
        raise ConfigError(f"bad 'synth' section: {exc}") from None
    return RunConfig(
        paths=_build(Paths, doc.get("paths"), "paths"),
        scale=scale,
        period=(int(period[0]), int(period[1])),
        preprocess=_build(PreprocessConfig, doc.get("preprocess"), "preprocess"),
        model=_build(ModelSection, doc.get("model"), "model"),
        train=_build(TrainConfig, train_doc, "train"),
        sweep_widths=tuple(int(w) for w in widths),
        synth=synth,
    )


def load_run_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    if doc is not None and not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return from_dict(doc)


def with_overrides(cfg: RunConfig, *, seed=None, out_dir=None, head=None, width=None, epochs=None) -> RunConfig:
    """Apply the common CLI flags. ``seed`` sets every seed in the pipeline."""
    if out_dir is not None:
        cfg = replace(cfg, paths=replace(cfg.paths, out_dir=str(out_dir)))
    if head is not None:
        cfg = replace(cfg, model=replace(cfg.model, head=head))
    if width is not None:
        cfg = replace(cfg, model=replace(cfg.model, hidden_width=int(width)))
    if epochs is not None:
        cfg = replace(cfg, train=replace(cfg.train, epochs=int(epochs)))
    if seed is not None:
        seed = int(seed)
        cfg = replace(
            cfg,
            preprocess=replace(cfg.preprocess, split_seed=seed, smote_seed=seed),
            train=replace(cfg.train, seed=seed),
            synth=replace(cfg.synth, seed=seed),
        )
    return cfg
