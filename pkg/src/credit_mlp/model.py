"""Trained-model bundle and its on-disk format.

A model file is UTF-8 JSON holding the network config and weights together
with the normalization statistics, class map, rating scale and feature
manifest, so scoring new cohorts reuses the training preprocessing exactly.
A SHA-256 over the canonical payload guards against edits and truncation.
Floats are written with ``repr`` precision, so a load/save round trip is
lossless and the file bytes depend only on the model contents.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from credit_mlp.errors import ConfigError, DataError
from credit_mlp.ingest import FeatureManifest
from credit_mlp.neural_net import MLPConfig, MLPParams, forward
from credit_mlp.preprocess import NormalizationStats, apply_normalizer
from credit_mlp.rating_scale import ClassIndexMap, RatingScale

FORMAT_NAME = "credit-mlp-model"
FORMAT_VERSION = 1


@dataclass
class CreditModel:
    params: MLPParams
    class_map: ClassIndexMap
    stats: NormalizationStats | None = None
    manifest: FeatureManifest | None = None

    @property
    def config(self) -> MLPConfig:
        return self.params.config

    @property
    def head(self) -> str:
        return self.params.config.head

    @property
    def n_classes(self) -> int:
        return self.class_map.n_classes

    def normalize(self, X: np.ndarray) -> np.ndarray:
        if self.stats is None:
            raise ConfigError("model carries no normalization statistics")
        return apply_normalizer(self.stats, X)

    def output(self, X_normalized: np.ndarray) -> np.ndarray:
        """Probabilities ``(m, C)`` or raw regression scores ``(m,)``."""
        return forward(self.params, np.atleast_2d(X_normalized))

    def payload(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "params": self.params.to_dict(),
            "normalization": None if self.stats is None else self.stats.to_dict(),
            "class_map": list(self.class_map.grades),
            "scale": list(self.class_map.scale.grades),
            "manifest": None if self.manifest is None else [list(e) for e in self.manifest.entries],
        }


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def checksum(payload: dict) -> str:
    return hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest()


def save_model(model: CreditModel, path: str | Path) -> None:
    payload = model.payload()
    doc = {"checksum": checksum(payload), "payload": payload}
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> CreditModel:
    path = Path(path)
    if not path.exists():
        raise DataError(f"model file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        payload = doc["payload"]
        stored = doc["checksum"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: not a model file ({exc})") from None
    if payload.get("format") != FORMAT_NAME:
        raise DataError(f"{path}: unexpected format {payload.get('format')!r}")
    if payload.get("version") != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported model version {payload.get('version')!r}")
    if checksum(payload) != stored:
        raise DataError(f"{path}: checksum mismatch, file is corrupt or was edited")
    config = MLPConfig.from_dict(payload["config"])
    scale = RatingScale(tuple(payload["scale"]))
    norm = payload["normalization"]
    return CreditModel(
        params=MLPParams.from_dict(config, payload["params"]),
        class_map=ClassIndexMap(tuple(payload["class_map"]), scale),
        stats=None if norm is None else NormalizationStats.from_dict(norm),
        manifest=None if payload["manifest"] is None else FeatureManifest(tuple(map(tuple, payload["manifest"]))),
    )
