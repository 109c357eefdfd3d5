"""Assemble the 19-per-channel feature table from the three families."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import (
    SCHEMA_VERSION,
    EpochSet,
    FeatureDescriptor,
    FeatureMatrix,
    atomic_write_bytes,
    atomic_write_text,
    check_schema,
    dump_json,
)
from .spectral import EEG_BANDS, BandSet, WelchConfig, spectral_feature_block
from .stats import stat_feature_block
from .wavelet import DEFAULT_SCALES, MorletParams, PcaModel, ScaleGrid, cwt_magnitudes, wavelet_feature_block


@dataclass(frozen=True)
class FeatureConfig:
    welch: WelchConfig = field(default_factory=WelchConfig)
    bands: BandSet = EEG_BANDS
    scales: ScaleGrid = DEFAULT_SCALES
    morlet: MorletParams = MorletParams()

    def to_dict(self) -> dict:
        return {
            "welch_segment_len": self.welch.segment_len,
            "welch_overlap_step": self.welch.overlap_step,
            "bands": [list(b) for b in self.bands.bands],
            "scales": list(self.scales.scales),
            "omega0": self.morlet.omega0,
        }


class FeatureExtractor:
    """Per-epoch spectral and statistical features plus fold-fitted wavelet PCA.

    The spectral, statistical and |CWT| computations depend on one epoch at
    a time, so they are done once for the whole set; only the wavelet PCA
    needs fitting, and `matrix` fits it on the rows it is told to.
    """

    def __init__(self, epochs: EpochSet, cfg: FeatureConfig = FeatureConfig()):
        self.epochs = epochs
        self.cfg = cfg
        self.spectral = spectral_feature_block(epochs, cfg.welch, cfg.bands)
        self.stats = stat_feature_block(epochs)
        self.magnitudes = cwt_magnitudes(epochs, cfg.scales, cfg.morlet)

    def matrix(self, rows, pca_models: list[list[PcaModel]] | None = None):
        """Feature table for `rows`; fits wavelet PCA on them unless models are given."""
        rows = np.asarray(rows)
        sub = self.epochs.subset(rows)
        wav, models = wavelet_feature_block(
            sub, self.cfg.scales, self.cfg.morlet, pca_models, magnitudes=self.magnitudes[rows]
        )
        fm = FeatureMatrix.hstack([self.spectral.rows(rows), wav, self.stats.rows(rows)])
        return fm, models


def extract_features(
    epochs: EpochSet, cfg: FeatureConfig = FeatureConfig(), pca_models=None
) -> tuple[FeatureMatrix, list[list[PcaModel]]]:
    """Spectral (6), wavelet (6) and statistical (7) features per channel, family-major."""
    return FeatureExtractor(epochs, cfg).matrix(np.arange(epochs.n_epochs), pca_models)


def save_features(fm: FeatureMatrix, path, pca_models=None, extra: dict | None = None) -> Path:
    """Write features.json (descriptors, labels, metadata) and features.bin (float64 LE, row-major)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "n_rows": int(fm.values.shape[0]),
        "n_features": fm.n_features,
        "dtype": "f64le",
        "order": "row,feature",
        "descriptors": [d.to_dict() for d in fm.descriptors],
        "labels": [int(v) for v in fm.labels],
        "subjects": None if fm.subjects is None else [int(v) for v in fm.subjects],
        "pca_models": None if pca_models is None else [[m.to_dict() for m in row] for row in pca_models],
    }
    doc.update(extra or {})
    atomic_write_bytes(path / "features.bin", fm.values.astype("<f8").tobytes(order="C"))
    atomic_write_text(path / "features.json", dump_json(doc))
    return path


def load_features(path) -> tuple[FeatureMatrix, dict]:
    """Inverse of `save_features`; also returns the parsed features.json."""
    path = Path(path)
    try:
        doc = json.loads((path / "features.json").read_text(encoding="utf-8"))
        raw = (path / "features.bin").read_bytes()
    except FileNotFoundError as exc:
        raise FileNotFoundError(f"missing feature table in {path}: {exc.filename}") from exc
    check_schema(doc, "feature table")
    shape = (int(doc["n_rows"]), int(doc["n_features"]))
    if len(raw) != shape[0] * shape[1] * 8:
        raise ValueError(f"features.bin has {len(raw)} bytes, expected {shape[0] * shape[1] * 8}")
    values = np.frombuffer(raw, dtype="<f8").reshape(shape)
    fm = FeatureMatrix(values, tuple(FeatureDescriptor.from_dict(d) for d in doc["descriptors"]),
                       doc["labels"], doc["subjects"])
    return fm, doc
