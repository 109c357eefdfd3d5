"""Domain containers, the epoch-bundle format and pairwise task extraction."""

from __future__ import annotations

import enum
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

SCHEMA_VERSION = 1

# 0=left hand, 1=right hand, 2=feet, 3=tongue
CLASS_NAMES = {0: "left_hand", 1: "right_hand", 2: "feet", 3: "tongue"}

FAMILIES = ("spectral", "wavelet", "statistical")


class BundleError(ValueError):
    """Raised for malformed or inconsistent epoch bundles."""


class EmptyClassError(ValueError):
    """Raised when a task asks for a class that has no epochs."""


class SchemaVersionError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EpochSet:
    """Multichannel epochs with per-epoch class and subject ids.

    Attributes:
        data: float array of shape (n_epochs, n_channels, n_samples)
        fs: sampling rate in Hz
        channel_names: one name per channel
        labels: integer class id per epoch
        subjects: integer subject id per epoch
    """

    data: np.ndarray
    fs: float
    channel_names: tuple[str, ...]
    labels: np.ndarray
    subjects: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ValueError(f"data must be 3-D (epochs, channels, samples), got shape {data.shape}")
        if not self.fs > 0:
            raise ValueError(f"fs must be positive, got {self.fs}")
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        subjects = np.asarray(self.subjects, dtype=np.int64).reshape(-1)
        n = data.shape[0]
        if labels.size != n or subjects.size != n:
            raise ValueError(
                f"labels ({labels.size}) and subjects ({subjects.size}) must match n_epochs ({n})"
            )
        names = tuple(str(c) for c in self.channel_names)
        if len(names) != data.shape[1]:
            raise ValueError(f"{len(names)} channel names for {data.shape[1]} channels")
        if not np.all(np.isfinite(data)):
            raise ValueError("epoch data contains non-finite samples")
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "fs", float(self.fs))
        object.__setattr__(self, "channel_names", names)
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "subjects", _frozen(subjects))

    @property
    def n_epochs(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def n_samples(self) -> int:
        return self.data.shape[2]

    def subset(self, idx) -> "EpochSet":
        idx = np.asarray(idx)
        return EpochSet(self.data[idx], self.fs, self.channel_names, self.labels[idx], self.subjects[idx])


class TaskId(str, enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"
    V = "V"
    VI = "VI"


_TASK_PAIRS = {
    TaskId.I: (0, 1),    # left hand vs right hand
    TaskId.II: (0, 2),   # left hand vs foot
    TaskId.III: (0, 3),  # left hand vs tongue
    TaskId.IV: (1, 2),   # right hand vs foot
    TaskId.V: (1, 3),    # right hand vs tongue
    TaskId.VI: (2, 3),   # foot vs tongue
}


@dataclass(frozen=True)
class TaskSpec:
    task_id: TaskId
    class_a: int
    class_b: int

    def __post_init__(self):
        if self.class_a == self.class_b:
            raise ValueError("class_a and class_b must differ")

    @classmethod
    def from_id(cls, task_id: str | TaskId) -> "TaskSpec":
        tid = TaskId(task_id)
        a, b = _TASK_PAIRS[tid]
        return cls(tid, a, b)


ALL_TASKS = tuple(TaskSpec.from_id(t) for t in TaskId)


@dataclass(frozen=True)
class FeatureDescriptor:
    channel_index: int
    family: str
    name: str

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown feature family {self.family!r}")

    def to_dict(self) -> dict:
        return {"channel_index": int(self.channel_index), "family": self.family, "name": self.name}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureDescriptor":
        return cls(int(d["channel_index"]), d["family"], d["name"])


@dataclass(frozen=True)
class FeatureMatrix:
    """Tabular features: one row per epoch, one descriptor per column."""

    values: np.ndarray
    descriptors: tuple[FeatureDescriptor, ...]
    labels: np.ndarray
    subjects: np.ndarray | None = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {values.shape}")
        descriptors = tuple(self.descriptors)
        if len(descriptors) != values.shape[1]:
            raise ValueError(f"{len(descriptors)} descriptors for {values.shape[1]} columns")
        keys = {(d.channel_index, d.family, d.name) for d in descriptors}
        if len(keys) != len(descriptors):
            raise ValueError("feature descriptors are not unique")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature values contain non-finite entries")
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if labels.size != values.shape[0]:
            raise ValueError("labels length does not match number of rows")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "descriptors", descriptors)
        object.__setattr__(self, "labels", _frozen(labels))
        if self.subjects is not None:
            subjects = np.asarray(self.subjects, dtype=np.int64).reshape(-1)
            if subjects.size != values.shape[0]:
                raise ValueError("subjects length does not match number of rows")
            object.__setattr__(self, "subjects", _frozen(subjects))

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def rows(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx)
        subj = None if self.subjects is None else self.subjects[idx]
        return FeatureMatrix(self.values[idx], self.descriptors, self.labels[idx], subj)

    def columns(self, cols: Sequence[int]) -> "FeatureMatrix":
        cols = list(cols)
        return FeatureMatrix(
            self.values[:, cols], tuple(self.descriptors[c] for c in cols), self.labels, self.subjects
        )

    @staticmethod
    def hstack(blocks: Sequence["FeatureMatrix"]) -> "FeatureMatrix":
        first = blocks[0]
        for b in blocks[1:]:
            if not np.array_equal(b.labels, first.labels):
                raise ValueError("cannot stack feature blocks with different labels")
        return FeatureMatrix(
            np.hstack([b.values for b in blocks]),
            tuple(d for b in blocks for d in b.descriptors),
            first.labels,
            first.subjects,
        )


def select_task(epochs: EpochSet, task: TaskSpec) -> EpochSet:
    """Keep the two classes of `task`, relabelled class_a -> 0 and class_b -> 1."""
    in_a = epochs.labels == task.class_a
    in_b = epochs.labels == task.class_b
    for cls, mask in ((task.class_a, in_a), (task.class_b, in_b)):
        if not mask.any():
            raise EmptyClassError(f"task {task.task_id.value}: class {cls} has no epochs")
    keep = np.flatnonzero(in_a | in_b)
    labels = np.where(in_b[keep], 1, 0)
    return EpochSet(epochs.data[keep], epochs.fs, epochs.channel_names, labels, epochs.subjects[keep])


# -- bundle I/O ---------------------------------------------------------------


def atomic_write_bytes(path: Path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def check_schema(doc: dict, what: str) -> None:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"{what}: schema_version {version!r}, expected {SCHEMA_VERSION}")


def save_epoch_bundle(epochs: EpochSet, path) -> Path:
    """Write `epochs` as a bundle directory (manifest.json + data.bin)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "n_epochs": epochs.n_epochs,
        "n_channels": epochs.n_channels,
        "n_samples": epochs.n_samples,
        "fs_hz": epochs.fs,
        "channel_names": list(epochs.channel_names),
        "labels": [int(v) for v in epochs.labels],
        "subjects": [int(v) for v in epochs.subjects],
        "dtype": "f32le",
        "order": "epoch,channel,sample",
    }
    atomic_write_bytes(path / "data.bin", epochs.data.astype("<f4").tobytes(order="C"))
    atomic_write_text(path / "manifest.json", dump_json(manifest))
    return path


def load_epoch_bundle(path) -> EpochSet:
    path = Path(path)
    try:
        manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise BundleError(f"missing manifest in {path}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise BundleError(f"corrupt manifest in {path}: {exc}") from exc
    # bundles written by other tools may omit schema_version
    if "schema_version" in manifest:
        check_schema(manifest, "epoch bundle")
    try:
        shape = (int(manifest["n_epochs"]), int(manifest["n_channels"]), int(manifest["n_samples"]))
        fs = float(manifest["fs_hz"])
        names = list(manifest["channel_names"])
        labels = manifest["labels"]
        subjects = manifest["subjects"]
    except (KeyError, TypeError, ValueError) as exc:
        raise BundleError(f"corrupt manifest in {path}: {exc!r}") from exc
    if manifest.get("dtype", "f32le") != "f32le" or manifest.get("order", "epoch,channel,sample") != "epoch,channel,sample":
        raise BundleError("unsupported dtype/order in manifest")
    try:
        raw = (path / "data.bin").read_bytes()
    except FileNotFoundError as exc:
        raise BundleError(f"missing data.bin in {path}") from exc
    expected = shape[0] * shape[1] * shape[2] * 4
    if len(raw) != expected:
        raise BundleError(f"dimension mismatch: manifest implies {expected} bytes, data.bin has {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4").reshape(shape)
    if not np.all(np.isfinite(data)):
        raise BundleError("data.bin contains non-finite samples")
    try:
        return EpochSet(data.astype(np.float64), fs, names, labels, subjects)
    except ValueError as exc:
        raise BundleError(str(exc)) from exc
