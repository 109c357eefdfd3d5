"""Leave-one-subject-out evaluation, feature-set variants and channel saliency."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from sklearn.model_selection import train_test_split

from .data import EpochSet, FeatureDescriptor, TaskSpec, select_task
from .features import FeatureConfig, FeatureExtractor
from .mlp import MlpConfig, SearchSpace, TABLE2, predict, random_search, train
from .preprocess import standardize_apply, standardize_fit
from .selection import EmptySelectionError, MiConfig, SelectionReport, SffsConfig, hybrid_select

log = logging.getLogger(__name__)

VARIANTS = ("all_features", "mi_only", "hybrid")
VARIANT_ALIASES = {"all": "all_features", "mi": "mi_only", "hybrid": "hybrid",
                   "all_features": "all_features", "mi_only": "mi_only"}


class LeakageError(AssertionError):
    """A held-out row reached a fitting step."""


class LeakageGuard:
    def __init__(self, test_rows):
        self.test_rows = frozenset(int(i) for i in np.asarray(test_rows).ravel())
        self.checks: list[str] = []

    def check(self, rows, stage: str) -> None:
        rows = {int(i) for i in np.asarray(rows).ravel()}
        overlap = rows & self.test_rows
        if overlap:
            raise LeakageError(f"{len(overlap)} test row(s) reached {stage}")
        self.checks.append(stage)


def accuracy(predictions, labels) -> float:
    """Percent of matching entries."""
    p = np.asarray(predictions).ravel()
    y = np.asarray(labels).ravel()
    if p.size != y.size:
        raise ValueError("predictions and labels differ in length")
    if p.size == 0:
        raise ValueError("empty input")
    return 100.0 * float(np.sum(p == y)) / p.size


def loso_folds(epochs_or_subjects) -> list[tuple[np.ndarray, np.ndarray]]:
    """One (train, test) index pair per subject, in ascending subject id order."""
    subjects = getattr(epochs_or_subjects, "subjects", epochs_or_subjects)
    subjects = np.asarray(subjects).ravel()
    ids = np.unique(subjects)
    if ids.size < 2:
        raise ValueError("leave-one-subject-out needs at least 2 subjects")
    return [(np.flatnonzero(subjects != s), np.flatnonzero(subjects == s)) for s in ids]


# -- saliency -----------------------------------------------------------------


@dataclass
class SaliencyMap:
    counts: np.ndarray
    channel_names: tuple[str, ...] = ()

    @property
    def significance(self) -> np.ndarray:
        km = self.counts.max() if self.counts.size else 0
        if km == 0:
            return np.zeros(self.counts.size)
        return self.counts / km

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["channel_index", "channel_name", "k", "significance"])
        names = self.channel_names or tuple(f"ch{i}" for i in range(self.counts.size))
        for i, (k, s) in enumerate(zip(self.counts, self.significance)):
            w.writerow([i, names[i], int(k), repr(float(s))])
        return buf.getvalue()

    def top(self, n: int) -> list[int]:
        """Indices of the n most significant channels (ties to lower index)."""
        return [int(i) for i in np.argsort(-self.counts, kind="stable")[:n]]


def channel_significance(final_subset: Sequence[int], descriptors: Sequence[FeatureDescriptor],
                         n_channels: int | None = None, channel_names=()) -> SaliencyMap:
    """k_i = selected features on channel i; significance k_i / max_j k_j."""
    if len(final_subset) == 0:
        raise ValueError("empty feature subset")
    if n_channels is None:
        n_channels = max(d.channel_index for d in descriptors) + 1
    counts = np.zeros(n_channels, dtype=np.int64)
    for i in final_subset:
        counts[descriptors[i].channel_index] += 1
    return SaliencyMap(counts, tuple(channel_names))


# -- task runs ----------------------------------------------------------------


@dataclass(frozen=True)
class EvalConfig:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    mi: MiConfig = MiConfig()
    sffs: SffsConfig = SffsConfig()
    criterion_folds: int = 5
    mlp_mode: str = "table2"  # "table2" | "fixed" | "search"
    mlp: MlpConfig | None = None
    search: SearchSpace = SearchSpace()
    protocol: str = "loso"  # "loso" | "holdout"
    seed: int = 0

    def __post_init__(self):
        if self.mlp_mode not in ("table2", "fixed", "search"):
            raise ValueError(f"unknown mlp_mode {self.mlp_mode!r}")
        if self.mlp_mode == "fixed" and self.mlp is None:
            raise ValueError("mlp_mode='fixed' needs an MlpConfig")
        if self.protocol not in ("loso", "holdout"):
            raise ValueError(f"unknown protocol {self.protocol!r}")

    def to_dict(self) -> dict:
        return {
            "features": self.features.to_dict(),
            "mi_n_bins": self.mi.n_bins,
            "mi_threshold": self.mi.threshold,
            "sffs_k_max": self.sffs.k_max,
            "sffs_patience": self.sffs.patience,
            "criterion_folds": self.criterion_folds,
            "mlp_mode": self.mlp_mode,
            "mlp": None if self.mlp is None else self.mlp.to_dict(),
            "search_trials": self.search.n_trials,
            "protocol": self.protocol,
            "seed": self.seed,
        }


@dataclass
class LosoResult:
    task_id: str
    variant: str
    protocol: str
    fold_keys: list[str]
    accuracies: list[float | None]  # percent; None for a failed fold

    @property
    def valid(self) -> np.ndarray:
        return np.array([a for a in self.accuracies if a is not None], dtype=float)

    @property
    def mean(self) -> float:
        v = self.valid
        return float(np.mean(v)) if v.size else float("nan")

    @property
    def std(self) -> float:
        v = self.valid
        return float(np.std(v)) if v.size else float("nan")

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "per_fold": {k: a for k, a in zip(self.fold_keys, self.accuracies)},
            "mean": self.mean,
            "std": self.std,
            "failed_folds": [k for k, a in zip(self.fold_keys, self.accuracies) if a is None],
        }


@dataclass
class TaskRun:
    result: LosoResult
    selections: list[SelectionReport | None]
    saliency: SaliencyMap
    n_features: list[int]
    guard_checks: int


Predictor = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def _fold_seed(master: int, fold: int) -> int:
    return int(np.random.SeedSequence([master, fold]).generate_state(1)[0])


def _mlp_config(cfg: EvalConfig, task_id: str, seed: int) -> MlpConfig:
    from dataclasses import replace

    base = TABLE2[task_id] if cfg.mlp_mode == "table2" else cfg.mlp
    return replace(base, seed=seed)


def _folds(epochs: EpochSet, cfg: EvalConfig):
    if cfg.protocol == "loso":
        return [(f"subject_{int(epochs.subjects[te[0]])}", tr, te) for tr, te in loso_folds(epochs)]
    idx = np.arange(epochs.n_epochs)
    tr, te = train_test_split(idx, test_size=0.2, stratify=epochs.labels, random_state=cfg.seed)
    return [("holdout", np.sort(tr), np.sort(te))]


def prepare_task(epochs: EpochSet, task: TaskSpec, cfg: EvalConfig = EvalConfig()) -> FeatureExtractor:
    """Task-restricted epochs with their per-epoch features precomputed.

    Pass the result to `run_task` to share the work across variants.
    """
    return FeatureExtractor(select_task(epochs, task), cfg.features)


def run_task(
    epochs: EpochSet,
    task: TaskSpec,
    variant: str,
    cfg: EvalConfig = EvalConfig(),
    predictor: Predictor | None = None,
    extractor: FeatureExtractor | None = None,
) -> TaskRun:
    """Evaluate one pairwise task with one feature-set variant.

    Every fold extracts features, fits the wavelet PCA, the standardizer,
    the selection stages and (optionally) the MLP search on its training
    rows only. `predictor(X_train, y_train, X_test, test_rows)` replaces
    the MLP when given; `test_rows` index the task-restricted epoch set.
    `extractor` must come from `prepare_task(epochs, task, cfg)`.
    """
    variant = VARIANT_ALIASES[variant]
    if extractor is None:
        extractor = prepare_task(epochs, task, cfg)
    ep = extractor.epochs
    keys, accs, reports, n_feats = [], [], [], []
    counts = np.zeros(ep.n_channels, dtype=np.int64)
    n_checks = 0
    for f_idx, (key, tr, te) in enumerate(_folds(ep, cfg)):
        seed = _fold_seed(cfg.seed, f_idx)
        guard = LeakageGuard(te)
        guard.check(tr, "pca_fit")
        F_tr, models = extractor.matrix(tr)
        F_te, _ = extractor.matrix(te, models)
        guard.check(tr, "standardize_fit")
        scaler = standardize_fit(F_tr)
        F_tr, F_te = standardize_apply(scaler, F_tr), standardize_apply(scaler, F_te)

        report = None
        if variant == "all_features":
            cols = list(range(F_tr.n_features))
        else:
            guard.check(tr, "mi_filter")
            if variant == "hybrid":
                guard.check(tr, "sffs")
            try:
                report = hybrid_select(
                    F_tr, cfg.mi, SffsConfig(cfg.sffs.k_max, cfg.sffs.patience, seed=seed),
                    cfg.criterion_folds, run_sffs=variant == "hybrid",
                )
            except EmptySelectionError as exc:
                log.warning("fold %s failed: %s", key, exc)
                keys.append(key)
                accs.append(None)
                reports.append(None)
                n_feats.append(0)
                continue
            cols = report.final_subset
        reports.append(report)
        n_feats.append(len(cols))
        for c in cols:
            counts[F_tr.descriptors[c].channel_index] += 1

        X_tr, y_tr = F_tr.values[:, cols], F_tr.labels
        X_te, y_te = F_te.values[:, cols], F_te.labels
        if predictor is not None:
            pred = predictor(X_tr, y_tr, X_te, te)
        else:
            if cfg.mlp_mode == "search":
                guard.check(tr, "random_search")
                mlp_cfg, _ = random_search(X_tr, y_tr, cfg.search, seed)
            else:
                mlp_cfg = _mlp_config(cfg, task.task_id.value, seed)
            model, _ = train(X_tr, y_tr, mlp_cfg)
            pred = predict(model, X_te)
        keys.append(key)
        accs.append(accuracy(pred, y_te))
        n_checks += len(guard.checks)

    result = LosoResult(task.task_id.value, variant, cfg.protocol, keys, accs)
    saliency = SaliencyMap(counts, ep.channel_names)
    return TaskRun(result, reports, saliency, n_feats, n_checks)
