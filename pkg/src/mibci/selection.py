"""Two-stage feature selection: mutual-information filter, then floating search.

The floating search (SFFS) treats its criterion as a black box mapping a
sorted tuple of column indices to a real score. `SvmCvCriterion` is the
criterion used by the pipeline: stratified k-fold accuracy of the linear
SVM in :mod:`mibci.svm`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import rankdata
from sklearn.model_selection import StratifiedKFold

from .data import SCHEMA_VERSION, FeatureMatrix, check_schema
from .svm import svm_train_many


class EmptySelectionError(RuntimeError):
    """No feature survived the mutual-information threshold."""


@dataclass(frozen=True)
class MiConfig:
    n_bins: int = 16
    threshold: float = 0.03  # nats

    def __post_init__(self):
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")
        if self.threshold < 0:
            raise ValueError("threshold must be >= 0")


@dataclass(frozen=True)
class SffsConfig:
    k_max: int = 60
    patience: int = 10
    k_min: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.k_min != 2:
            raise ValueError("k_min is fixed at 2")
        if self.k_max < self.k_min:
            raise ValueError("k_max must be >= k_min")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


@dataclass
class SelectionReport:
    mi_values: list[float]
    stage1_kept: list[int]
    trajectory: list[tuple[str, int, float]] = field(default_factory=list)
    final_subset: list[int] = field(default_factory=list)
    J_final: float | None = None

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "mi_values": [float(v) for v in self.mi_values],
            "stage1_kept": [int(i) for i in self.stage1_kept],
            "trajectory": [[a, int(i), float(j)] for a, i, j in self.trajectory],
            "final_subset": [int(i) for i in self.final_subset],
            "J_final": None if self.J_final is None else float(self.J_final),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionReport":
        check_schema(d, "selection report")
        return cls(
            list(d["mi_values"]),
            list(d["stage1_kept"]),
            [(a, int(i), float(j)) for a, i, j in d["trajectory"]],
            list(d["final_subset"]),
            None if d["J_final"] is None else float(d["J_final"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SelectionReport":
        return cls.from_dict(json.loads(text))


# -- stage 1 ------------------------------------------------------------------


def quantile_bins(x, n_bins: int) -> np.ndarray:
    """Equal-frequency bin index from the rank of each value; ties share a bin."""
    x = np.asarray(x, dtype=float)
    rank = rankdata(x, method="min") - 1  # 0-based, order-only
    return np.minimum((rank * n_bins) // x.size, n_bins - 1).astype(np.int64)


def estimate_mi(feature, labels, n_bins: int = 16) -> float:
    """Plug-in mutual information (nats) between a binned feature and labels."""
    feature = np.asarray(feature, dtype=float).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if feature.size != labels.size:
        raise ValueError(f"length mismatch: {feature.size} values vs {labels.size} labels")
    n = feature.size
    if n == 0:
        raise ValueError("empty input")
    bx = quantile_bins(feature, n_bins)
    _, by = np.unique(labels, return_inverse=True)
    ny = int(by.max()) + 1
    joint = np.bincount(bx * ny + by, minlength=n_bins * ny).reshape(n_bins, ny).astype(float)
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    outer = px * py
    terms = joint[nz] / n * np.log(joint[nz] * n / outer[nz])
    return max(0.0, float(terms.sum()))


def mi_filter(F: FeatureMatrix, cfg: MiConfig = MiConfig()) -> tuple[list[int], np.ndarray]:
    """Keep columns with I(X_i; Y) strictly above the threshold, in column order."""
    if F.n_features == 0 or F.values.shape[0] == 0:
        raise ValueError("empty feature matrix")
    mi = np.array([estimate_mi(F.values[:, i], F.labels, cfg.n_bins) for i in range(F.n_features)])
    kept = [int(i) for i in np.flatnonzero(mi > cfg.threshold)]
    if not kept:
        raise EmptySelectionError(
            f"no feature exceeds the MI threshold {cfg.threshold} (max MI {mi.max():.4g})"
        )
    return kept, mi


# -- stage 2 ------------------------------------------------------------------

Criterion = Callable[[tuple[int, ...]], float]


def _checked(value, subset) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"criterion returned non-finite value {value} for subset {subset}")
    return value


def sffs(
    candidates: Sequence[int],
    J: Criterion,
    cfg: SffsConfig = SffsConfig(),
    J_many: Callable[[list[tuple[int, ...]]], Sequence[float]] | None = None,
    report: SelectionReport | None = None,
) -> SelectionReport:
    """Sequential forward floating selection over `candidates`.

    Starting from the empty set, each round adds the candidate maximizing
    J, then repeatedly drops the member whose removal gives the largest J
    as long as that beats the current J, the set has more than two members,
    and the member is not the one just added. Ties go to the lowest index.
    The search stops at k_max members, after `patience` rounds without a
    new best, or when no unvisited move remains. The best subset of at
    least two members ever visited is returned.

    `J_many`, when given, scores a list of subsets in one call and must
    agree with `J`.
    """
    pool = sorted({int(c) for c in candidates})
    if len(pool) < cfg.k_min:
        raise ValueError(f"need at least {cfg.k_min} candidates, got {len(pool)}")
    if report is None:
        report = SelectionReport(mi_values=[], stage1_kept=list(pool))

    def score_all(subsets: list[tuple[int, ...]]) -> list[float]:
        vals = J_many(subsets) if J_many is not None else [J(s) for s in subsets]
        return [_checked(v, s) for v, s in zip(vals, subsets)]

    current: tuple[int, ...] = ()
    J_cur = -math.inf
    visited = {current}
    best, J_best = None, -math.inf
    stale = 0

    def consider(subset, value) -> bool:
        nonlocal best, J_best
        if len(subset) >= cfg.k_min and value > J_best:
            best, J_best = subset, value
            return True
        return False

    while len(current) < cfg.k_max:
        # inclusion
        options = [x for x in pool if x not in current and tuple(sorted(current + (x,))) not in visited]
        if not options:
            break
        trials = [tuple(sorted(current + (x,))) for x in options]
        values = score_all(trials)
        i = int(np.argmax(values))  # first maximum = lowest index
        added = options[i]
        current, J_cur = trials[i], values[i]
        visited.add(current)
        report.trajectory.append(("include", added, J_cur))
        improved = consider(current, J_cur)

        # conditional exclusion
        while len(current) > cfg.k_min:
            removable = [x for x in current if x != added and tuple(y for y in current if y != x) not in visited]
            if not removable:
                break
            trials = [tuple(y for y in current if y != x) for x in removable]
            values = score_all(trials)
            i = int(np.argmax(values))
            if not values[i] > J_cur:
                break
            current, J_cur = trials[i], values[i]
            visited.add(current)
            report.trajectory.append(("exclude", removable[i], J_cur))
            improved = consider(current, J_cur) or improved

        if len(current) >= cfg.k_min:
            stale = 0 if improved else stale + 1
            if stale >= cfg.patience:
                break

    report.final_subset = list(best)
    report.J_final = J_best
    return report


# -- SVM criterion --------------------------------------------------------------


class SvmCvCriterion:
    """Mean stratified k-fold accuracy of the linear SVM on a column subset.

    Fold assignment depends only on the labels and `seed`, so every subset
    is scored on the same splits. Calls are deterministic.
    """

    def __init__(self, X, labels, folds: int = 5, seed: int = 0, C: float = 1.0, epochs: int = 200,
                 max_batch_elems: int = 4_000_000):
        self.X = np.asarray(X, dtype=float)
        y01 = np.asarray(labels).reshape(-1)
        classes, counts = np.unique(y01, return_counts=True)
        if classes.size != 2:
            raise ValueError("criterion needs exactly two classes")
        if counts.min() < folds:
            raise ValueError(f"smallest class has {counts.min()} members, fewer than {folds} folds")
        self.y = np.where(y01 == classes[1], 1.0, -1.0)
        splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
        self.train_masks = np.zeros((folds, self.y.size), bool)
        for f, (tr, _) in enumerate(splitter.split(np.zeros(self.y.size), y01)):
            self.train_masks[f, tr] = True
        self.folds, self.seed, self.C, self.epochs = folds, seed, C, epochs
        self.max_batch_elems = max_batch_elems
        self.n_calls = 0

    def __call__(self, subset) -> float:
        return self.many([tuple(subset)])[0]

    def many(self, subsets: list[tuple[int, ...]]) -> list[float]:
        if not subsets:
            return []
        out: list[float] = []
        k = len(subsets[0])
        if k == 0 or any(len(s) != k for s in subsets):
            # mixed sizes: score one at a time
            if any(len(s) == 0 for s in subsets):
                raise ValueError("empty subset")
            return [self.many([s])[0] for s in subsets]
        n, F = self.y.size, self.folds
        per = max(1, self.max_batch_elems // (F * n * k))
        for start in range(0, len(subsets), per):
            chunk = [sorted(s) for s in subsets[start:start + per]]
            Xs = self.X[:, np.asarray(chunk)].transpose(1, 0, 2)  # (S, n, k)
            S = Xs.shape[0]
            Xb = np.repeat(Xs, F, axis=0)
            mask = np.tile(self.train_masks, (S, 1))
            yb = np.broadcast_to(self.y, (S * F, n))
            w, b = svm_train_many(Xb, yb, mask, self.C, self.epochs)
            scores = np.matmul(Xb, w[:, :, None])[:, :, 0] + b[:, None]
            pred = np.where(scores >= 0, 1.0, -1.0)
            test = ~mask
            acc = ((pred == yb) & test).sum(axis=1) / test.sum(axis=1)
            out.extend(acc.reshape(S, F).mean(axis=1).tolist())
        self.n_calls += len(subsets)
        return out


def criterion_svm_cv(F: FeatureMatrix, subset, folds: int = 5, seed: int = 0, C: float = 1.0,
                     epochs: int = 200) -> float:
    subset = tuple(subset)
    if not subset:
        raise ValueError("empty subset")
    return SvmCvCriterion(F.values, F.labels, folds, seed, C, epochs)(subset)


def hybrid_select(
    F: FeatureMatrix,
    mi_cfg: MiConfig = MiConfig(),
    sffs_cfg: SffsConfig = SffsConfig(),
    folds: int = 5,
    run_sffs: bool = True,
) -> SelectionReport:
    """MI filter followed (optionally) by SFFS with the SVM criterion."""
    kept, mi = mi_filter(F, mi_cfg)
    report = SelectionReport(mi_values=mi.tolist(), stage1_kept=kept)
    if not run_sffs:
        report.final_subset = list(kept)
        return report
    crit = SvmCvCriterion(F.values, F.labels, folds=folds, seed=sffs_cfg.seed)
    if len(kept) < sffs_cfg.k_min:
        # a lone survivor cannot be searched; it is the selection
        report.final_subset = list(kept)
        report.J_final = crit(tuple(kept))
        return report
    return sffs(kept, crit, sffs_cfg, J_many=crit.many, report=report)
