"""Linear soft-margin SVM trained by averaged full-batch subgradient descent."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    epochs: int = 200
    seed: int = 0

    @property
    def lam(self) -> float:
        return 1.0 / self.C


@dataclass(frozen=True)
class SvmModel:
    weights: np.ndarray
    bias: float
    config: SvmConfig


def hinge_objective(w, b, X, y, lam) -> float:
    """(lam/2)*||w||^2 + mean(max(0, 1 - y*(X@w + b)))."""
    margins = y * (X @ w + b)
    return 0.5 * lam * float(w @ w) + float(np.mean(np.maximum(0.0, 1.0 - margins)))


def _fit(X, y, mask, lam, epochs, trace=None):
    """Averaged subgradient descent on a stack of problems.

    X: (B, n, d), y: (B, n) in {-1, +1}, mask: (B, n) row inclusion.
    Step size 1/(lam * t); the bias is unregularized. After every epoch
    the checkpoint becomes the running average of the iterates if that
    lowers the objective, otherwise it stays put, so the objective is
    non-increasing across checkpoints. Returns the final checkpoint.
    """
    B, n, d = X.shape
    m = mask.astype(float)
    counts = m.sum(axis=1)
    ym = y * m

    def objective(w, b):
        margins = y * (np.matmul(X, w[:, :, None])[:, :, 0] + b[:, None])
        hinge = (np.maximum(0.0, 1.0 - margins) * m).sum(axis=1) / counts
        return 0.5 * lam * np.einsum("bd,bd->b", w, w) + hinge

    w = np.zeros((B, d))
    b = np.zeros(B)
    w_avg = np.zeros((B, d))
    b_avg = np.zeros(B)
    w_best, b_best = w_avg.copy(), b_avg.copy()
    obj_best = np.full(B, np.inf)
    for t in range(1, epochs + 1):
        scores = np.matmul(X, w[:, :, None])[:, :, 0] + b[:, None]
        viol = (y * scores < 1.0) * ym  # y_i where the hinge is active, 0 elsewhere
        g_w = lam * w - np.matmul(viol[:, None, :], X)[:, 0, :] / counts[:, None]
        g_b = -viol.sum(axis=1) / counts
        eta = 1.0 / (lam * t)
        w = w - eta * g_w
        b = b - eta * g_b
        w_avg += (w - w_avg) / t
        b_avg += (b - b_avg) / t
        obj = objective(w_avg, b_avg)
        better = obj <= obj_best
        w_best[better] = w_avg[better]
        b_best[better] = b_avg[better]
        obj_best = np.where(better, obj, obj_best)
        if trace is not None:
            trace.append((w_best.copy(), b_best.copy()))
    return w_best, b_best


def _as_pm1(y) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1/+1")
    if not ((y > 0).any() and (y < 0).any()):
        raise ValueError("training data must contain both classes")
    return y


def svm_train(X, y, C: float = 1.0, epochs: int = 200, seed: int = 0, trace=None) -> SvmModel:
    """Fit w, b minimizing (lam/2)||w||^2 + mean hinge loss with lam = 1/C.

    Full-batch steps make the result independent of row order, so `seed`
    is recorded but does not change the fit. Pass a list as `trace` to
    collect the checkpoint after every epoch.
    """
    X = np.asarray(X, dtype=float)
    y = _as_pm1(y)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("X must be (n, d) with one label per row")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    cfg = SvmConfig(C, epochs, seed)
    inner = [] if trace is not None else None
    w, b = _fit(X[None], y[None], np.ones((1, y.size), bool), cfg.lam, epochs, inner)
    if trace is not None:
        trace.extend((tw[0], float(tb[0])) for tw, tb in inner)
    return SvmModel(w[0], float(b[0]), cfg)


def svm_train_many(X, y, mask, C: float = 1.0, epochs: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Train a stack of independent problems at once; see `_fit` for shapes."""
    X = np.asarray(X, dtype=float)
    return _fit(X, np.asarray(y, float), np.asarray(mask, bool), 1.0 / C, epochs)


def svm_decision(m: SvmModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != m.weights.size:
        raise ValueError(f"model expects {m.weights.size} features, got shape {X.shape}")
    return X @ m.weights + m.bias


def svm_predict(m: SvmModel, X) -> np.ndarray:
    """sign(w.x + b) with sign(0) = +1."""
    return np.where(svm_decision(m, X) >= 0, 1, -1)
