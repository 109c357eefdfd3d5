"""Time-domain summary statistics per channel."""

from __future__ import annotations

import numpy as np

from .data import EpochSet, FeatureDescriptor, FeatureMatrix

STAT_NAMES = ("mean", "std", "variance", "rms", "abs_diff", "skewness", "kurtosis")


def stat_features(x) -> np.ndarray:
    """Seven statistics along the last axis.

    Order: mean, population std, population variance, RMS, mean absolute
    first difference, skewness, non-excess kurtosis. Zero-spread inputs get
    skewness and kurtosis of 0. Single-sample inputs get abs_diff 0.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] == 0:
        raise ValueError("need at least one sample")
    mu = x.mean(axis=-1, keepdims=True)
    dev = x - mu
    var = np.mean(dev**2, axis=-1)
    sd = np.sqrt(var)
    rms = np.sqrt(np.mean(x**2, axis=-1))
    if x.shape[-1] > 1:
        absdiff = np.mean(np.abs(np.diff(x, axis=-1)), axis=-1)
    else:
        absdiff = np.zeros(x.shape[:-1])
    # exact-zero spread only: all samples equal
    flat = np.all(x == x[..., :1], axis=-1)
    safe = np.where(flat, 1.0, sd)[..., None]
    z = dev / safe
    skew = np.where(flat, 0.0, np.mean(z**3, axis=-1))
    kurt = np.where(flat, 0.0, np.mean(z**4, axis=-1))
    var = np.where(flat, 0.0, var)
    sd = np.where(flat, 0.0, sd)
    return np.stack([mu[..., 0], sd, var, rms, absdiff, skew, kurt], axis=-1)


def stat_feature_block(epochs: EpochSet) -> FeatureMatrix:
    values = stat_features(epochs.data).reshape(epochs.n_epochs, -1)
    descriptors = tuple(
        FeatureDescriptor(ch, "statistical", name) for ch in range(epochs.n_channels) for name in STAT_NAMES
    )
    return FeatureMatrix(values, descriptors, epochs.labels, epochs.subjects)
