"""Band-pass filtering, event-locked segmentation and feature standardization."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .data import EpochSet, FeatureMatrix

log = logging.getLogger(__name__)

DEFAULT_N_TAPS = 501


@dataclass(frozen=True)
class FirFilter:
    taps: np.ndarray
    f_lo: float
    f_hi: float
    fs: float

    @property
    def delay(self) -> int:
        return (len(self.taps) - 1) // 2

    def response(self, freqs) -> np.ndarray:
        """Complex frequency response at `freqs` (Hz)."""
        freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
        n = np.arange(len(self.taps))
        return np.exp(-2j * np.pi * np.outer(freqs / self.fs, n)) @ self.taps


def _lowpass(fc: float, fs: float, n_taps: int, window: np.ndarray) -> np.ndarray:
    m = np.arange(n_taps) - (n_taps - 1) / 2
    h = 2 * fc / fs * np.sinc(2 * fc / fs * m) * window
    return h / h.sum()


def design_bandpass(f_lo: float, f_hi: float, fs: float, n_taps: int = DEFAULT_N_TAPS) -> FirFilter:
    """Hamming-windowed sinc band-pass, built as the difference of two lowpasses.

    Each lowpass is normalized to unit DC gain before subtraction, so the
    band-pass has an exact zero at DC even when the low edge is far below
    the window's transition width.
    """
    if n_taps % 2 == 0 or n_taps < 3:
        raise ValueError(f"n_taps must be odd and >= 3, got {n_taps}")
    if not (0 < f_lo < f_hi < fs / 2):
        raise ValueError(f"need 0 < f_lo < f_hi < fs/2, got f_lo={f_lo}, f_hi={f_hi}, fs={fs}")
    window = np.hamming(n_taps)
    taps = _lowpass(f_hi, fs, n_taps, window) - _lowpass(f_lo, fs, n_taps, window)
    # enforce exact symmetry against rounding in the two sinc evaluations
    taps = 0.5 * (taps + taps[::-1])
    return FirFilter(taps, float(f_lo), float(f_hi), float(fs))


def apply_fir(filt: FirFilter, signal) -> np.ndarray:
    """Filter along the last axis; output is delay-compensated and input-length."""
    x = np.asarray(signal, dtype=float)
    if x.shape[-1] <= len(filt.taps):
        raise ValueError(f"signal of length {x.shape[-1]} is not longer than {len(filt.taps)} taps")
    if x.ndim == 1:
        return np.convolve(x, filt.taps, mode="same")
    flat = x.reshape(-1, x.shape[-1])
    out = np.stack([np.convolve(row, filt.taps, mode="same") for row in flat])
    return out.reshape(x.shape)


def segment_epochs(
    continuous,
    events: Iterable[tuple[int, int, int]],
    fs: float,
    t_pre: float = 0.2,
    t_post: float = 0.5,
    channel_names=None,
) -> tuple[EpochSet, int]:
    """Cut [onset - t_pre, onset + t_post) windows around each event.

    Returns the epochs in event order and the number of events skipped
    because their window fell outside the recording.
    """
    x = np.asarray(continuous, dtype=float)
    if x.ndim != 2:
        raise ValueError("continuous data must be (channels, samples)")
    pre = int(round(t_pre * fs))
    post = int(round(t_post * fs))
    if pre + post <= 0:
        raise ValueError("empty epoch window")
    chunks, labels, subjects = [], [], []
    skipped = 0
    for onset, cls, subj in events:
        start, stop = int(onset) - pre, int(onset) + post
        if start < 0 or stop > x.shape[1]:
            skipped += 1
            continue
        chunks.append(x[:, start:stop])
        labels.append(cls)
        subjects.append(subj)
    if skipped:
        log.warning("skipped %d event(s) with windows outside the recording", skipped)
    if channel_names is None:
        channel_names = [f"ch{i}" for i in range(x.shape[0])]
    data = np.stack(chunks) if chunks else np.empty((0, x.shape[0], pre + post))
    return EpochSet(data, fs, channel_names, labels, subjects), skipped


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray


def standardize_fit(train: FeatureMatrix | np.ndarray) -> Standardizer:
    """Column means and population standard deviations; zero spread is stored as 1."""
    X = train.values if isinstance(train, FeatureMatrix) else np.asarray(train, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("cannot fit a standardizer on zero rows")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    # constant columns (up to rounding in the mean) map to zero
    const = np.all(X == X[0], axis=0) | (stds <= 1e-12 * np.maximum(1.0, np.abs(means)))
    stds = np.where(const, 1.0, stds)
    means = np.where(const, X[0], means)
    return Standardizer(means, stds)


def standardize_apply(s: Standardizer, m: FeatureMatrix | np.ndarray):
    X = m.values if isinstance(m, FeatureMatrix) else np.asarray(m, dtype=float)
    if X.shape[1] != s.means.size:
        raise ValueError(f"standardizer fitted on {s.means.size} columns, got {X.shape[1]}")
    Z = (X - s.means) / s.stds
    if isinstance(m, FeatureMatrix):
        return FeatureMatrix(Z, m.descriptors, m.labels, m.subjects)
    return Z
