"""Welch power spectral density and EEG band powers."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

from .data import EpochSet, FeatureDescriptor, FeatureMatrix

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WelchConfig:
    """Segment length, hop between segment starts, and taper.

    The taper defaults to a periodic Hann window of `segment_len` samples.
    """

    segment_len: int = 64
    overlap_step: int = 32
    window: np.ndarray | None = None

    def __post_init__(self):
        if self.segment_len < 1 or not (0 < self.overlap_step <= self.segment_len):
            raise ValueError("need 0 < overlap_step <= segment_len")
        w = get_window("hann", self.segment_len) if self.window is None else np.asarray(self.window, float)
        if w.shape != (self.segment_len,):
            raise ValueError(f"window must have length {self.segment_len}")
        if not np.sum(w**2) > 0:
            raise ValueError("window has zero energy")
        object.__setattr__(self, "window", w)


@dataclass(frozen=True)
class BandSet:
    bands: tuple[tuple[str, float, float], ...]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(b[0] for b in self.bands)


EEG_BANDS = BandSet(
    (
        ("delta", 0.5, 4.0),
        ("theta", 4.0, 8.0),
        ("alpha", 8.0, 13.0),
        ("low_beta", 13.0, 20.0),
        ("mid_beta", 20.0, 26.0),
        ("high_beta", 26.0, 35.0),
    )
)


def welch_psd(signal, cfg: WelchConfig, fs: float) -> tuple[np.ndarray, np.ndarray]:
    """Averaged one-sided periodogram of overlapping tapered segments.

    Each segment periodogram is ``|DFT(x_k * w)|**2 / (L * sum(w**2))`` and
    the estimate is their plain mean over the K segments. Bins run from 0 to
    ``L // 2`` at spacing ``fs / L``. No one-sided doubling and no 1/fs
    density scaling is applied.

    Works on the last axis, so a stack of signals may be passed at once.
    """
    x = np.asarray(signal, dtype=float)
    L, D = cfg.segment_len, cfg.overlap_step
    N = x.shape[-1]
    if N < L:
        raise ValueError(f"signal length {N} shorter than segment length {L}")
    K = (N - L) // D + 1
    starts = np.arange(K) * D
    segs = x[..., starts[:, None] + np.arange(L)] * cfg.window
    spec = np.fft.rfft(segs, axis=-1)
    psd = np.mean(spec.real**2 + spec.imag**2, axis=-2) / (L * np.sum(cfg.window**2))
    freqs = np.arange(L // 2 + 1) * fs / L
    return freqs, psd


def band_bin_masks(freqs, bands: BandSet = EEG_BANDS) -> tuple[np.ndarray, np.ndarray]:
    """Boolean bin masks, one row per band, and a flag for empty bands."""
    freqs = np.asarray(freqs, dtype=float)
    masks = np.zeros((len(bands.bands), freqs.size), dtype=bool)
    for i, (_, lo, hi) in enumerate(bands.bands):
        masks[i] = (freqs >= lo) & (freqs < hi)
    # the lowest band also owns the bin nearest its lower edge, which at
    # coarse resolution sits below the edge
    lo0 = bands.bands[0][1]
    masks[0, int(np.argmin(np.abs(freqs - lo0)))] = True
    empty = ~masks.any(axis=1)
    return masks, empty


def band_powers(freqs, psd, bands: BandSet = EEG_BANDS) -> np.ndarray:
    """Summed PSD per band over half-open [f_lo, f_hi) bins; last axis of psd is frequency."""
    freqs = np.asarray(freqs, dtype=float)
    if np.any(np.diff(freqs) <= 0):
        raise ValueError("freqs must be strictly ascending")
    masks, empty = band_bin_masks(freqs, bands)
    if empty.any():
        log.warning("bands %s contain no frequency bins; their power is 0",
                    [bands.bands[i][0] for i in np.flatnonzero(empty)])
    return np.asarray(psd, dtype=float) @ masks.T.astype(float)


def spectral_feature_block(
    epochs: EpochSet, cfg: WelchConfig | None = None, bands: BandSet = EEG_BANDS
) -> FeatureMatrix:
    cfg = cfg or WelchConfig()
    freqs, psd = welch_psd(epochs.data, cfg, epochs.fs)
    powers = band_powers(freqs, psd, bands)  # (epochs, channels, bands)
    values = powers.reshape(epochs.n_epochs, -1)
    descriptors = tuple(
        FeatureDescriptor(ch, "spectral", f"{name}_power")
        for ch in range(epochs.n_channels)
        for name in bands.names
    )
    return FeatureMatrix(values, descriptors, epochs.labels, epochs.subjects)
