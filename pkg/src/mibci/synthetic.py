"""Seeded synthetic two-class EEG with a planted band-limited signal.

Each subject gets one continuous recording of 1/f-shaped noise. Class-1
trials add a sinusoid (frequency drawn inside the planted band, random
phase, Rayleigh-distributed amplitude per channel) on the planted channels
over the epoch window. The recording is
band-passed and cut into epochs with the same routines used for real data.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .data import EpochSet
from .preprocess import apply_fir, design_bandpass, segment_epochs


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator settings.

    `effect_size` is the expected RMS ratio, on planted channels inside
    the epoch window, of class-1 to class-0 signal. At 1.0 the classes are
    identically distributed.
    """

    n_subjects: int = 4
    epochs_per_class: int = 60
    n_channels: int = 8
    fs: float = 250.0
    planted_channels: tuple[int, ...] = (2, 5)
    planted_band: tuple[float, float] = (8.0, 13.0)
    effect_size: float = 2.0
    noise_level: float = 1.0
    seed: int = 7
    t_pre: float = 0.2
    t_post: float = 0.5
    trial_period: float = 1.5
    gain_jitter: float = 0.3
    allow_degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "planted_channels", tuple(int(c) for c in self.planted_channels))
        object.__setattr__(self, "planted_band", tuple(float(f) for f in self.planted_band))
        if self.n_subjects < 1 or self.epochs_per_class < 1 or self.n_channels < 1:
            raise ValueError("counts must be positive")
        if any(not 0 <= c < self.n_channels for c in self.planted_channels):
            raise ValueError("planted channel out of range")
        lo, hi = self.planted_band
        if not 0 < lo < hi < self.fs / 2:
            raise ValueError("planted band must lie inside (0, fs/2)")
        if self.effect_size < 1 or (self.effect_size == 1 and not self.allow_degenerate):
            raise ValueError("effect_size must exceed 1 (1 is allowed only as a degenerate control)")
        if self.trial_period <= self.t_pre + self.t_post:
            raise ValueError("trial_period must exceed the epoch window")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["planted_channels"] = list(self.planted_channels)
        d["planted_band"] = list(self.planted_band)
        return d


def pink_noise(rng: np.random.Generator, shape, fs: float, f_floor: float = 0.5) -> np.ndarray:
    """Gaussian noise with 1/f power (amplitude 1/sqrt(f)) along the last axis, unit RMS."""
    n = shape[-1]
    white = rng.standard_normal(shape)
    spec = np.fft.rfft(white, axis=-1)
    f = np.fft.rfftfreq(n, 1.0 / fs)
    spec *= 1.0 / np.sqrt(np.maximum(f, f_floor))
    out = np.fft.irfft(spec, n=n, axis=-1)
    return out / np.sqrt(np.mean(out**2, axis=-1, keepdims=True))


def generate(spec: SyntheticSpec) -> EpochSet:
    rng = np.random.default_rng(spec.seed)
    fs = spec.fs
    filt = design_bandpass(0.5, 35.0, fs)
    margin = filt.delay + int(round(fs))  # keep epochs clear of the filter's zero-padded edges
    period = int(round(spec.trial_period * fs))
    pre, post = int(round(spec.t_pre * fs)), int(round(spec.t_post * fs))
    n_trials = 2 * spec.epochs_per_class
    n_total = 2 * margin + n_trials * period
    ratio = spec.effect_size

    all_epochs = []
    for subj in range(spec.n_subjects):
        labels = rng.permutation(np.repeat([0, 1], spec.epochs_per_class))
        onsets = margin + pre + np.arange(n_trials) * period
        noise = apply_fir(filt, pink_noise(rng, (spec.n_channels, n_total), fs))
        sigma = np.sqrt(np.mean(noise**2, axis=1))
        noise *= spec.noise_level / sigma[:, None]
        plant = np.zeros_like(noise)
        # sinusoid RMS sqrt(ratio**2 - 1) * noise RMS gives total RMS ratio `ratio`
        amp = np.sqrt(2.0 * (ratio**2 - 1.0)) * spec.noise_level
        t = np.arange(pre + post) / fs
        for onset, lab in zip(onsets, labels):
            freq = rng.uniform(*spec.planted_band)
            phases = rng.uniform(0, 2 * np.pi, size=len(spec.planted_channels))
            # Rayleigh amplitude per trial and channel, unit mean power
            scale = np.sqrt(rng.exponential(1.0, size=len(spec.planted_channels)))
            if lab == 1 and amp > 0:
                for ch, ph, m in zip(spec.planted_channels, phases, scale):
                    plant[ch, onset - pre:onset + post] += m * amp * np.sin(2 * np.pi * freq * t + ph)
        if amp > 0:
            plant[list(spec.planted_channels)] = apply_fir(filt, plant[list(spec.planted_channels)])
        gains = rng.uniform(1.0 - spec.gain_jitter, 1.0 + spec.gain_jitter) * rng.uniform(0.9, 1.1, spec.n_channels)
        recording = gains[:, None] * (noise + plant)
        events = [(int(o), int(l), subj) for o, l in zip(onsets, labels)]
        ep, skipped = segment_epochs(recording, events, fs, spec.t_pre, spec.t_post,
                                     [f"ch{i}" for i in range(spec.n_channels)])
        assert skipped == 0
        all_epochs.append(ep)
    return EpochSet(
        np.concatenate([e.data for e in all_epochs]),
        fs,
        all_epochs[0].channel_names,
        np.concatenate([e.labels for e in all_epochs]),
        np.concatenate([e.subjects for e in all_epochs]),
    )
