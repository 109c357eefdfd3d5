"""Morlet continuous wavelet transform and per-scale PCA compression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import EpochSet, FeatureDescriptor, FeatureMatrix

# Gaussian envelope cut-off: exp(-u**2 / 2) < 1e-12 beyond this |u|
ENVELOPE_FLOOR = 1e-12
_U_MAX = float(np.sqrt(-2.0 * np.log(ENVELOPE_FLOOR)))


@dataclass(frozen=True)
class MorletParams:
    omega0: float = 6.0

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")


@dataclass(frozen=True)
class ScaleGrid:
    scales: tuple[float, ...]

    def __post_init__(self):
        s = np.asarray(self.scales, dtype=float)
        if s.ndim != 1 or s.size == 0 or np.any(s <= 0) or np.any(np.diff(s) <= 0):
            raise ValueError("scales must be positive and strictly increasing")
        object.__setattr__(self, "scales", tuple(float(v) for v in s))

    @classmethod
    def log2(cls, lo: float = 1.0, hi: float = 128.0, n: int = 6) -> "ScaleGrid":
        return cls(tuple(2.0 ** np.linspace(np.log2(lo), np.log2(hi), n)))

    def __len__(self):
        return len(self.scales)


DEFAULT_SCALES = ScaleGrid.log2()


def morlet(t, p: MorletParams = MorletParams()):
    """pi**-0.25 * exp(i*omega0*t) * exp(-t**2/2)."""
    t = np.asarray(t, dtype=float)
    out = np.pi**-0.25 * np.exp(1j * p.omega0 * t) * np.exp(-0.5 * t * t)
    return out[()] if out.ndim == 0 else out


def _kernel(a: float, p: MorletParams) -> np.ndarray:
    half = int(np.floor(_U_MAX * a))
    m = np.arange(-half, half + 1)
    return np.conj(morlet(m / a, p))


def cwt(signal, scales: ScaleGrid = DEFAULT_SCALES, p: MorletParams = MorletParams(), fs: float = 1.0) -> np.ndarray:
    """Discrete Morlet CWT, one row per scale, one column per sample.

    Scales and translations are in samples:
    ``W[a, b] = a**-0.5 * sum_t x[t] * conj(psi((t - b) / a)) / fs``.
    Terms outside the support where the Gaussian envelope exceeds 1e-12
    are dropped; the signal is zero outside its own extent.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("signal must be a non-empty vector")
    n = x.size
    out = np.empty((len(scales), n), dtype=complex)
    for i, a in enumerate(scales.scales):
        g = _kernel(a, p)  # g[m + half] = conj(psi(m / a))
        half = (g.size - 1) // 2
        # W[b] = sum_m x[b + m] g[m]  ==  convolve(x, g[::-1]) centred on b
        full = np.convolve(x, g[::-1])
        out[i] = full[half:half + n] / (np.sqrt(a) * fs)
    return out


def cwt_batch(signals, scales: ScaleGrid = DEFAULT_SCALES, p: MorletParams = MorletParams(), fs: float = 1.0) -> np.ndarray:
    """`cwt` over the last axis of a stack: (..., n) -> (..., n_scales, n)."""
    x = np.asarray(signals, dtype=float)
    flat = x.reshape(-1, x.shape[-1])
    out = np.stack([cwt(row, scales, p, fs) for row in flat])
    return out.reshape(x.shape[:-1] + (len(scales), x.shape[-1]))


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (n_components, dim), orthonormal rows
    explained_variance: np.ndarray

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PcaModel":
        return cls(np.asarray(d["mean"], float), np.asarray(d["components"], float),
                   np.asarray(d["explained_variance"], float))


def pca_fit(X, n_components: int) -> PcaModel:
    """Top eigenvectors of the population covariance, largest entry made positive."""
    X = np.asarray(X, dtype=float)
    n_obs, dim = X.shape
    if n_obs < 2:
        raise ValueError("PCA needs at least 2 observations")
    if not 1 <= n_components <= min(n_obs, dim):
        raise ValueError(f"n_components must be in [1, {min(n_obs, dim)}]")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / n_obs
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:n_components]
    comps = evecs[:, order].T
    pivot = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(n_components), pivot])
    comps = comps * np.where(signs == 0, 1.0, signs)[:, None]
    return PcaModel(mean, comps, np.clip(evals[order], 0.0, None))


def pca_project(m: PcaModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != m.mean.size:
        raise ValueError(f"PCA fitted on dim {m.mean.size}, got {X.shape[-1]}")
    return (X - m.mean) @ m.components.T


def cwt_magnitudes(epochs: EpochSet, scales: ScaleGrid = DEFAULT_SCALES, p: MorletParams = MorletParams()) -> np.ndarray:
    """|CWT| of every epoch and channel: (epochs, channels, scales, samples)."""
    return np.abs(cwt_batch(epochs.data, scales, p, epochs.fs))


def wavelet_feature_block(
    epochs: EpochSet,
    scales: ScaleGrid = DEFAULT_SCALES,
    p: MorletParams = MorletParams(),
    fitted_models: list[list[PcaModel]] | None = None,
    magnitudes: np.ndarray | None = None,
) -> tuple[FeatureMatrix, list[list[PcaModel]]]:
    """First-principal-component score of |CWT| per (channel, scale).

    For every (channel, scale) the magnitude envelope over the epoch's
    samples is one observation. Without `fitted_models` a one-component PCA
    is fitted per (channel, scale) across the given epochs; with them, the
    stored models are applied unchanged. Models are indexed [channel][scale].
    `magnitudes` may carry a precomputed `cwt_magnitudes(epochs, ...)`.
    """
    mags = cwt_magnitudes(epochs, scales, p) if magnitudes is None else magnitudes
    n_ch, n_sc = epochs.n_channels, len(scales)
    if mags.shape != (epochs.n_epochs, n_ch, n_sc, epochs.n_samples):
        raise ValueError(f"magnitudes have shape {mags.shape}, expected "
                         f"{(epochs.n_epochs, n_ch, n_sc, epochs.n_samples)}")
    if fitted_models is not None:
        if len(fitted_models) != n_ch or any(len(row) != n_sc for row in fitted_models):
            raise ValueError("fitted PCA models do not match channels x scales")
        if any(m.mean.size != epochs.n_samples for row in fitted_models for m in row):
            raise ValueError("fitted PCA models do not match epoch length")
        models = fitted_models
    else:
        models = [[pca_fit(mags[:, c, s, :], 1) for s in range(n_sc)] for c in range(n_ch)]
    values = np.empty((epochs.n_epochs, n_ch * n_sc))
    for c in range(n_ch):
        for s in range(n_sc):
            values[:, c * n_sc + s] = pca_project(models[c][s], mags[:, c, s, :])[:, 0]
    descriptors = tuple(
        FeatureDescriptor(c, "wavelet", f"cwt_pc1_scale{s}") for c in range(n_ch) for s in range(n_sc)
    )
    return FeatureMatrix(values, descriptors, epochs.labels, epochs.subjects), models
