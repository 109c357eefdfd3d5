"""Dense binary classifier in NumPy: dropout, L2, BCE, Adam/RMSprop, random search."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import expit
from sklearn.model_selection import train_test_split

from .data import SCHEMA_VERSION, atomic_write_bytes, atomic_write_text, check_schema, dump_json

log = logging.getLogger(__name__)

EPS_CLIP = 1e-7
LEAKY_SLOPE = 0.01
ACTIVATIONS = ("relu", "leaky_relu")
OPTIMIZERS = ("adam", "rmsprop")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class MlpConfig:
    units: tuple[int, ...] = (28, 27)
    dropout: tuple[float, ...] = (0.1, 0.5)
    activations: tuple[str, ...] = ("leaky_relu", "leaky_relu")
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    l2_lambda: float = 0.01
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        for name in ("units", "dropout", "activations"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        n = len(self.units)
        if n not in (1, 2):
            raise ValueError("n_hidden_layers must be 1 or 2")
        if len(self.dropout) != n or len(self.activations) != n:
            raise ValueError("units, dropout and activations need one entry per hidden layer")
        if any(u < 1 for u in self.units):
            raise ValueError("units must be >= 1")
        if any(not 0.0 <= p < 1.0 for p in self.dropout):
            raise ValueError("dropout must lie in [0, 1)")
        if any(a not in ACTIVATIONS for a in self.activations):
            raise ValueError(f"activations must be in {ACTIVATIONS}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be in {OPTIMIZERS}")
        if self.l2_lambda < 0 or self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("invalid training hyperparameters")

    @property
    def n_hidden_layers(self) -> int:
        return len(self.units)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("units", "dropout", "activations"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MlpConfig":
        return cls(**d)


# Architectures reported per pairwise task; learning rate is not reported.
TABLE2 = {
    "I": MlpConfig((28, 27), (0.1, 0.5), ("leaky_relu", "leaky_relu"), "adam"),
    "II": MlpConfig((25,), (0.2,), ("relu",), "rmsprop"),
    "III": MlpConfig((26, 10), (0.6, 0.9), ("leaky_relu", "leaky_relu"), "adam"),
    "IV": MlpConfig((26, 26), (0.2, 0.9), ("relu", "leaky_relu"), "adam"),
    "V": MlpConfig((23,), (0.4,), ("relu",), "rmsprop"),
    # no second-layer activation given for VI; ReLU carried down from layer one
    "VI": MlpConfig((26, 8), (0.1, 0.6), ("relu", "relu"), "adam"),
}


def table2_config(task: str, **overrides) -> MlpConfig:
    return replace(TABLE2[str(task)], **overrides)


@dataclass
class MlpModel:
    weights: list[np.ndarray]  # (fan_in, fan_out) per layer, output layer last
    biases: list[np.ndarray]
    config: MlpConfig

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]


def init_model(n_inputs: int, cfg: MlpConfig, rng: np.random.Generator) -> MlpModel:
    """Uniform fan-in init: sqrt(6/fan_in) for hidden layers, sqrt(3/fan_in) for the head."""
    dims = [n_inputs, *cfg.units, 1]
    weights, biases = [], []
    for i in range(len(dims) - 1):
        limit = math.sqrt((6.0 if i < len(dims) - 2 else 3.0) / dims[i])
        weights.append(rng.uniform(-limit, limit, size=(dims[i], dims[i + 1])))
        biases.append(np.zeros(dims[i + 1]))
    return MlpModel(weights, biases, cfg)


def _act(z, kind):
    return np.maximum(z, 0.0) if kind == "relu" else np.where(z > 0, z, LEAKY_SLOPE * z)


def _act_grad(z, kind):
    return (z > 0).astype(float) if kind == "relu" else np.where(z > 0, 1.0, LEAKY_SLOPE)


def forward(m: MlpModel, x, train_mode: bool = False, rng: np.random.Generator | None = None):
    """Predicted P(y=1) and the activation cache for `backward`.

    Dropout is inverted (kept units scaled by 1/(1-p)) and acts only when
    `train_mode` is set, in which case `rng` is required.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None] if single else x
    if h.shape[1] != m.weights[0].shape[0]:
        raise ValueError(f"model expects {m.weights[0].shape[0]} inputs, got {h.shape[1]}")
    if train_mode and rng is None:
        raise ValueError("train_mode forward pass needs an rng")
    cache = {"inputs": [], "pre": [], "masks": []}
    cfg = m.config
    for W, b, kind, p in zip(m.weights[:-1], m.biases[:-1], cfg.activations, cfg.dropout):
        cache["inputs"].append(h)
        z = h @ W + b
        cache["pre"].append(z)
        h = _act(z, kind)
        if train_mode and p > 0:
            mask = (rng.random(h.shape) >= p) / (1.0 - p)
            h = h * mask
        else:
            mask = None
        cache["masks"].append(mask)
    cache["inputs"].append(h)
    logit = (h @ m.weights[-1] + m.biases[-1])[:, 0]
    yhat = expit(logit)
    cache["yhat"] = yhat
    return (yhat[0] if single else yhat), cache


def bce_loss(y, yhat) -> np.ndarray | float:
    """-[y log p + (1-y) log(1-p)] with p clipped to [1e-7, 1 - 1e-7]."""
    p = np.clip(np.asarray(yhat, dtype=float), EPS_CLIP, 1.0 - EPS_CLIP)
    y = np.asarray(y, dtype=float)
    out = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    return out[()] if out.ndim == 0 else out


def l2_penalty(m: MlpModel, lam: float | None = None) -> float:
    lam = m.config.l2_lambda if lam is None else lam
    return 0.5 * lam * sum(float(np.sum(W * W)) for W in m.weights)


def total_loss(m: MlpModel, X, y, train_mode=False, rng=None) -> float:
    yhat, _ = forward(m, X, train_mode, rng)
    return float(np.mean(bce_loss(y, yhat))) + l2_penalty(m)


def backward(m: MlpModel, cache: dict, y) -> list[np.ndarray]:
    """Gradients of mean BCE + (lam/2)*sum ||W||^2, ordered like `m.params()`."""
    y = np.asarray(y, dtype=float).reshape(-1)
    n = y.size
    lam = m.config.l2_lambda
    delta = ((cache["yhat"] - y) / n)[:, None]
    grads_w = [None] * len(m.weights)
    grads_b = [None] * len(m.weights)
    L = len(m.weights) - 1
    grads_w[L] = cache["inputs"][L].T @ delta + lam * m.weights[L]
    grads_b[L] = delta.sum(axis=0)
    upstream = delta @ m.weights[L].T
    for i in range(L - 1, -1, -1):
        if cache["masks"][i] is not None:
            upstream = upstream * cache["masks"][i]
        dz = upstream * _act_grad(cache["pre"][i], m.config.activations[i])
        grads_w[i] = cache["inputs"][i].T @ dz + lam * m.weights[i]
        grads_b[i] = dz.sum(axis=0)
        upstream = dz @ m.weights[i].T
    return [g for pair in zip(grads_w, grads_b) for g in pair]


# -- optimizers -----------------------------------------------------------------


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0


@dataclass
class RmspropState:
    s: list[np.ndarray]


def adam_step(params, grads, state: AdamState, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
    t = state.t + 1
    new_m = [beta1 * m + (1 - beta1) * g for m, g in zip(state.m, grads)]
    new_v = [beta2 * v + (1 - beta2) * g * g for v, g in zip(state.v, grads)]
    c1, c2 = 1 - beta1**t, 1 - beta2**t
    new_p = [p - lr * (m / c1) / (np.sqrt(v / c2) + eps) for p, m, v in zip(params, new_m, new_v)]
    return new_p, AdamState(new_m, new_v, t)


def rmsprop_step(params, grads, state: RmspropState, lr: float, rho=0.9, eps=1e-8):
    new_s = [rho * s + (1 - rho) * g * g for s, g in zip(state.s, grads)]
    new_p = [p - lr * g / (np.sqrt(s) + eps) for p, g, s in zip(params, grads, new_s)]
    return new_p, RmspropState(new_s)


def _init_state(cfg: MlpConfig, params):
    zeros = [np.zeros_like(p) for p in params]
    if cfg.optimizer == "adam":
        return AdamState(zeros, [np.zeros_like(p) for p in params])
    return RmspropState(zeros)


def _set_params(m: MlpModel, params):
    m.weights = list(params[0::2])
    m.biases = list(params[1::2])


# -- training -------------------------------------------------------------------


def train(X, y, cfg: MlpConfig) -> tuple[MlpModel, list[float]]:
    """Mini-batch training with per-epoch seeded shuffling.

    Returns the model and the mean batch loss (BCE + L2) of every epoch.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("X must be (n, d) with one label per row")
    if not (np.any(y == 0) and np.any(y == 1)) or not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be 0/1 with both classes present")
    rng = np.random.default_rng(cfg.seed)
    model = init_model(X.shape[1], cfg, rng)
    params = model.params()
    state = _init_state(cfg, params)
    step = adam_step if cfg.optimizer == "adam" else rmsprop_step
    n = y.size
    losses = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            yhat, cache = forward(model, X[idx], True, rng)
            loss = float(np.mean(bce_loss(y[idx], yhat))) + l2_penalty(model)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch starting {start}")
            grads = backward(model, cache, y[idx])
            params, state = step(params, grads, state, cfg.learning_rate)
            _set_params(model, params)
            batch_losses.append(loss)
        losses.append(float(np.mean(batch_losses)))
    return model, losses


def predict_proba(m: MlpModel, X) -> np.ndarray:
    return forward(m, np.asarray(X, dtype=float), train_mode=False)[0]


def predict(m: MlpModel, X) -> np.ndarray:
    return (np.atleast_1d(predict_proba(m, X)) >= 0.5).astype(np.int64)


# -- random search --------------------------------------------------------------


@dataclass(frozen=True)
class SearchSpace:
    layers: tuple[int, ...] = (1, 2)
    units: tuple[int, int] = (20, 30)
    dropout: tuple[float, float] = (0.1, 0.9)
    activations: tuple[str, ...] = ACTIVATIONS
    optimizers: tuple[str, ...] = OPTIMIZERS
    learning_rate: tuple[float, float] = (1e-4, 1e-2)
    n_trials: int = 100
    epochs: int = 200
    batch_size: int = 32

    def sample(self, rng: np.random.Generator, seed: int) -> MlpConfig:
        n = int(rng.choice(self.layers))
        lo, hi = np.log(self.learning_rate[0]), np.log(self.learning_rate[1])
        return MlpConfig(
            units=tuple(int(rng.integers(self.units[0], self.units[1] + 1)) for _ in range(n)),
            dropout=tuple(float(rng.uniform(*self.dropout)) for _ in range(n)),
            activations=tuple(str(rng.choice(self.activations)) for _ in range(n)),
            optimizer=str(rng.choice(self.optimizers)),
            learning_rate=float(np.exp(rng.uniform(lo, hi))),
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=seed,
        )


@dataclass
class Trial:
    index: int
    config: MlpConfig
    val_accuracy: float | None
    status: str = "ok"

    def to_dict(self) -> dict:
        return {"index": self.index, "config": self.config.to_dict(),
                "val_accuracy": self.val_accuracy, "status": self.status}


def _trial_seeds(seed: int, trial: int) -> tuple[np.random.Generator, int]:
    ss = np.random.SeedSequence([seed, trial])
    sample_seq, train_seq = ss.spawn(2)
    return np.random.default_rng(sample_seq), int(train_seq.generate_state(1)[0])


def random_search(X, y, space: SearchSpace = SearchSpace(), seed: int = 0) -> tuple[MlpConfig, list[Trial]]:
    """Sample configs, train each on a stratified 80% split, rank by 20% holdout accuracy.

    Every trial draws from its own RNG stream derived from (seed, trial
    index), so trials can be evaluated in any order. Ties go to the
    earlier trial.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).reshape(-1)
    X_tr, X_va, y_tr, y_va = train_test_split(X, y, test_size=0.2, stratify=y, random_state=seed)
    leaderboard: list[Trial] = []
    for t in range(space.n_trials):
        rng, train_seed = _trial_seeds(seed, t)
        cfg = space.sample(rng, train_seed)
        try:
            model, _ = train(X_tr, y_tr, cfg)
        except TrainingError as exc:
            log.warning("trial %d failed: %s", t, exc)
            leaderboard.append(Trial(t, cfg, None, "failed"))
            continue
        acc = float(np.mean(predict(model, X_va) == y_va))
        leaderboard.append(Trial(t, cfg, acc))
    ok = [tr for tr in leaderboard if tr.val_accuracy is not None]
    if not ok:
        raise TrainingError("every search trial failed")
    best = max(ok, key=lambda tr: (tr.val_accuracy, -tr.index))
    return best.config, leaderboard


# -- model file -----------------------------------------------------------------


def save_model(m: MlpModel, path) -> Path:
    """model.json (config, layer dims) + model.bin (float32 LE, W then b per layer)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    blob = b"".join(np.asarray(p, dtype="<f4").tobytes(order="C") for p in m.params())
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config": m.config.to_dict(),
        "layer_dims": m.dims,
        "dtype": "f32le",
        "order": "W0,b0,W1,b1,...; W stored (fan_in, fan_out) row-major",
    }
    atomic_write_bytes(path / "model.bin", blob)
    atomic_write_text(path / "model.json", dump_json(manifest))
    return path


def load_model(path) -> MlpModel:
    path = Path(path)
    manifest = json.loads((path / "model.json").read_text(encoding="utf-8"))
    check_schema(manifest, "model file")
    cfg = MlpConfig.from_dict(manifest["config"])
    dims = manifest["layer_dims"]
    flat = np.frombuffer((path / "model.bin").read_bytes(), dtype="<f4").astype(float)
    expected = sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))
    if flat.size != expected:
        raise ValueError(f"model.bin holds {flat.size} values, layer dims imply {expected}")
    weights, biases, pos = [], [], 0
    for i in range(len(dims) - 1):
        k = dims[i] * dims[i + 1]
        weights.append(flat[pos:pos + k].reshape(dims[i], dims[i + 1]))
        pos += k
        biases.append(flat[pos:pos + dims[i + 1]].copy())
        pos += dims[i + 1]
    return MlpModel(weights, biases, cfg)
