"""Built-in reference classifiers and the black-box scorer contract.

A Scorer maps a batch of samples to pre-softmax logits. The built-in models
(linear softmax and a one-hidden-layer tanh MLP on the flattened sample)
exist to make the evaluation pipeline testable end to end; they also expose
analytic input gradients for the gradient-based attribution methods.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import Diverged, ShapeMismatch

DEFAULT_HIDDEN = 64


class Scorer:
    """Black-box scoring contract: batched pre-softmax logits."""

    n_classes: int
    input_shape: tuple[int, int]       # (M, T)
    scorer_id: str = "scorer"
    max_concurrency: int = 0           # 0 = unbounded

    def score_batch(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def score_one(self, x: np.ndarray) -> np.ndarray:
        return self.score_batch(x[None])[0]

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[1:] != self.input_shape:
            raise ShapeMismatch(f"expected (B, {self.input_shape[0]}, {self.input_shape[1]}), got {x.shape}")
        return x


class GradientProvider:
    """Optional Scorer extension: analytic d(logit_c)/dx."""

    def gradient(self, x: np.ndarray, target: int) -> np.ndarray:
        return self.gradient_batch(x[None], target)[0]

    def gradient_batch(self, x: np.ndarray, target: int) -> np.ndarray:
        raise NotImplementedError


class LinearSoftmaxModel(Scorer, GradientProvider):
    def __init__(self, weights: np.ndarray, bias: np.ndarray, input_shape: tuple[int, int]):
        self.weights = np.asarray(weights, dtype=np.float64)   # (K, D)
        self.bias = np.asarray(bias, dtype=np.float64)         # (K,)
        self.input_shape = input_shape
        self.n_classes = self.weights.shape[0]
        self.scorer_id = "builtin:linear"

    def score_batch(self, x: np.ndarray) -> np.ndarray:
        x = self._check_input(x)
        flat = x.reshape(x.shape[0], -1)
        return flat @ self.weights.T + self.bias

    def gradient_batch(self, x: np.ndarray, target: int) -> np.ndarray:
        x = self._check_input(x)
        g = self.weights[target].reshape(self.input_shape)
        return np.broadcast_to(g, x.shape).copy()


class MlpModel(Scorer, GradientProvider):
    """Flattened input -> tanh hidden layer -> logits.

    With ensemble_stride > 0 the logits (and gradients) are averaged over
    circular time shifts of the input at that stride, which makes the scorer
    approximately shift-invariant; the weights stay those of a single MLP.
    """

    def __init__(self, w1, b1, w2, b2, input_shape: tuple[int, int],
                 ensemble_stride: int = 0):
        self.w1 = np.asarray(w1, dtype=np.float64)   # (H, D)
        self.b1 = np.asarray(b1, dtype=np.float64)   # (H,)
        self.w2 = np.asarray(w2, dtype=np.float64)   # (K, H)
        self.b2 = np.asarray(b2, dtype=np.float64)   # (K,)
        self.input_shape = input_shape
        self.ensemble_stride = int(ensemble_stride)
        self.n_classes = self.w2.shape[0]
        self.scorer_id = "builtin:mlp"

    def _shifts(self) -> range:
        if self.ensemble_stride <= 0:
            return range(1)
        return range(0, self.input_shape[1], self.ensemble_stride)

    def _hidden(self, flat: np.ndarray) -> np.ndarray:
        return np.tanh(flat @ self.w1.T + self.b1)

    def _plain_logits(self, x: np.ndarray) -> np.ndarray:
        return self._hidden(x.reshape(x.shape[0], -1)) @ self.w2.T + self.b2

    def score_batch(self, x: np.ndarray) -> np.ndarray:
        x = self._check_input(x)
        shifts = self._shifts()
        total = np.zeros((x.shape[0], self.n_classes))
        for s in shifts:
            total += self._plain_logits(np.roll(x, s, axis=2) if s else x)
        return total / len(shifts)

    def gradient_batch(self, x: np.ndarray, target: int) -> np.ndarray:
        x = self._check_input(x)
        shifts = self._shifts()
        total = np.zeros_like(x)
        for s in shifts:
            xs = np.roll(x, s, axis=2) if s else x
            h = self._hidden(xs.reshape(x.shape[0], -1))
            # d logit_c / d x = W1^T (W2[c] * (1 - h^2))
            back = ((self.w2[target] * (1.0 - h * h)) @ self.w1).reshape(x.shape)
            total += np.roll(back, -s, axis=2) if s else back
        return total / len(shifts)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def accuracy(scorer: Scorer, x: np.ndarray, y: np.ndarray, batch_size: int = 256) -> float:
    preds = predict(scorer, x, batch_size=batch_size)
    return float(np.mean(preds == y))


def predict(scorer: Scorer, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    out = []
    for i in range(0, len(x), batch_size):
        out.append(np.argmax(scorer.score_batch(x[i : i + batch_size]), axis=1))
    return np.concatenate(out) if out else np.empty(0, dtype=np.int64)


def expectancy(scorer: Scorer, x: np.ndarray, batch_size: int = 256,
               per_class: bool = True) -> np.ndarray:
    """Mean logits over a split. Per-class vector (K,) by default; with
    per_class=False the single grand mean is broadcast to all classes."""
    if len(x) == 0:
        raise ValueError("expectancy of an empty split")
    total = np.zeros(scorer.n_classes)
    for i in range(0, len(x), batch_size):
        total += scorer.score_batch(x[i : i + batch_size]).sum(axis=0)
    mean = total / len(x)
    if not per_class:
        mean = np.full(scorer.n_classes, mean.mean())
    return mean


@dataclass
class TrainConfig:
    kind: str = "mlp"                  # "mlp" | "linear"
    hidden: int = DEFAULT_HIDDEN
    learning_rate: float = 0.05
    momentum: float = 0.9
    batch_size: int = 32
    max_epochs: int = 400
    patience: int = 10
    weight_decay: float = 1e-4
    lr_schedule: str = "constant"      # "constant" | "cosine"
    label_smoothing: float = 0.0
    augment_shifts: int = 0            # >0: average the loss over this many random circular shifts
    init: str = "normal"               # "normal" | "sine" (hidden rows start as random sinusoids)
    ensemble_stride: int = 0           # >0: returned model averages logits over shifted copies
    snapshot_every: int = 0            # >0: keep the weights with best val accuracy, checked every N epochs
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in ("mlp", "linear"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr schedule {self.lr_schedule!r}")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError("label_smoothing must lie in [0, 1)")
        if self.init not in ("normal", "sine"):
            raise ValueError(f"unknown init {self.init!r}")
        for name in ("augment_shifts", "ensemble_stride", "snapshot_every"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.init == "sine" and self.kind != "mlp":
            raise ValueError("sine init applies only to the mlp kind")


def _sine_init(rng: np.random.Generator, hidden: int, input_shape: tuple[int, int]) -> np.ndarray:
    """Hidden rows initialized as unit-norm per-channel sinusoids with random
    frequency, phase, and channel amplitude — frequency detectors from epoch 0."""
    m, t = input_shape
    steps = np.arange(t)
    w = np.zeros((hidden, m, t))
    freqs = rng.uniform(0.5, 40.0, hidden)
    for j in range(hidden):
        phase = rng.uniform(0.0, 2.0 * np.pi, m)
        amp = rng.normal(0.0, 1.0, m)
        w[j] = amp[:, None] * np.sin(2.0 * np.pi * freqs[j] * steps[None, :] / t + phase[:, None])
    w /= np.sqrt((w ** 2).sum(axis=(1, 2)))[:, None, None]
    return w.reshape(hidden, m * t)


def train(x_train: np.ndarray, y_train: np.ndarray, x_val: np.ndarray, y_val: np.ndarray,
          config: TrainConfig) -> LinearSoftmaxModel | MlpModel:
    """Mini-batch gradient descent (with momentum) on softmax cross-entropy.

    Model selection: by default, early stop on validation loss with the
    configured patience. With snapshot_every > 0, train for all epochs and
    keep the weights with the best validation accuracy (measured with the
    configured ensemble_stride), checked every snapshot_every epochs after
    the first third of training.
    """
    config.validate()
    if len(x_train) == 0 or len(x_val) == 0:
        raise ValueError("train and validation splits must be non-empty")
    input_shape = x_train.shape[1:]
    d = int(np.prod(input_shape))
    k = int(max(y_train.max(), y_val.max())) + 1
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([config.seed, 0x7A1])))

    if config.kind == "linear":
        params = {"w": rng.normal(0, 0.01, size=(k, d)), "b": np.zeros(k)}
    else:
        h = config.hidden
        if config.init == "sine":
            w1 = _sine_init(rng, h, input_shape)
        else:
            w1 = rng.normal(0, 1.0 / np.sqrt(d), size=(h, d))
        params = {
            "w1": w1,
            "b1": np.zeros(h),
            "w2": rng.normal(0, 1.0 / np.sqrt(h), size=(k, h)),
            "b2": np.zeros(k),
        }
    velocity = {name: np.zeros_like(p) for name, p in params.items()}

    xt = np.asarray(x_train, dtype=np.float64).reshape(len(x_train), *input_shape)
    yt = np.asarray(y_train, dtype=np.int64)
    xv_flat = np.asarray(x_val, dtype=np.float64).reshape(len(x_val), -1)
    yv = np.asarray(y_val, dtype=np.int64)

    def forward(flat):
        if config.kind == "linear":
            return flat @ params["w"].T + params["b"], None
        hid = np.tanh(flat @ params["w1"].T + params["b1"])
        return hid @ params["w2"].T + params["b2"], hid

    def val_loss_of():
        logits, _ = forward(xv_flat)
        p = softmax(logits)
        return float(-np.mean(np.log(p[np.arange(len(yv)), yv] + 1e-12)))

    def make_model(p):
        if config.kind == "linear":
            return LinearSoftmaxModel(p["w"], p["b"], input_shape)
        return MlpModel(p["w1"], p["b1"], p["w2"], p["b2"], input_shape,
                        ensemble_stride=config.ensemble_stride)

    n = len(xt)
    n_shift = max(1, config.augment_shifts)
    t_len = input_shape[-1]
    smoothing = config.label_smoothing
    best_loss = np.inf
    best_acc = -1.0
    best_params = {name: p.copy() for name, p in params.items()}
    stale = 0
    for epoch in range(config.max_epochs):
        if config.lr_schedule == "cosine":
            lr = config.learning_rate * 0.5 * (1.0 + np.cos(np.pi * epoch / config.max_epochs))
        else:
            lr = config.learning_rate
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            b = len(idx)
            xb = xt[idx]
            if config.augment_shifts > 0:
                shifts = rng.integers(0, t_len, size=(n_shift, b))
                cols = (np.arange(t_len)[None, None, :] - shifts[:, :, None]) % t_len
                stacked = np.take_along_axis(
                    np.broadcast_to(xb, (n_shift, b, *input_shape)),
                    np.broadcast_to(cols[:, :, None, :], (n_shift, b, *input_shape)),
                    axis=-1)
                flat = stacked.reshape(n_shift * b, -1)
            else:
                flat = xb.reshape(b, -1)
            logits, hid = forward(flat)
            if config.augment_shifts > 0:
                logits = logits.reshape(n_shift, b, k).mean(axis=0)
            p = softmax(logits)
            target = np.full((b, k), smoothing / k)
            target[np.arange(b), yt[idx]] += 1.0 - smoothing
            dz = (p - target) / b
            if config.augment_shifts > 0:
                dz = np.repeat(dz[None], n_shift, axis=0).reshape(n_shift * b, k) / n_shift
            if config.kind == "linear":
                grads = {"w": dz.T @ flat + config.weight_decay * params["w"], "b": dz.sum(axis=0)}
            else:
                dh = (dz @ params["w2"]) * (1.0 - hid * hid)
                grads = {
                    "w2": dz.T @ hid + config.weight_decay * params["w2"],
                    "b2": dz.sum(axis=0),
                    "w1": dh.T @ flat + config.weight_decay * params["w1"],
                    "b1": dh.sum(axis=0),
                }
            for name, g in grads.items():
                velocity[name] = config.momentum * velocity[name] - lr * g
                params[name] += velocity[name]

        if config.snapshot_every > 0:
            if (epoch + 1) % config.snapshot_every == 0 and epoch >= config.max_epochs // 3:
                acc = accuracy(make_model(params), x_val, yv)
                if not np.isfinite(val_loss_of()):
                    raise Diverged("validation loss became non-finite")
                if acc >= best_acc:
                    best_acc = acc
                    best_params = {name: p.copy() for name, p in params.items()}
        else:
            val_loss = val_loss_of()
            if not np.isfinite(val_loss):
                raise Diverged("validation loss became non-finite")
            if val_loss < best_loss - 1e-6:
                best_loss = val_loss
                best_params = {name: p.copy() for name, p in params.items()}
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break

    if config.snapshot_every > 0 and best_acc < 0:
        best_params = params
    return make_model(best_params)


# --- raw on-disk model format (deterministic bytes, no zip timestamps) ---

def save_model(model: LinearSoftmaxModel | MlpModel, path: str | Path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if isinstance(model, LinearSoftmaxModel):
        kind, arrays = "linear", {"w": model.weights, "b": model.bias}
    else:
        kind, arrays = "mlp", {"w1": model.w1, "b1": model.b1, "w2": model.w2, "b2": model.b2}
    meta = {
        "kind": kind,
        "input_shape": list(model.input_shape),
        "n_classes": model.n_classes,
        "ensemble_stride": getattr(model, "ensemble_stride", 0),
        "arrays": {name: list(a.shape) for name, a in arrays.items()},
    }
    (path / "model.json").write_text(json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n")
    blob = b"".join(np.ascontiguousarray(arrays[name], dtype="<f8").tobytes() for name in sorted(arrays))
    (path / "weights.f64").write_bytes(blob)


def load_model(path: str | Path) -> LinearSoftmaxModel | MlpModel:
    path = Path(path)
    meta = json.loads((path / "model.json").read_text())
    raw = (path / "weights.f64").read_bytes()
    arrays = {}
    ofs = 0
    for name in sorted(meta["arrays"]):
        shape = tuple(meta["arrays"][name])
        size = int(np.prod(shape)) * 8
        arrays[name] = np.frombuffer(raw[ofs : ofs + size], dtype="<f8").reshape(shape).copy()
        ofs += size
    if ofs != len(raw):
        raise ShapeMismatch("weights blob size does not match manifest")
    input_shape = tuple(meta["input_shape"])
    if meta["kind"] == "linear":
        return LinearSoftmaxModel(arrays["w"], arrays["b"], input_shape)
    return MlpModel(arrays["w1"], arrays["b1"], arrays["w2"], arrays["b2"], input_shape,
                    ensemble_stride=meta.get("ensemble_stride", 0))
