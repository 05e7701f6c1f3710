"""Predictors with hand-written backpropagation, plus SGD and Adam.

Every model keeps its parameters in ``self.params`` (name -> ndarray) and
works on batches: ``forward(X)`` maps ``(B, in)`` to ``(B, out)`` and returns
a cache that ``backward(cache, grad_out)`` turns into a gradient dict with
the same keys as ``params``.

Checkpoints are JSON:

    {"format": "odece-model", "version": 1, "kind": "linear" | "mlp" | "slotwise",
     "config": {...constructor arguments...},
     "params": {name: {"shape": [...], "data": [flat row-major floats]}}}
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .rng import STREAM_INIT, CounterRNG

CHECKPOINT_VERSION = 1


class DivergenceError(RuntimeError):
    """Non-finite loss, gradient or parameter during training."""

    def __init__(self, msg, epoch=None, instance=None):
        super().__init__(msg)
        self.epoch = epoch
        self.instance = instance


def _uniform_init(rng: CounterRNG, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _as_batch(X, in_dim):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != in_dim:
        raise ValueError(f"expected features with {in_dim} columns, got shape {X.shape}")
    return X


class Predictor:
    kind = "base"
    params: dict[str, np.ndarray]

    def forward(self, X):
        raise NotImplementedError

    def backward(self, cache, grad_out) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def config(self) -> dict:
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out, _ = self.forward(X)
        return out[0] if X.ndim == 1 else out

    def zero_grads(self):
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def copy(self):
        clone = type(self).__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.params = {k: v.copy() for k, v in self.params.items()}
        return clone

    def flat(self) -> np.ndarray:
        return np.concatenate([self.params[k].ravel() for k in sorted(self.params)])

    def set_flat(self, theta):
        theta = np.asarray(theta, dtype=float)
        pos = 0
        for k in sorted(self.params):
            size = self.params[k].size
            self.params[k] = theta[pos : pos + size].reshape(self.params[k].shape).copy()
            pos += size


class LinearPredictor(Predictor):
    """``y = scale * (X @ W.T + b)``."""

    kind = "linear"

    def __init__(self, in_dim: int, out_dim: int, seed: int = 0, scale: float = 1.0):
        self.in_dim, self.out_dim, self.seed, self.scale = in_dim, out_dim, seed, float(scale)
        rng = CounterRNG(seed, STREAM_INIT)
        self.params = {
            "W": _uniform_init(rng, in_dim, (out_dim, in_dim)),
            "b": np.zeros(out_dim),
        }

    def forward(self, X):
        X = _as_batch(X, self.in_dim)
        return self.scale * (X @ self.params["W"].T + self.params["b"]), X

    def backward(self, cache, grad_out):
        X = cache
        G = self.scale * np.asarray(grad_out, dtype=float).reshape(X.shape[0], self.out_dim)
        return {"W": G.T @ X, "b": G.sum(axis=0)}

    def config(self):
        return {"in_dim": self.in_dim, "out_dim": self.out_dim, "seed": self.seed, "scale": self.scale}


class MlpPredictor(Predictor):
    """One ReLU hidden layer; the ReLU subgradient at 0 is 0."""

    kind = "mlp"

    def __init__(self, in_dim: int, out_dim: int, hidden: int = 512, seed: int = 0):
        self.in_dim, self.out_dim, self.hidden, self.seed = in_dim, out_dim, hidden, seed
        rng = CounterRNG(seed, STREAM_INIT)
        self.params = {
            "W1": _uniform_init(rng, in_dim, (hidden, in_dim)),
            "b1": np.zeros(hidden),
            "W2": _uniform_init(rng, hidden, (out_dim, hidden)),
            "b2": np.zeros(out_dim),
        }

    def forward(self, X):
        X = _as_batch(X, self.in_dim)
        pre = X @ self.params["W1"].T + self.params["b1"]
        H = np.maximum(pre, 0.0)
        return H @ self.params["W2"].T + self.params["b2"], (X, pre, H)

    def backward(self, cache, grad_out):
        X, pre, H = cache
        G = np.asarray(grad_out, dtype=float).reshape(X.shape[0], self.out_dim)
        dH = (G @ self.params["W2"]) * (pre > 0)
        return {"W1": dH.T @ X, "b1": dH.sum(axis=0), "W2": G.T @ H, "b2": G.sum(axis=0)}

    def config(self):
        return {"in_dim": self.in_dim, "out_dim": self.out_dim, "hidden": self.hidden, "seed": self.seed}


class SlotwisePredictor(Predictor):
    """A shared MLP applied to every (group, item) slot.

    Features are ``num_slots`` consecutive blocks of ``slot_dim`` values; slot
    ``s`` belongs to group ``s // group_size`` and its input is its feature
    block followed by a one-hot group code.  Output ``s`` is that slot's
    prediction.  Used for alloy contents, where each metal/supplier pair has
    its own feature vector.
    """

    kind = "slotwise"

    def __init__(self, slot_dim: int, num_groups: int, group_size: int, hidden: int = 512, seed: int = 0):
        self.slot_dim, self.num_groups, self.group_size = slot_dim, num_groups, group_size
        self.hidden, self.seed = hidden, seed
        self.num_slots = num_groups * group_size
        self.in_dim = self.num_slots * slot_dim
        self.out_dim = self.num_slots
        self.inner = MlpPredictor(slot_dim + num_groups, 1, hidden, seed)
        self.params = self.inner.params
        code = np.zeros((self.num_slots, num_groups))
        code[np.arange(self.num_slots), np.arange(self.num_slots) // group_size] = 1.0
        self._code = code

    def _slot_inputs(self, X):
        X = _as_batch(X, self.in_dim)
        B = X.shape[0]
        blocks = X.reshape(B, self.num_slots, self.slot_dim)
        code = np.broadcast_to(self._code, (B,) + self._code.shape)
        return np.concatenate([blocks, code], axis=2).reshape(B * self.num_slots, -1), B

    def forward(self, X):
        Z, B = self._slot_inputs(X)
        self.inner.params = self.params
        out, cache = self.inner.forward(Z)
        return out.reshape(B, self.num_slots), cache

    def backward(self, cache, grad_out):
        self.inner.params = self.params
        G = np.asarray(grad_out, dtype=float).reshape(-1, 1)
        return self.inner.backward(cache, G)

    def copy(self):
        clone = super().copy()
        clone.inner = self.inner.copy()
        clone.inner.params = clone.params
        return clone

    def set_flat(self, theta):
        super().set_flat(theta)
        self.inner.params = self.params

    def config(self):
        return {
            "slot_dim": self.slot_dim,
            "num_groups": self.num_groups,
            "group_size": self.group_size,
            "hidden": self.hidden,
            "seed": self.seed,
        }


KINDS = {"linear": LinearPredictor, "mlp": MlpPredictor, "slotwise": SlotwisePredictor}


def save_checkpoint(model: Predictor, path) -> Path:
    record = {
        "format": "odece-model",
        "version": CHECKPOINT_VERSION,
        "kind": model.kind,
        "config": model.config(),
        "params": {
            k: {"shape": list(v.shape), "data": [float(t) for t in v.ravel()]}
            for k, v in sorted(model.params.items())
        },
    }
    path = Path(path)
    path.write_text(json.dumps(record) + "\n", encoding="utf-8", newline="\n")
    return path


def load_checkpoint(path) -> Predictor:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        record = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid checkpoint JSON ({exc})") from None
    if record.get("format") != "odece-model" or record.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: not a version {CHECKPOINT_VERSION} model checkpoint")
    cls = KINDS.get(record["kind"])
    if cls is None:
        raise ValueError(f"{path}: unknown model kind {record['kind']!r}")
    model = cls(**record["config"])
    for k, entry in record["params"].items():
        if k not in model.params:
            raise ValueError(f"{path}: unexpected parameter {k!r}")
        arr = np.array(entry["data"], dtype=float).reshape(entry["shape"])
        if arr.shape != model.params[k].shape:
            raise ValueError(f"{path}: parameter {k!r} has shape {arr.shape}, expected {model.params[k].shape}")
        model.params[k] = arr
    if isinstance(model, SlotwisePredictor):
        model.inner.params = model.params
    return model


class Sgd:
    method = "sgd"

    def __init__(self, lr: float):
        if not lr > 0:
            raise ValueError("learning rate must be positive")
        self.lr = lr

    def step(self, model: Predictor, grads: dict):
        _check_finite(grads)
        for k, g in grads.items():
            model.params[k] = model.params[k] - self.lr * g


class Adam:
    method = "adam"

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if not lr > 0:
            raise ValueError("learning rate must be positive")
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, model: Predictor, grads: dict):
        _check_finite(grads)
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            m = self.m.get(k, np.zeros_like(g))
            v = self.v.get(k, np.zeros_like(g))
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * g * g
            self.m[k], self.v[k] = m, v
            model.params[k] = model.params[k] - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _check_finite(grads):
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient for parameter {k!r}")


def make_optimizer(method: str, lr: float):
    if method == "adam":
        return Adam(lr)
    if method == "sgd":
        return Sgd(lr)
    raise ValueError(f"unknown optimizer {method!r}")
