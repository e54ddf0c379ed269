"""Feed-forward classifier heads trained with Adam on softmax cross-entropy.

Two heads share this machinery: the main fused-feature classifier
(in -> 512 -> 256 -> 128 -> 2, ReLU, dropout 0.1 after each hidden layer)
and the two-stage text baseline (a single 768 -> 2 linear layer with input
dropout). Binary cross-entropy with a softmax output is implemented as its
mathematically equivalent 2-class softmax cross-entropy.

Training is a pure function of (data, config, seed): parameter init, epoch
shuffling and dropout masks all draw from one seeded generator, so a repeated
run yields bit-identical parameters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, TrainingError
from .serialize import decode_array, encode_array

AC_HIDDEN = (512, 256, 128)
N_CLASSES = 2
TSP_INPUT_DIM = 768

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    dropout: float = 0.1
    batch_size: int = 16
    epochs: int = 50
    seed: int = 0

    def validated(self) -> "TrainConfig":
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("lr must be > 0, batch_size and epochs >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        return self


@dataclass
class MLPModel:
    weights: list[np.ndarray]  # weights[i]: (widths[i], widths[i+1])
    biases: list[np.ndarray]
    dropout: float
    input_dropout: bool = False  # TSP head drops inputs instead of hiddens

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def logits(self, X: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        """Forward pass; pass an rng to apply (inverted) dropout for training."""
        h = np.asarray(X, dtype=np.float64)
        keep = 1.0 - self.dropout
        if rng is not None and self.input_dropout and self.dropout > 0.0:
            h = h * (rng.random(h.shape) < keep) / keep
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W + b
            if i < len(self.weights) - 1:
                h = np.maximum(h, 0.0)
                if rng is not None and not self.input_dropout and self.dropout > 0.0:
                    h = h * (rng.random(h.shape) < keep) / keep
        return h

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """P(label = 1) per row, dropout disabled."""
        return softmax(self.logits(X))[:, 1]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)

    def flat_params(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.weights + self.biases])


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient w.r.t. the logits."""
    n = logits.shape[0]
    probs = softmax(logits)
    loss = float(-np.log(np.maximum(probs[np.arange(n), labels], 1e-300)).mean())
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def init_mlp(widths: list[int], rng: np.random.Generator,
             dropout: float, input_dropout: bool = False) -> MLPModel:
    # He-normal init for the ReLU stack.
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return MLPModel(weights=weights, biases=biases, dropout=dropout,
                    input_dropout=input_dropout)


def _forward_backward(model: MLPModel, X: np.ndarray, y: np.ndarray,
                      rng: np.random.Generator | None):
    """Loss and parameter gradients for one batch.

    Dropout masks (when rng is given) are sampled in the same order as in
    MLPModel.logits so the two stay consistent.
    """
    keep = 1.0 - model.dropout
    h = np.asarray(X, dtype=np.float64)
    if rng is not None and model.input_dropout and model.dropout > 0.0:
        mask = (rng.random(h.shape) < keep) / keep
        h = h * mask
    activations = [h]  # post-activation (and post-dropout) inputs per layer
    masks: list[np.ndarray | None] = []
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = activations[-1] @ W + b
        if i < len(model.weights) - 1:
            a = np.maximum(z, 0.0)
            if rng is not None and not model.input_dropout and model.dropout > 0.0:
                mask = (rng.random(a.shape) < keep) / keep
                a = a * mask
                masks.append(mask)
            else:
                masks.append(None)
            activations.append(a)
        else:
            logits = z
    loss, delta = cross_entropy(logits, y)
    grads_w = [np.empty_like(W) for W in model.weights]
    grads_b = [np.empty_like(b) for b in model.biases]
    for i in reversed(range(len(model.weights))):
        grads_w[i] = activations[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ model.weights[i].T
            if masks[i - 1] is not None:
                delta = delta * masks[i - 1]
            delta = delta * (activations[i] > 0.0)
    return loss, grads_w, grads_b


def _train(model: MLPModel, X: np.ndarray, y: np.ndarray, cfg: TrainConfig,
           rng: np.random.Generator) -> MLPModel:
    n = X.shape[0]
    params = model.weights + model.biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    t = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):  # last partial batch kept
            batch = order[start : start + cfg.batch_size]
            _, grads_w, grads_b = _forward_backward(model, X[batch], y[batch], rng)
            t += 1
            for p, g, mi, vi in zip(params, grads_w + grads_b, m, v):
                mi *= ADAM_BETA1
                mi += (1 - ADAM_BETA1) * g
                vi *= ADAM_BETA2
                vi += (1 - ADAM_BETA2) * g * g
                m_hat = mi / (1 - ADAM_BETA1**t)
                v_hat = vi / (1 - ADAM_BETA2**t)
                p -= cfg.lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return model


def _check_training_set(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] < 2:
        raise TrainingError("training set must be n x dim with n >= 2 labels")
    if not np.all(np.isfinite(X)):
        raise TrainingError("training set contains non-finite values")
    if set(np.unique(y)) != {0, 1}:
        raise TrainingError("training set must contain both classes")
    return X, y


def train_ac(X: np.ndarray, y: np.ndarray, cfg: TrainConfig = TrainConfig()) -> MLPModel:
    """Train the fused-feature head: in -> 512 -> 256 -> 128 -> 2."""
    X, y = _check_training_set(X, y)
    cfg = cfg.validated()
    rng = np.random.default_rng(cfg.seed)
    model = init_mlp([X.shape[1], *AC_HIDDEN, N_CLASSES], rng, cfg.dropout)
    return _train(model, X, y, cfg, rng)


def train_tsp(X: np.ndarray, y: np.ndarray, cfg: TrainConfig = TrainConfig()) -> MLPModel:
    """Train the two-stage text head: a single 768 -> 2 linear layer."""
    X, y = _check_training_set(X, y)
    if X.shape[1] != TSP_INPUT_DIM:
        raise TrainingError(f"TSP head expects {TSP_INPUT_DIM}-dim inputs, got {X.shape[1]}")
    cfg = cfg.validated()
    rng = np.random.default_rng(cfg.seed)
    model = init_mlp([TSP_INPUT_DIM, N_CLASSES], rng, cfg.dropout, input_dropout=True)
    return _train(model, X, y, cfg, rng)


def grad_check(model: MLPModel, X: np.ndarray, y: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Dropout must be disabled (the loss has to be deterministic in the
    parameters for finite differences to be meaningful).
    """
    if model.dropout != 0.0:
        raise TrainingError("grad_check requires dropout disabled")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    _, grads_w, grads_b = _forward_backward(model, X, y, rng=None)
    analytic = grads_w + grads_b
    params = model.weights + model.biases
    worst = 0.0
    for p, g in zip(params, analytic):
        flat_p = p.ravel()
        flat_g = g.ravel()
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            up, _ = cross_entropy(model.logits(X), y)
            flat_p[i] = orig - h
            down, _ = cross_entropy(model.logits(X), y)
            flat_p[i] = orig
            numeric = (up - down) / (2.0 * h)
            denom = max(abs(flat_g[i]) + abs(numeric), 1e-8)
            worst = max(worst, abs(flat_g[i] - numeric) / denom)
    return worst


# --- serialization ---------------------------------------------------------

MODEL_FORMAT_VERSION = 1


def mlp_to_envelope(model: MLPModel, kind: str, config: dict | None = None) -> dict:
    blobs = {}
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        blobs[f"w{i}"] = encode_array(W)
        blobs[f"b{i}"] = encode_array(b)
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": kind,
        "config": {
            "dropout": model.dropout,
            "input_dropout": model.input_dropout,
            "n_layers": len(model.weights),
            **(config or {}),
        },
        "blobs": blobs,
    }


def mlp_from_envelope(doc: dict) -> MLPModel:
    cfg = doc["config"]
    n_layers = int(cfg["n_layers"])
    weights = [decode_array(doc["blobs"][f"w{i}"]) for i in range(n_layers)]
    biases = [decode_array(doc["blobs"][f"b{i}"]) for i in range(n_layers)]
    return MLPModel(weights=weights, biases=biases, dropout=float(cfg["dropout"]),
                    input_dropout=bool(cfg["input_dropout"]))


def save_model(envelope: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(envelope, sort_keys=True))


def load_envelope(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ConfigError(f"unsupported model format version {doc.get('format_version')}")
    return doc
