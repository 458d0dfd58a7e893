"""Minimal neural-network engine: softmax regression and one-hidden-layer ReLU nets.

Weights live in a single flat float64 vector laid out layer-major
(W1, b1, W2, b2) with each W stored row-major, so models are cheap to
average, serialize and diff.  All operations are pure and deterministic
per seed.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .seeds import normalize_seed


class NumericError(RuntimeError):
    """Non-finite value encountered in a forward pass."""

    def __init__(self, layer: int):
        super().__init__(f"non-finite activation in layer {layer}")
        self.layer = layer


class FormatError(ValueError):
    """Malformed serialized weights."""


class Compression(Enum):
    NONE = "none"
    QUANTIZED8 = "quantized8"


@dataclass(frozen=True)
class ModelShape:
    """Layer widths (input, [hidden], classes); hidden layers use ReLU, output softmax."""

    layer_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        object.__setattr__(self, "layer_dims", dims)
        if len(dims) < 2:
            raise ValueError("need at least input and class dims")
        if len(dims) > 3:
            raise ValueError("only softmax regression and one-hidden-layer nets are supported")
        if any(d < 1 for d in dims):
            raise ValueError(f"layer dims must be positive, got {dims}")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def classes(self) -> int:
        return self.layer_dims[-1]

    @property
    def num_weights(self) -> int:
        dims = self.layer_dims
        return sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))


@dataclass
class ModelParams:
    """Flat weight vector plus its shape descriptor; the payload peers exchange."""

    shape: ModelShape
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if self.weights.size != self.shape.num_weights:
            raise ValueError(
                f"weight vector has {self.weights.size} entries, "
                f"shape {self.shape.layer_dims} needs {self.shape.num_weights}")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    def copy(self) -> "ModelParams":
        return ModelParams(self.shape, self.weights.copy())


@dataclass
class Dataset:
    """Feature matrix with integer labels in [0, classes)."""

    features: np.ndarray
    labels: np.ndarray
    classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-d matrix")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels disagree on row count")
        if self.features.shape[0] < 1:
            raise ValueError("dataset needs at least one row")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")
        if self.classes < 1:
            raise ValueError("classes must be positive")
        if self.labels.min() < 0 or self.labels.max() >= self.classes:
            raise ValueError(f"labels must lie in [0, {self.classes})")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.classes)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int
    learning_rate: float
    seed: int

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError("learning_rate must be finite and > 0")


@dataclass(frozen=True)
class EvalMetrics:
    loss: float
    accuracy: float


def _layer_views(shape: ModelShape, flat: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Slice the flat vector into (W, b) views sharing its memory."""
    views = []
    offset = 0
    dims = shape.layer_dims
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        w = flat[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = flat[offset:offset + fan_out]
        offset += fan_out
        views.append((w, b))
    return views


def init_model(shape: ModelShape, seed: int) -> ModelParams:
    """Glorot-uniform weights (limit sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = np.random.default_rng(normalize_seed(seed))
    flat = np.zeros(shape.num_weights)
    for w, b in _layer_views(shape, flat):
        fan_in, fan_out = w.shape
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        w[:] = rng.uniform(-limit, limit, size=w.shape)
        b[:] = 0.0
    return ModelParams(shape, flat)


def _forward(shape: ModelShape, flat: np.ndarray, x: np.ndarray):
    """Returns (logits, hidden pre-activation or None, hidden activation or None)."""
    views = _layer_views(shape, flat)
    if len(views) == 1:
        (w, b), = views
        z = x @ w + b
        if not np.all(np.isfinite(z)):
            raise NumericError(layer=1)
        return z, None, None
    (w1, b1), (w2, b2) = views
    z1 = x @ w1 + b1
    if not np.all(np.isfinite(z1)):
        raise NumericError(layer=1)
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ w2 + b2
    if not np.all(np.isfinite(z2)):
        raise NumericError(layer=2)
    return z2, z1, a1


def _softmax_and_loss(logits: np.ndarray, y: np.ndarray):
    """Stable softmax probabilities and mean cross-entropy in nats."""
    zmax = logits.max(axis=1, keepdims=True)
    shifted = logits - zmax
    expz = np.exp(shifted)
    denom = expz.sum(axis=1, keepdims=True)
    probs = expz / denom
    # loss via log-sum-exp, no log(0) risk
    logsumexp = np.log(denom[:, 0]) + zmax[:, 0]
    rows = np.arange(logits.shape[0])
    loss = float(np.mean(logsumexp - logits[rows, y]))
    return probs, loss


def loss_and_grad(params: ModelParams, batch_features: np.ndarray,
                  batch_labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its exact gradient, flat-aligned.

    For shape [d, C] this is softmax regression:
    grad_W = X^T (softmax(XW+b) - onehot(y)) / m.
    """
    x = np.asarray(batch_features, dtype=np.float64)
    y = np.asarray(batch_labels, dtype=np.int64).reshape(-1)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("batch must be a non-empty 2-d matrix")
    if x.shape[1] != params.shape.input_dim:
        raise ValueError(
            f"feature width {x.shape[1]} does not match input dim {params.shape.input_dim}")
    m = x.shape[0]
    logits, z1, a1 = _forward(params.shape, params.weights, x)
    probs, loss = _softmax_and_loss(logits, y)
    delta = probs.copy()
    delta[np.arange(m), y] -= 1.0
    delta /= m

    grad = np.zeros_like(params.weights)
    gviews = _layer_views(params.shape, grad)
    views = _layer_views(params.shape, params.weights)
    if len(views) == 1:
        gw, gb = gviews[0]
        gw[:] = x.T @ delta
        gb[:] = delta.sum(axis=0)
    else:
        (w1, _), (w2, _) = views
        (gw1, gb1), (gw2, gb2) = gviews
        gw2[:] = a1.T @ delta
        gb2[:] = delta.sum(axis=0)
        d1 = (delta @ w2.T) * (z1 > 0)
        gw1[:] = x.T @ d1
        gb1[:] = d1.sum(axis=0)
    return loss, grad


def input_gradient(params: ModelParams, features: np.ndarray,
                   labels: np.ndarray) -> np.ndarray:
    """Per-row gradient of each row's own loss with respect to its features.

    For softmax regression: (softmax(xW+b) - onehot(y)) W^T.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    logits, z1, _ = _forward(params.shape, params.weights, x)
    probs, _ = _softmax_and_loss(logits, y)
    delta = probs
    delta[np.arange(x.shape[0]), y] -= 1.0
    views = _layer_views(params.shape, params.weights)
    if len(views) == 1:
        (w, _), = views
        return delta @ w.T
    (w1, _), (w2, _) = views
    d1 = (delta @ w2.T) * (z1 > 0)
    return d1 @ w1.T


def train(params: ModelParams, data: Dataset, cfg: TrainConfig) -> tuple[ModelParams, EvalMetrics]:
    """Mini-batch SGD; returns updated params and final-epoch training metrics.

    Batches come from a fresh seeded shuffle each epoch and the short last
    batch is kept.  Final-epoch metrics are the sample-weighted mean of the
    per-batch loss/accuracy measured before each update.
    """
    if data.dim != params.shape.input_dim:
        raise ValueError(
            f"dataset width {data.dim} does not match input dim {params.shape.input_dim}")
    rng = np.random.default_rng(normalize_seed(cfg.seed))
    flat = params.weights.copy()
    n = data.n
    final_loss = 0.0
    final_correct = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        last = epoch == cfg.epochs - 1
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb, yb = data.features[idx], data.labels[idx]
            current = ModelParams(params.shape, flat)
            if last:
                logits, _, _ = _forward(params.shape, flat, xb)
                final_correct += int(np.sum(np.argmax(logits, axis=1) == yb))
            loss, grad = loss_and_grad(current, xb, yb)
            if last:
                final_loss += loss * len(idx)
            flat = flat - cfg.learning_rate * grad
    metrics = EvalMetrics(loss=final_loss / n, accuracy=final_correct / n)
    return ModelParams(params.shape, flat), metrics


def evaluate(params: ModelParams, data: Dataset) -> EvalMetrics:
    """Mean cross-entropy and argmax accuracy; argmax ties go to the lowest class."""
    if data.dim != params.shape.input_dim:
        raise ValueError(
            f"dataset width {data.dim} does not match input dim {params.shape.input_dim}")
    logits, _, _ = _forward(params.shape, params.weights, data.features)
    _, loss = _softmax_and_loss(logits, data.labels)
    predictions = np.argmax(logits, axis=1)  # np.argmax returns the first (lowest) max index
    accuracy = float(np.mean(predictions == data.labels))
    return EvalMetrics(loss=loss, accuracy=accuracy)


def _tensors(params: ModelParams) -> list[np.ndarray]:
    out = []
    for w, b in _layer_views(params.shape, params.weights):
        out.append(w.reshape(-1))
        out.append(b)
    return out


def serialize(params: ModelParams, compression: Compression = Compression.NONE) -> bytes:
    """Wire format: u32-LE layer count, u32-LE dims, then the payload.

    NONE: float64-LE weights in layout order (lossless).
    QUANTIZED8: per tensor, (min, max) as float64-LE then uint8 codes;
    dequantized value is min + code*(max-min)/255.
    """
    dims = params.shape.layer_dims
    header = struct.pack("<I", len(dims)) + struct.pack(f"<{len(dims)}I", *dims)
    if compression is Compression.NONE:
        return header + params.weights.astype("<f8").tobytes()
    chunks = [header]
    for tensor in _tensors(params):
        lo, hi = float(tensor.min()), float(tensor.max())
        chunks.append(struct.pack("<dd", lo, hi))
        if hi > lo:
            codes = np.rint((tensor - lo) * (255.0 / (hi - lo))).astype("<u1")
        else:
            codes = np.zeros(tensor.size, dtype="<u1")
        chunks.append(codes.tobytes())
    return b"".join(chunks)


def deserialize(blob: bytes, shape: ModelShape,
                compression: Compression = Compression.NONE) -> ModelParams:
    if len(blob) < 4:
        raise FormatError("truncated header")
    (count,) = struct.unpack_from("<I", blob, 0)
    if len(blob) < 4 + 4 * count:
        raise FormatError("truncated shape header")
    dims = struct.unpack_from(f"<{count}I", blob, 4)
    if dims != shape.layer_dims:
        raise FormatError(f"shape mismatch: payload {dims}, expected {shape.layer_dims}")
    offset = 4 + 4 * count
    body = blob[offset:]
    if compression is Compression.NONE:
        expected = 8 * shape.num_weights
        if len(body) != expected:
            raise FormatError(f"payload is {len(body)} bytes, expected {expected}")
        flat = np.frombuffer(body, dtype="<f8").astype(np.float64)
        return ModelParams(shape, flat)
    flat = np.zeros(shape.num_weights)
    pos = 0
    for tensor in _tensors(ModelParams(shape, flat)):
        if len(body) < pos + 16 + tensor.size:
            raise FormatError("truncated quantized payload")
        lo, hi = struct.unpack_from("<dd", body, pos)
        pos += 16
        codes = np.frombuffer(body, dtype="<u1", count=tensor.size, offset=pos)
        pos += tensor.size
        tensor[:] = lo + codes.astype(np.float64) * ((hi - lo) / 255.0)
    if pos != len(body):
        raise FormatError(f"trailing {len(body) - pos} bytes in payload")
    return ModelParams(shape, flat)
