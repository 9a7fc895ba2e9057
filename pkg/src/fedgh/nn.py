"""Dense-network numeric core.

A client model is a feature extractor (input -> representation) spliced with a
prediction header (representation -> logits). Everything is float64 and
batch-first: inputs are ``(n, d)`` arrays, one row per sample.
"""

from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, InputError

ACTIVATIONS = ("relu", "identity")


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)
    activation: str = "identity"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise ConfigError("weights must be 2-D and bias 1-D")
        if self.bias.shape[0] != self.weights.shape[0]:
            raise ConfigError(
                f"bias length {self.bias.shape[0]} != weight rows {self.weights.shape[0]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def init(cls, in_dim: int, out_dim: int, activation: str, rng: np.random.Generator):
        # He-uniform: U(-sqrt(6/fan_in), sqrt(6/fan_in)); zero bias.
        limit = np.sqrt(6.0 / in_dim)
        w = rng.uniform(-limit, limit, size=(out_dim, in_dim))
        return cls(w, np.zeros(out_dim), activation)


def _check_chain(layers: Sequence[DenseLayer]):
    for prev, nxt in zip(layers, layers[1:]):
        if nxt.in_dim != prev.out_dim:
            raise ConfigError(
                f"layer expects input dim {nxt.in_dim} but previous layer emits {prev.out_dim}"
            )


@dataclass
class _Stack:
    layers: list[DenseLayer] = field(default_factory=list)

    def __post_init__(self):
        _check_chain(self.layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def parameters(self) -> list[np.ndarray]:
        params = []
        for layer in self.layers:
            params.extend((layer.weights, layer.bias))
        return params

    def shapes(self) -> list[tuple[int, ...]]:
        return [p.shape for p in self.parameters()]

    def copy(self):
        return copy.deepcopy(self)


class FeatureExtractor(_Stack):
    """Maps inputs of dimension d_x to representations of dimension d_R."""

    @classmethod
    def build(cls, input_dim: int, hidden: Sequence[int], rep_dim: int, rng: np.random.Generator):
        dims = [input_dim, *hidden, rep_dim]
        layers = [
            DenseLayer.init(a, b, "relu" if i < len(dims) - 2 else "identity", rng)
            for i, (a, b) in enumerate(zip(dims, dims[1:]))
        ]
        return cls(layers)


class PredictionHeader(_Stack):
    """Maps representations to raw class logits. Same shape on every client."""

    @classmethod
    def build(cls, rep_dim: int, num_classes: int, rng: np.random.Generator, hidden: Sequence[int] = ()):
        dims = [rep_dim, *hidden, num_classes]
        layers = [
            DenseLayer.init(a, b, "relu" if i < len(dims) - 2 else "identity", rng)
            for i, (a, b) in enumerate(zip(dims, dims[1:]))
        ]
        return cls(layers)


@dataclass
class SplitModel:
    extractor: FeatureExtractor
    header: PredictionHeader

    def __post_init__(self):
        if self.extractor.output_dim != self.header.input_dim:
            raise ConfigError(
                f"extractor emits d_R={self.extractor.output_dim} "
                f"but header expects {self.header.input_dim}"
            )

    def parameters(self) -> list[np.ndarray]:
        return self.extractor.parameters() + self.header.parameters()

    def copy(self) -> SplitModel:
        return copy.deepcopy(self)


# --------------------------------------------------------------------------
# forward / backward


def _as_batch(x, dim: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ConfigError(f"expected input dimension {dim}, got shape {np.shape(x)}")
    return arr, single


def _forward(layers: Sequence[DenseLayer], x: np.ndarray):
    """Run ``x`` through ``layers``; returns output and the per-layer cache."""
    cache = []
    h = x
    for layer in layers:
        z = h @ layer.weights.T + layer.bias
        cache.append((h, z))
        h = np.maximum(z, 0.0) if layer.activation == "relu" else z
    return h, cache


def _backward(layers: Sequence[DenseLayer], cache, grad_out: np.ndarray):
    """Backprop ``grad_out`` (d loss / d output). Returns param grads and d loss / d input."""
    grads = []
    g = grad_out
    for layer, (h_in, z) in zip(reversed(layers), reversed(cache)):
        if layer.activation == "relu":
            g = g * (z > 0)
        grads.append(g.sum(axis=0))
        grads.append(g.T @ h_in)
        g = g @ layer.weights
    grads.reverse()  # now [dW0, db0, dW1, db1, ...]
    return grads, g


def forward_extractor(extractor: FeatureExtractor, x) -> np.ndarray:
    arr, single = _as_batch(x, extractor.input_dim)
    out, _ = _forward(extractor.layers, arr)
    return out[0] if single else out


def forward_header(header: PredictionHeader, rep) -> np.ndarray:
    arr, single = _as_batch(rep, header.input_dim)
    out, _ = _forward(header.layers, arr)
    return out[0] if single else out


def predict_logits(model: SplitModel, x) -> np.ndarray:
    return forward_header(model.header, forward_extractor(model.extractor, x))


# --------------------------------------------------------------------------
# loss


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _check_labels(labels: np.ndarray, num_classes: int):
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise InputError(f"label out of range [0, {num_classes})")


def cross_entropy(logits, label: int) -> float:
    """-log softmax(logits)[label] for a single logit vector."""
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < logits.shape[-1]:
        raise InputError(f"label {label} out of range [0, {logits.shape[-1]})")
    return float(-log_softmax(logits)[label])


def mean_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    labels = np.asarray(labels, dtype=np.int64)
    _check_labels(labels, logits.shape[1])
    return float(-log_softmax(logits)[np.arange(len(labels)), labels].mean())


def _ce_grad(logits: np.ndarray, labels: np.ndarray):
    """Mean CE over the batch and its gradient w.r.t. the logits."""
    n = len(labels)
    lsm = log_softmax(logits)
    loss = float(-lsm[np.arange(n), labels].mean())
    grad = np.exp(lsm)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def _as_labels(labels, n: int, num_classes: int) -> np.ndarray:
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if labels.shape != (n,):
        raise InputError(f"{labels.shape[0]} labels for {n} samples")
    _check_labels(labels, num_classes)
    return labels


def model_gradients(model: SplitModel, features, labels):
    """Mean CE loss on the batch and gradients aligned with ``model.parameters()``."""
    x, _ = _as_batch(features, model.extractor.input_dim)
    if x.shape[0] == 0:
        raise InputError("empty batch")
    y = _as_labels(labels, x.shape[0], model.header.output_dim)
    rep, ext_cache = _forward(model.extractor.layers, x)
    logits, head_cache = _forward(model.header.layers, rep)
    loss, g = _ce_grad(logits, y)
    head_grads, g_rep = _backward(model.header.layers, head_cache, g)
    ext_grads, _ = _backward(model.extractor.layers, ext_cache, g_rep)
    return loss, ext_grads + head_grads


def header_gradients(header: PredictionHeader, reps, labels):
    r, _ = _as_batch(reps, header.input_dim)
    if r.shape[0] == 0:
        raise InputError("empty batch")
    y = _as_labels(labels, r.shape[0], header.output_dim)
    logits, cache = _forward(header.layers, r)
    loss, g = _ce_grad(logits, y)
    grads, _ = _backward(header.layers, cache, g)
    return loss, grads


def _apply(params: list[np.ndarray], grads: list[np.ndarray], lr: float):
    for p, g in zip(params, grads):
        p -= lr * g


def sgd_step(model: SplitModel, features, labels, lr: float) -> float:
    """One mini-batch SGD step on every parameter. Returns the pre-update mean loss."""
    if lr < 0:
        raise InputError("learning rate must be non-negative")
    loss, grads = model_gradients(model, features, labels)
    if lr:
        _apply(model.parameters(), grads, lr)
    return loss


def sgd_header_step(header: PredictionHeader, rep, label, lr: float) -> float:
    """One SGD step on the header alone. ``rep``/``label`` may be a single pair or a batch."""
    if lr < 0:
        raise InputError("learning rate must be non-negative")
    loss, grads = header_gradients(header, rep, label)
    if lr:
        _apply(header.parameters(), grads, lr)
    return loss


def param_count(component) -> int:
    return sum(p.size for p in component.parameters())


def finite_diff_grad(loss_fn: Callable[[], float], params: Sequence[np.ndarray], eps: float = 1e-6):
    """Central-difference gradient of ``loss_fn()`` w.r.t. each array in ``params``.

    ``params`` are perturbed in place and restored; ``loss_fn`` must read them.
    """
    if eps <= 0:
        raise InputError("eps must be positive")
    grads = []
    for p in params:
        g = np.zeros_like(p, dtype=np.float64)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn()
            flat[i] = orig - eps
            down = loss_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def checksum(params: Sequence[np.ndarray]) -> str:
    """Byte-level fingerprint of a parameter list (for non-interference checks)."""
    h = hashlib.sha256()
    for p in params:
        h.update(np.ascontiguousarray(p).tobytes())
    return h.hexdigest()
