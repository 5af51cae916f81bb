"""Geographically weighted graph convolutional classifier.

Each layer computes ``norm @ H @ W``; hidden layers apply ReLU and the last
layer applies a row softmax. Training is full batch over the whole graph
with the cross-entropy restricted to the training mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .geograph import WeightedGraph
from .optim import OPTIMIZERS, TrainTrace, fit
from .tensor import as_matrix, make_rng, relu_grad, softmax_rows

__all__ = [
    "GcnConfig",
    "GcnModel",
    "TrainTrace",
    "init_model",
    "forward",
    "loss",
    "cross_entropy",
    "backward",
    "train",
    "predict",
    "argmax_rows",
    "mask_indices",
]

LOG_FLOOR = 1e-15


@dataclass(frozen=True)
class GcnConfig:
    layer_dims: tuple = (6, 16, 4)
    learning_rate: float = 0.01
    max_epochs: int = 2000
    seed: int = 0
    weight_init_scale: float = 1.0
    optimizer: str = "gd"

    def __post_init__(self):
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        if len(self.layer_dims) < 2 or any(d < 1 for d in self.layer_dims):
            raise ValidationError(f"layer_dims needs >= 2 positive entries, got {self.layer_dims}")
        if self.learning_rate < 0:
            raise ValidationError("learning_rate must be non-negative")
        if self.max_epochs < 0:
            raise ValidationError("max_epochs must be non-negative")
        if self.weight_init_scale < 0:
            raise ValidationError("weight_init_scale must be non-negative")
        if self.optimizer not in OPTIMIZERS:
            raise ValidationError(f"unknown optimizer {self.optimizer!r}")

    @property
    def n_classes(self) -> int:
        return self.layer_dims[-1]


@dataclass
class GcnModel:
    weights: list
    config: GcnConfig

    def __post_init__(self):
        dims = self.config.layer_dims
        if len(self.weights) != len(dims) - 1:
            raise ValidationError(
                f"expected {len(dims) - 1} weight matrices for layer_dims {dims}, got {len(self.weights)}"
            )
        self.weights = [as_matrix(w, "weight") for w in self.weights]
        for l, w in enumerate(self.weights):
            if w.shape != (dims[l], dims[l + 1]):
                raise ValidationError(
                    f"weight {l} has shape {w.shape}, expected {(dims[l], dims[l + 1])}"
                )
            if not np.all(np.isfinite(w)):
                raise ValidationError(f"weight {l} has non-finite entries")


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, scale: float) -> np.ndarray:
    limit = scale * np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_model(config: GcnConfig, rng: np.random.Generator | None = None) -> GcnModel:
    """Glorot-uniform weights; ``rng`` defaults to one seeded from ``config.seed``."""
    if rng is None:
        rng = make_rng(config.seed)
    dims = config.layer_dims
    weights = [
        glorot_uniform(rng, dims[l], dims[l + 1], config.weight_init_scale)
        for l in range(len(dims) - 1)
    ]
    return GcnModel(weights=weights, config=config)


def _check_inputs(model: GcnModel, graph: WeightedGraph, features: np.ndarray) -> np.ndarray:
    x = as_matrix(features, "features")
    if x.shape[0] != graph.n:
        raise ValidationError(f"features have {x.shape[0]} rows but graph has {graph.n} nodes")
    if x.shape[1] != model.config.layer_dims[0]:
        raise ValidationError(
            f"features have {x.shape[1]} columns but the model expects {model.config.layer_dims[0]}"
        )
    return x


def _forward(weights, norm, x):
    hidden = [x]
    aggregated = []
    pre = []
    h = x
    for l, w in enumerate(weights):
        a = norm @ h
        z = a @ w
        aggregated.append(a)
        pre.append(z)
        if l < len(weights) - 1:
            h = np.maximum(z, 0.0)
            hidden.append(h)
    return softmax_rows(pre[-1]), hidden, aggregated, pre


def forward(model: GcnModel, graph: WeightedGraph, features):
    """Return ``(probabilities, hidden)`` where ``hidden[0]`` is the input."""
    x = _check_inputs(model, graph, features)
    probs, hidden, _, _ = _forward(model.weights, graph.norm, x)
    return probs, hidden


def mask_indices(mask, n: int) -> np.ndarray:
    """Accept a boolean mask or an index collection; return sorted indices."""
    if mask is None:
        return np.arange(n)
    m = np.asarray(mask)
    if m.dtype == bool:
        if m.shape != (n,):
            raise ValidationError(f"boolean mask has shape {m.shape}, expected ({n},)")
        return np.flatnonzero(m)
    idx = np.unique(m.astype(np.int64))
    if idx.size and (idx[0] < 0 or idx[-1] >= n):
        raise ValidationError("mask index out of range")
    return idx


def cross_entropy(probabilities, labels, idx) -> float:
    if len(idx) == 0:
        raise ValidationError("cannot compute a loss over an empty mask")
    p = probabilities[idx, labels[idx]]
    return float(-np.mean(np.log(np.maximum(p, LOG_FLOOR))))


def loss(probabilities, labels, mask=None) -> float:
    """Mean negative log-probability of the true class over ``mask``."""
    probs = as_matrix(probabilities)
    y = _labels(labels, probs.shape[0], probs.shape[1])
    return cross_entropy(probs, y, mask_indices(mask, probs.shape[0]))


def _labels(labels, n: int, c: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if y.shape[0] != n:
        raise ValidationError(f"{y.shape[0]} labels for {n} nodes")
    if y.size and (y.min() < 0 or y.max() >= c):
        raise ValidationError(f"labels must lie in [0, {c})")
    return y


def _loss_and_grads(weights, norm, x, y, idx):
    probs, hidden, aggregated, pre = _forward(weights, norm, x)
    j = cross_entropy(probs, y, idx)
    delta = np.zeros_like(probs)
    delta[idx] = probs[idx]
    delta[idx, y[idx]] -= 1.0
    delta /= len(idx)
    grads = [None] * len(weights)
    for l in range(len(weights) - 1, -1, -1):
        grads[l] = aggregated[l].T @ delta
        if l > 0:
            delta = (norm.T @ (delta @ weights[l].T)) * relu_grad(pre[l - 1])
    return j, grads, probs


def backward(model: GcnModel, graph: WeightedGraph, features, labels, mask=None) -> list:
    """Analytic gradients of :func:`loss` with respect to every weight matrix."""
    x = _check_inputs(model, graph, features)
    y = _labels(labels, graph.n, model.config.n_classes)
    idx = mask_indices(mask, graph.n)
    if len(idx) == 0:
        raise ValidationError("cannot differentiate a loss over an empty mask")
    _, grads, _ = _loss_and_grads(model.weights, graph.norm, x, y, idx)
    return grads


def argmax_rows(probabilities) -> np.ndarray:
    # np.argmax returns the first maximal index, so ties go to the lowest class
    return np.argmax(as_matrix(probabilities), axis=1)


def _accuracy(pred, y, idx) -> float:
    if len(idx) == 0:
        return 0.0
    return float(np.mean(pred[idx] == y[idx]))


def train(model: GcnModel, graph: WeightedGraph, features, labels, masks, config: GcnConfig | None = None):
    """Full-batch training; returns ``(best_model, trace)``.

    ``masks`` maps ``"train"`` and ``"val"`` to boolean masks or index sets.
    """
    config = config or model.config
    x = _check_inputs(model, graph, features)
    y = _labels(labels, graph.n, config.n_classes)
    train_idx = mask_indices(masks["train"], graph.n)
    val_idx = mask_indices(masks.get("val"), graph.n) if masks.get("val") is not None else np.arange(0)
    if len(train_idx) == 0:
        raise ValidationError("training mask is empty")
    if np.intersect1d(train_idx, val_idx).size:
        raise ValidationError("train and validation masks overlap")
    norm = graph.norm

    def objective(weights):
        j, grads, probs = _loss_and_grads(weights, norm, x, y, train_idx)
        pred = argmax_rows(probs)
        return j, grads, _accuracy(pred, y, train_idx), _accuracy(pred, y, val_idx)

    weights, trace = fit(
        model.weights,
        objective,
        learning_rate=config.learning_rate,
        max_epochs=config.max_epochs,
        optimizer=config.optimizer,
        has_validation=len(val_idx) > 0,
    )
    return GcnModel(weights=weights, config=config), trace


def predict(model: GcnModel, graph: WeightedGraph, features):
    """Return ``(labels, probabilities)``; ties resolve to the lowest class index."""
    probs, _ = forward(model, graph, features)
    return argmax_rows(probs), probs
