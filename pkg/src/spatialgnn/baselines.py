"""Coordinate-as-feature comparison models.

Both models see each sample independently (no graph): a fully connected
ReLU network and a single-channel 1-D convolution followed by dense layers.
Latitude and longitude enter as two extra input columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ValidationError
from .geoggnn import _accuracy, _labels, argmax_rows, cross_entropy, glorot_uniform, mask_indices
from .optim import OPTIMIZERS, fit
from .tensor import as_matrix, make_rng, relu_grad, softmax_rows

__all__ = [
    "MlpConfig",
    "CnnConfig",
    "MlpModel",
    "CnnModel",
    "append_coords",
    "mlp_init",
    "mlp_forward",
    "mlp_backward",
    "mlp_train",
    "cnn_init",
    "cnn_forward",
    "cnn_backward",
    "cnn_train",
    "baseline_predict",
]


def _check_common(learning_rate, max_epochs, optimizer):
    if learning_rate < 0:
        raise ValidationError("learning_rate must be non-negative")
    if max_epochs < 0:
        raise ValidationError("max_epochs must be non-negative")
    if optimizer not in OPTIMIZERS:
        raise ValidationError(f"unknown optimizer {optimizer!r}")


@dataclass(frozen=True)
class MlpConfig:
    layer_dims: tuple = (8, 32, 32, 4)
    learning_rate: float = 0.01
    max_epochs: int = 2000
    seed: int = 0
    optimizer: str = "gd"

    def __post_init__(self):
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        if len(self.layer_dims) < 2 or any(d < 1 for d in self.layer_dims):
            raise ValidationError(f"layer_dims needs >= 2 positive entries, got {self.layer_dims}")
        _check_common(self.learning_rate, self.max_epochs, self.optimizer)

    @property
    def n_classes(self) -> int:
        return self.layer_dims[-1]


@dataclass(frozen=True)
class CnnConfig:
    input_len: int = 8
    kernel_size: int = 3
    channels: int = 8
    dense_dims: tuple = (32, 4)
    learning_rate: float = 0.01
    max_epochs: int = 2000
    seed: int = 0
    optimizer: str = "gd"

    def __post_init__(self):
        object.__setattr__(self, "dense_dims", tuple(int(d) for d in self.dense_dims))
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValidationError(f"kernel_size must be a positive odd number, got {self.kernel_size}")
        if self.kernel_size > self.input_len:
            raise ValidationError(
                f"kernel_size {self.kernel_size} exceeds input length {self.input_len}"
            )
        if self.channels < 1:
            raise ValidationError("channels must be positive")
        if len(self.dense_dims) < 1 or any(d < 1 for d in self.dense_dims):
            raise ValidationError("dense_dims needs at least the class count")
        _check_common(self.learning_rate, self.max_epochs, self.optimizer)

    @property
    def conv_out_len(self) -> int:
        return self.input_len - self.kernel_size + 1

    @property
    def n_classes(self) -> int:
        return self.dense_dims[-1]


@dataclass
class MlpModel:
    """``params`` alternates weight and bias: ``[W0, b0, W1, b1, ...]``."""

    params: list
    config: MlpConfig

    def __post_init__(self):
        self.params = [as_matrix(p) for p in self.params]
        _check_dense_params(self.params, self.config.layer_dims)


@dataclass
class CnnModel:
    """``params`` is ``[kernel (k, ch), conv_bias (1, ch), W0, b0, ...]``."""

    params: list
    config: CnnConfig

    def __post_init__(self):
        self.params = [as_matrix(p) for p in self.params]
        cfg = self.config
        if len(self.params) < 2:
            raise ValidationError("CNN needs convolution parameters")
        if self.params[0].shape != (cfg.kernel_size, cfg.channels):
            raise ValidationError(f"kernel shape {self.params[0].shape} does not match config")
        if self.params[1].shape != (1, cfg.channels):
            raise ValidationError(f"conv bias shape {self.params[1].shape} does not match config")
        _check_dense_params(self.params[2:], (cfg.conv_out_len * cfg.channels,) + cfg.dense_dims)


def _check_dense_params(params, dims):
    if len(params) != 2 * (len(dims) - 1):
        raise ValidationError(f"expected {2 * (len(dims) - 1)} dense parameters, got {len(params)}")
    for l in range(len(dims) - 1):
        w, b = params[2 * l], params[2 * l + 1]
        if w.shape != (dims[l], dims[l + 1]) or b.shape != (1, dims[l + 1]):
            raise ValidationError(
                f"dense layer {l} has shapes {w.shape}/{b.shape}, expected "
                f"{(dims[l], dims[l + 1])}/{(1, dims[l + 1])}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValidationError(f"dense layer {l} has non-finite entries")


def append_coords(features, coords) -> np.ndarray:
    """Stack ``coords`` (n, 2) to the right of ``features`` (n, f)."""
    x = as_matrix(features, "features")
    c = as_matrix(coords, "coords")
    if c.shape != (x.shape[0], 2):
        raise ValidationError(f"coords have shape {c.shape}, expected ({x.shape[0]}, 2)")
    return np.hstack([x, c])


def _dense_init(rng, dims):
    params = []
    for l in range(len(dims) - 1):
        params.append(glorot_uniform(rng, dims[l], dims[l + 1], 1.0))
        params.append(np.zeros((1, dims[l + 1])))
    return params


def _dense_forward(params, x):
    acts = [x]
    pre = []
    h = x
    n_layers = len(params) // 2
    for l in range(n_layers):
        z = h @ params[2 * l] + params[2 * l + 1]
        pre.append(z)
        if l < n_layers - 1:
            h = np.maximum(z, 0.0)
            acts.append(h)
    return softmax_rows(pre[-1]), acts, pre


def _dense_backward(params, acts, pre, delta):
    """Backpropagate output delta; returns parameter grads and the input grad."""
    n_layers = len(params) // 2
    grads = [None] * len(params)
    for l in range(n_layers - 1, -1, -1):
        grads[2 * l] = acts[l].T @ delta
        grads[2 * l + 1] = delta.sum(axis=0, keepdims=True)
        delta = delta @ params[2 * l].T
        if l > 0:
            delta = delta * relu_grad(pre[l - 1])
    return grads, delta


def _output_delta(probs, y, idx):
    delta = np.zeros_like(probs)
    delta[idx] = probs[idx]
    delta[idx, y[idx]] -= 1.0
    return delta / len(idx)


def _check_samples(x, n_in):
    x = as_matrix(x, "samples")
    if x.shape[1] != n_in:
        raise ValidationError(f"samples have {x.shape[1]} columns, model expects {n_in}")
    return x


# --- MLP -------------------------------------------------------------------


def mlp_init(config: MlpConfig, rng=None) -> MlpModel:
    rng = rng if rng is not None else make_rng(config.seed)
    return MlpModel(params=_dense_init(rng, config.layer_dims), config=config)


def mlp_forward(model: MlpModel, samples) -> np.ndarray:
    x = _check_samples(samples, model.config.layer_dims[0])
    return _dense_forward(model.params, x)[0]


def _mlp_loss_and_grads(params, x, y, idx):
    probs, acts, pre = _dense_forward(params, x)
    grads, _ = _dense_backward(params, acts, pre, _output_delta(probs, y, idx))
    return cross_entropy(probs, y, idx), grads, probs


def mlp_backward(model: MlpModel, samples, labels, mask=None) -> list:
    x = _check_samples(samples, model.config.layer_dims[0])
    y = _labels(labels, x.shape[0], model.config.n_classes)
    idx = mask_indices(mask, x.shape[0])
    if len(idx) == 0:
        raise ValidationError("cannot differentiate a loss over an empty mask")
    return _mlp_loss_and_grads(model.params, x, y, idx)[1]


# --- CNN -------------------------------------------------------------------


def cnn_init(config: CnnConfig, rng=None) -> CnnModel:
    rng = rng if rng is not None else make_rng(config.seed)
    # each filter sees kernel_size inputs and feeds one channel
    kernel = glorot_uniform(rng, config.kernel_size, config.channels, 1.0)
    dims = (config.conv_out_len * config.channels,) + config.dense_dims
    params = [kernel, np.zeros((1, config.channels))] + _dense_init(rng, dims)
    return CnnModel(params=params, config=config)


def _cnn_forward(params, x, kernel_size):
    patches = sliding_window_view(x, kernel_size, axis=1)  # (n, out_len, k)
    conv_pre = patches @ params[0] + params[1]  # (n, out_len, ch)
    flat = np.maximum(conv_pre, 0.0).reshape(x.shape[0], -1)
    probs, acts, pre = _dense_forward(params[2:], flat)
    return probs, patches, conv_pre, acts, pre


def cnn_forward(model: CnnModel, samples) -> np.ndarray:
    cfg = model.config
    x = _check_samples(samples, cfg.input_len)
    return _cnn_forward(model.params, x, cfg.kernel_size)[0]


def _cnn_loss_and_grads(params, x, y, idx, kernel_size):
    probs, patches, conv_pre, acts, pre = _cnn_forward(params, x, kernel_size)
    dense_grads, d_flat = _dense_backward(params[2:], acts, pre, _output_delta(probs, y, idx))
    d_conv = d_flat.reshape(conv_pre.shape) * relu_grad(conv_pre)
    d_kernel = np.einsum("nlk,nlc->kc", patches, d_conv)
    d_bias = d_conv.sum(axis=(0, 1)).reshape(1, -1)
    return cross_entropy(probs, y, idx), [d_kernel, d_bias] + dense_grads, probs


def cnn_backward(model: CnnModel, samples, labels, mask=None) -> list:
    cfg = model.config
    x = _check_samples(samples, cfg.input_len)
    y = _labels(labels, x.shape[0], cfg.n_classes)
    idx = mask_indices(mask, x.shape[0])
    if len(idx) == 0:
        raise ValidationError("cannot differentiate a loss over an empty mask")
    return _cnn_loss_and_grads(model.params, x, y, idx, cfg.kernel_size)[1]


# --- training / prediction -------------------------------------------------


def _train(params, loss_and_grads, x, labels, masks, config):
    y = _labels(labels, x.shape[0], config.n_classes)
    train_idx = mask_indices(masks["train"], x.shape[0])
    val = masks.get("val")
    val_idx = mask_indices(val, x.shape[0]) if val is not None else np.arange(0)
    if len(train_idx) == 0:
        raise ValidationError("training mask is empty")
    if np.intersect1d(train_idx, val_idx).size:
        raise ValidationError("train and validation masks overlap")

    def objective(p):
        j, grads, probs = loss_and_grads(p, x, y, train_idx)
        pred = argmax_rows(probs)
        return j, grads, _accuracy(pred, y, train_idx), _accuracy(pred, y, val_idx)

    return fit(
        params,
        objective,
        learning_rate=config.learning_rate,
        max_epochs=config.max_epochs,
        optimizer=config.optimizer,
        has_validation=len(val_idx) > 0,
    )


def mlp_train(samples, labels, masks, config: MlpConfig, model: MlpModel | None = None):
    """Train a fully connected baseline; returns ``(model, trace)``."""
    x = _check_samples(samples, config.layer_dims[0])
    model = model or mlp_init(config)
    params, trace = _train(model.params, _mlp_loss_and_grads, x, labels, masks, config)
    return MlpModel(params=params, config=config), trace


def cnn_train(samples, labels, masks, config: CnnConfig, model: CnnModel | None = None):
    """Train the 1-D convolutional baseline; returns ``(model, trace)``."""
    x = _check_samples(samples, config.input_len)
    model = model or cnn_init(config)

    def loss_and_grads(p, x, y, idx):
        return _cnn_loss_and_grads(p, x, y, idx, config.kernel_size)

    params, trace = _train(model.params, loss_and_grads, x, labels, masks, config)
    return CnnModel(params=params, config=config), trace


def baseline_predict(model, samples):
    """Return ``(labels, probabilities)`` for either baseline model."""
    if isinstance(model, MlpModel):
        probs = mlp_forward(model, samples)
    elif isinstance(model, CnnModel):
        probs = cnn_forward(model, samples)
    else:
        raise ValidationError(f"not a baseline model: {type(model).__name__}")
    return argmax_rows(probs), probs
