"""Dense float64 matrix helpers and the seeded random generator.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64 (C order).
Random streams come from numpy's PCG64 bit generator, which is specified and
platform independent for a given seed.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

__all__ = [
    "as_matrix",
    "make_rng",
    "matmul",
    "relu",
    "relu_grad",
    "softmax_rows",
    "standardize_columns",
    "apply_standardization",
]


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a C-contiguous 2-D float64 array."""
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {m.shape}")
    return m


def make_rng(seed: int) -> np.random.Generator:
    """Return a PCG64-backed generator. Equal seeds give equal streams."""
    if seed < 0 or seed >= 2**64:
        raise ValidationError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.PCG64(int(seed)))


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValidationError(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}: "
            f"inner dimensions {a.shape[1]} != {b.shape[0]}"
        )
    return a @ b


def relu(a) -> np.ndarray:
    return np.maximum(as_matrix(a), 0.0)


def relu_grad(pre: np.ndarray) -> np.ndarray:
    """Derivative of ReLU at ``pre``; zero at the kink."""
    return (pre > 0.0).astype(np.float64)


def softmax_rows(a) -> np.ndarray:
    """Row-wise softmax with max subtraction so large logits cannot overflow."""
    a = as_matrix(a)
    shifted = a - a.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def standardize_columns(a):
    """Z-score each column with the population standard deviation.

    Returns ``(z, means, stds)``. Constant columns map to zeros; their
    recorded std is 0 and :func:`apply_standardization` keeps them at zero.
    """
    a = as_matrix(a)
    if a.shape[0] < 2:
        raise ValidationError(f"standardization needs at least 2 rows, got {a.shape[0]}")
    means = a.mean(axis=0)
    stds = a.std(axis=0)
    return apply_standardization(a, means, stds), means, stds


def apply_standardization(a, means, stds) -> np.ndarray:
    a = as_matrix(a)
    means = np.asarray(means, dtype=np.float64)
    stds = np.asarray(stds, dtype=np.float64)
    if means.shape != (a.shape[1],) or stds.shape != (a.shape[1],):
        raise ValidationError("standardization parameters do not match column count")
    centered = a - means
    safe = np.where(stds > 0.0, stds, 1.0)
    return np.where(stds > 0.0, centered / safe, 0.0)
