"""Geographic graph construction.

Distances are planar Euclidean on raw decimal degrees. Two adjacency
builders exist: a hard threshold (edge iff ``d < lambda``) and a dense
Gaussian kernel ``exp(-d^2 / (2 phi^2))``. Both feed the same self-loop and
symmetric normalization path used by the graph convolution.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .tensor import as_matrix

__all__ = [
    "GeoPoint",
    "KernelConfig",
    "WeightedGraph",
    "IsolatedGraphWarning",
    "coords_array",
    "euclid_distance",
    "pairwise_distances",
    "build_threshold_adjacency",
    "build_gaussian_adjacency",
    "add_self_loops",
    "sym_normalize",
    "build_graph",
]


class IsolatedGraphWarning(UserWarning):
    """The threshold produced a graph with no edges at all."""


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise ValidationError(f"latitude {self.lat} outside [-90, 90]")
        if not (-180.0 <= self.lon <= 180.0):
            raise ValidationError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class KernelConfig:
    """How edges are weighted.

    ``mode`` is ``"threshold"`` (binary, uses ``lam``) or ``"gaussian"``
    (dense, uses ``phi``). With ``feature_distance`` set, distances are taken
    between node feature vectors instead of coordinates.
    """

    mode: str = "threshold"
    lam: float = 0.5
    phi: float = 0.25
    feature_distance: bool = False
    floor: float = 1e-12

    def __post_init__(self):
        if self.mode not in ("threshold", "gaussian"):
            raise ValidationError(f"unknown kernel mode {self.mode!r}")
        if self.mode == "threshold" and not self.lam > 0:
            raise ValidationError(f"threshold distance must be positive, got {self.lam}")
        if self.mode == "gaussian" and not self.phi > 0:
            raise ValidationError(f"bandwidth must be positive, got {self.phi}")


@dataclass(frozen=True)
class WeightedGraph:
    n: int
    adj: np.ndarray
    adj_self: np.ndarray
    norm: np.ndarray
    degrees: np.ndarray


def coords_array(points) -> np.ndarray:
    """Return an ``(n, 2)`` array of ``(lat, lon)`` from GeoPoints or an array."""
    if isinstance(points, np.ndarray):
        arr = np.asarray(points, dtype=np.float64)
    else:
        points = list(points)
        if points and isinstance(points[0], GeoPoint):
            arr = np.array([[p.lat, p.lon] for p in points], dtype=np.float64)
        else:
            arr = np.asarray(points, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValidationError(f"coordinates must have shape (n, 2), got {arr.shape}")
    return arr


def euclid_distance(p: GeoPoint, q: GeoPoint) -> float:
    return float(np.hypot(p.lat - q.lat, p.lon - q.lon))


def pairwise_distances(coords) -> np.ndarray:
    """Dense Euclidean distance matrix between rows of ``coords``."""
    x = as_matrix(coords)
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _check_points(coords: np.ndarray) -> None:
    if coords.shape[0] < 2:
        raise ValidationError(f"need at least 2 points, got {coords.shape[0]}")


def build_threshold_adjacency(points, lam: float, *, distances: np.ndarray | None = None) -> np.ndarray:
    """Binary adjacency: ``A[i, j] = 1`` iff ``i != j`` and ``d_ij < lam``.

    Emits :class:`IsolatedGraphWarning` when no pair is close enough.
    """
    if not lam > 0:
        raise ValidationError(f"threshold distance must be positive, got {lam}")
    if distances is None:
        coords = coords_array(points)
        _check_points(coords)
        distances = pairwise_distances(coords)
    adj = (distances < lam).astype(np.float64)
    np.fill_diagonal(adj, 0.0)
    if not adj.any():
        warnings.warn(
            f"threshold {lam} leaves every node isolated; propagation reduces to self-loops",
            IsolatedGraphWarning,
            stacklevel=2,
        )
    return adj


def build_gaussian_adjacency(
    points, phi: float, *, floor: float = 1e-12, distances: np.ndarray | None = None
) -> np.ndarray:
    """Gaussian kernel weights with a zero diagonal.

    Weights under ``floor`` are set to 0.
    """
    if not phi > 0:
        raise ValidationError(f"bandwidth must be positive, got {phi}")
    if distances is None:
        coords = coords_array(points)
        _check_points(coords)
        distances = pairwise_distances(coords)
    adj = np.exp(-(distances**2) / (2.0 * phi * phi))
    adj[adj < floor] = 0.0
    np.fill_diagonal(adj, 0.0)
    return adj


def add_self_loops(adj) -> np.ndarray:
    adj = as_matrix(adj, "adjacency")
    if adj.shape[0] != adj.shape[1]:
        raise ValidationError(f"adjacency must be square, got {adj.shape}")
    if np.any(np.diag(adj) != 0.0):
        raise ValidationError("adjacency already has self-loops (nonzero diagonal)")
    return adj + np.eye(adj.shape[0])


def sym_normalize(adj_self):
    """Return ``(D^-1/2 A D^-1/2, degrees)`` where ``degrees`` are row sums."""
    a = as_matrix(adj_self, "adjacency")
    if a.shape[0] != a.shape[1]:
        raise ValidationError(f"adjacency must be square, got {a.shape}")
    if np.any(a < 0):
        raise ValidationError("adjacency has negative entries")
    if not np.array_equal(a, a.T):
        raise ValidationError("adjacency is not symmetric")
    degrees = a.sum(axis=1)
    if np.any(degrees <= 0):
        bad = int(np.flatnonzero(degrees <= 0)[0])
        raise ValidationError(f"node {bad} has zero degree; add self-loops before normalizing")
    inv_sqrt = 1.0 / np.sqrt(degrees)
    norm = a * inv_sqrt[:, None] * inv_sqrt[None, :]
    # elementwise products are order-dependent only at the last ulp
    norm = 0.5 * (norm + norm.T)
    return norm, degrees


def build_graph(points, config: KernelConfig, features=None) -> WeightedGraph:
    """Adjacency per ``config``, then self-loops and symmetric normalization."""
    if config.feature_distance:
        if features is None:
            raise ValidationError("feature_distance requires node features")
        basis = as_matrix(features, "features")
    else:
        basis = coords_array(points)
    n = basis.shape[0]
    if n == 0:
        raise ValidationError("cannot build a graph with no nodes")
    if n == 1:
        adj = np.zeros((1, 1))
    else:
        d = pairwise_distances(basis)
        if config.mode == "threshold":
            adj = build_threshold_adjacency(None, config.lam, distances=d)
        else:
            adj = build_gaussian_adjacency(None, config.phi, floor=config.floor, distances=d)
    adj_self = add_self_loops(adj)
    norm, degrees = sym_normalize(adj_self)
    return WeightedGraph(n=n, adj=adj, adj_self=adj_self, norm=norm, degrees=degrees)
