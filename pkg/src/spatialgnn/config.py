"""Flat JSON run configuration shared by every CLI command."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .baselines import CnnConfig, MlpConfig
from .datagen import DEFAULT_CENTERS, GenConfig
from .errors import ValidationError
from .geograph import KernelConfig
from .geoggnn import GcnConfig
from .smoothlab import Grid


class ConfigError(ValidationError):
    """The run configuration is malformed or inconsistent."""


@dataclass(frozen=True)
class RunConfig:
    seed: int = 42
    out: str = "out"
    # dataset
    n: int = 400
    f: int = 6
    c: int = 4
    centers: tuple = tuple((lat, lon) for _, lat, lon in DEFAULT_CENTERS)
    center_weights: tuple = (1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    cluster_std: float = 0.8
    label_field_bandwidth: float = 1.2
    feature_noise_std: float = 1.0
    split_train: float = 0.6
    split_val: float = 0.2
    split_test: float = 0.2
    bumps_per_class: int = 6
    majority_k: int = 5
    signal_strength: float = 1.0
    neighbor_mix: float = 0.3
    # graph
    kernel_mode: str = "threshold"
    kernel_lambda: float = 0.5
    kernel_phi: float = 0.25
    kernel_feature_distance: bool = False
    # training, shared by all three models
    learning_rate: float = 0.01
    max_epochs: int = 2000
    optimizer: str = "gd"
    gcn_hidden: tuple = (16,)
    weight_init_scale: float = 1.0
    mlp_hidden: tuple = (32, 32)
    cnn_kernel_size: int = 3
    cnn_channels: int = 8
    cnn_dense_hidden: tuple = (32,)
    # smoothing lab
    smooth_trials: int = 100
    smooth_grid: int = 64
    smooth_noise_std: float = 0.3
    smooth_bandwidth_cells: tuple = (1.0, 2.0, 3.0, 4.0)
    smooth_classes: int = 4
    smooth_bumps: int = 3
    smooth_redraws: int = 50

    def __post_init__(self):
        for name in ("centers", "center_weights", "gcn_hidden", "mlp_hidden",
                     "cnn_dense_hidden", "smooth_bandwidth_cells"):
            value = getattr(self, name)
            if name == "centers":
                value = tuple(tuple(c) for c in value)
            object.__setattr__(self, name, tuple(value))
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        try:
            self.gen_config()
            self.kernel_config()
            self.gcn_config()
            self.mlp_config()
            self.cnn_config()
            Grid(self.smooth_grid)
        except ValidationError as exc:
            raise ConfigError(str(exc)) from None
        if self.smooth_trials < 1 or self.smooth_redraws < 2 or self.smooth_classes < 2:
            raise ConfigError("smooth_trials >= 1, smooth_redraws >= 2 and smooth_classes >= 2 required")
        if not self.smooth_bandwidth_cells or any(b <= 0 for b in self.smooth_bandwidth_cells):
            raise ConfigError("smooth_bandwidth_cells must be positive")
        if self.smooth_noise_std < 0:
            raise ConfigError("smooth_noise_std must be non-negative")

    @classmethod
    def from_dict(cls, doc: dict, **overrides) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        merged = dict(doc)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**merged)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path=None, **overrides) -> "RunConfig":
        doc = {}
        if path is not None:
            try:
                doc = json.loads(Path(path).read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(doc, **overrides)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = [list(x) if isinstance(x, tuple) else x for x in v]
        return d

    def fingerprint(self) -> str:
        """SHA-256 of the canonical config, ignoring the output directory."""
        d = self.to_dict()
        d.pop("out")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    # --- component configs ---

    def gen_config(self) -> GenConfig:
        return GenConfig(
            seed=self.seed, n=self.n, f=self.f, c=self.c,
            centers=self.centers, center_weights=self.center_weights,
            cluster_std=self.cluster_std, label_field_bandwidth=self.label_field_bandwidth,
            feature_noise_std=self.feature_noise_std,
            split_fractions=(self.split_train, self.split_val, self.split_test),
            bumps_per_class=self.bumps_per_class, majority_k=self.majority_k,
            signal_strength=self.signal_strength, neighbor_mix=self.neighbor_mix,
        )

    def kernel_config(self) -> KernelConfig:
        return KernelConfig(mode=self.kernel_mode, lam=self.kernel_lambda, phi=self.kernel_phi,
                            feature_distance=self.kernel_feature_distance)

    def gcn_config(self, n_features: int | None = None, n_classes: int | None = None) -> GcnConfig:
        dims = (n_features or self.f,) + tuple(self.gcn_hidden) + (n_classes or self.c,)
        return GcnConfig(layer_dims=dims, learning_rate=self.learning_rate, max_epochs=self.max_epochs,
                         seed=self.seed, weight_init_scale=self.weight_init_scale, optimizer=self.optimizer)

    def mlp_config(self, n_features: int | None = None, n_classes: int | None = None) -> MlpConfig:
        dims = ((n_features or self.f) + 2,) + tuple(self.mlp_hidden) + (n_classes or self.c,)
        return MlpConfig(layer_dims=dims, learning_rate=self.learning_rate, max_epochs=self.max_epochs,
                         seed=self.seed, optimizer=self.optimizer)

    def cnn_config(self, n_features: int | None = None, n_classes: int | None = None) -> CnnConfig:
        return CnnConfig(
            input_len=(n_features or self.f) + 2, kernel_size=self.cnn_kernel_size,
            channels=self.cnn_channels, dense_dims=tuple(self.cnn_dense_hidden) + (n_classes or self.c,),
            learning_rate=self.learning_rate, max_epochs=self.max_epochs, seed=self.seed,
            optimizer=self.optimizer,
        )

    def smooth_grid_config(self) -> Grid:
        return Grid(self.smooth_grid)

    def smooth_bandwidths(self) -> list:
        spacing = self.smooth_grid_config().spacing
        return [b * spacing for b in self.smooth_bandwidth_cells]
