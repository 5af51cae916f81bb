"""Seeded synthetic geo-tagged incident data around Gulf-region cities.

Labels come from smooth latent class fields over space, balanced by a
quota assignment and then relabelled by neighbourhood majority. Features mix
each point's class signal with its neighbours' signal under heavy noise, so
single points are ambiguous while spatially aggregated features are not.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from .errors import ValidationError
from .tensor import make_rng

__all__ = [
    "GENERATOR_VERSION",
    "DEFAULT_CENTERS",
    "CLASS_NAMES",
    "GenConfig",
    "SpatialDataset",
    "generate",
    "save",
    "load",
    "to_csv",
    "relational_gap_probe",
    "neighbor_label_agreement",
]

GENERATOR_VERSION = "1"

# approximate city centres, (lat, lon) in decimal degrees
DEFAULT_CENTERS = (
    ("Riyadh", 24.71, 46.68),
    ("Dubai", 25.20, 55.27),
    ("Doha", 25.29, 51.53),
    ("Kuwait City", 29.38, 47.98),
    ("Muscat", 23.59, 58.41),
    ("Manama", 26.23, 50.59),
)
CLASS_NAMES = ("phishing", "ransomware", "fraud", "botnet")
LAT_RANGE = (15.0, 33.0)
LON_RANGE = (34.0, 61.0)
SPLITS = ("train", "val", "test")
MAX_ATTEMPTS = 10


@dataclass(frozen=True)
class GenConfig:
    seed: int = 42
    n: int = 400
    f: int = 6
    c: int = 4
    centers: tuple = tuple((lat, lon) for _, lat, lon in DEFAULT_CENTERS)
    center_weights: tuple = (1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    cluster_std: float = 0.8
    label_field_bandwidth: float = 1.2
    feature_noise_std: float = 1.0
    split_fractions: tuple = (0.6, 0.2, 0.2)
    bumps_per_class: int = 6
    majority_k: int = 5
    signal_strength: float = 1.0
    neighbor_mix: float = 0.3

    def __post_init__(self):
        object.__setattr__(self, "centers", tuple(tuple(map(float, c)) for c in self.centers))
        object.__setattr__(self, "center_weights", tuple(map(float, self.center_weights)))
        object.__setattr__(self, "split_fractions", tuple(map(float, self.split_fractions)))
        if self.n < 1 or self.f < 1:
            raise ValidationError("n and f must be positive")
        if self.c < 2:
            raise ValidationError(f"need at least 2 classes, got {self.c}")
        if self.n < self.c:
            raise ValidationError(f"n={self.n} cannot hold one sample of each of {self.c} classes")
        if len(self.centers) == 0 or len(self.centers) != len(self.center_weights):
            raise ValidationError("centers and center_weights must be non-empty and equally long")
        if any(w < 0 for w in self.center_weights) or sum(self.center_weights) <= 0:
            raise ValidationError("center_weights must be non-negative with a positive sum")
        fr = self.split_fractions
        if len(fr) != 3 or any(x <= 0 for x in fr) or abs(sum(fr) - 1.0) > 1e-9:
            raise ValidationError(f"split fractions must be three positive numbers summing to 1, got {fr}")
        if self.cluster_std <= 0 or self.label_field_bandwidth <= 0:
            raise ValidationError("cluster_std and label_field_bandwidth must be positive")
        if self.feature_noise_std < 0:
            raise ValidationError("feature_noise_std must be non-negative")
        if self.bumps_per_class < 1 or self.majority_k < 1:
            raise ValidationError("bumps_per_class and majority_k must be positive")
        if not 0.0 <= self.neighbor_mix <= 1.0:
            raise ValidationError("neighbor_mix must lie in [0, 1]")


@dataclass
class SpatialDataset:
    features: np.ndarray  # (n, f)
    coords: np.ndarray  # (n, 2) as (lat, lon)
    labels: np.ndarray  # (n,)
    masks: dict  # split name -> boolean (n,)
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def n_classes(self) -> int:
        return int(self.meta.get("c", int(self.labels.max()) + 1))

    def validate(self) -> None:
        n = self.labels.shape[0]
        if self.features.shape[0] != n or self.coords.shape != (n, 2):
            raise ValidationError("features, coords and labels disagree on sample count")
        c = self.n_classes
        if n and (self.labels.min() < 0 or self.labels.max() >= c):
            raise ValidationError(f"labels outside [0, {c})")
        cover = np.zeros(n, dtype=np.int64)
        for name in SPLITS:
            cover += self.masks[name].astype(np.int64)
        if np.any(cover != 1):
            raise ValidationError("split masks do not partition the samples")
        _check_balance(self.labels, c)


def _check_balance(labels, c) -> None:
    counts = np.bincount(labels, minlength=c)
    target = labels.shape[0] / c
    lo, hi = np.floor(0.9 * target), np.ceil(1.1 * target)
    if np.any(counts < lo) or np.any(counts > hi):
        raise ValidationError(
            f"class counts {counts.tolist()} are not within 10% of {target:g}"
        )


def _balanced(labels, c) -> bool:
    try:
        _check_balance(labels, c)
    except ValidationError:
        return False
    return True


def _sample_coords(cfg: GenConfig, rng) -> np.ndarray:
    w = np.asarray(cfg.center_weights)
    which = rng.choice(len(cfg.centers), size=cfg.n, p=w / w.sum())
    centers = np.asarray(cfg.centers)
    pts = centers[which] + rng.normal(0.0, cfg.cluster_std, size=(cfg.n, 2))
    pts[:, 0] = np.clip(pts[:, 0], *LAT_RANGE)
    pts[:, 1] = np.clip(pts[:, 1], *LON_RANGE)
    return pts


def _class_fields(cfg: GenConfig, coords, rng) -> np.ndarray:
    """Score of every class at every point: a sum of Gaussian bumps."""
    n = coords.shape[0]
    scores = np.zeros((n, cfg.c))
    for k in range(cfg.c):
        anchors = coords[rng.integers(0, n, size=cfg.bumps_per_class)]
        amps = rng.uniform(0.5, 1.5, size=cfg.bumps_per_class)
        d2 = ((coords[:, None, :] - anchors[None, :, :]) ** 2).sum(axis=2)
        scores[:, k] = (amps * np.exp(-d2 / (2.0 * cfg.label_field_bandwidth**2))).sum(axis=1)
    return scores


def _quota_assign(scores) -> np.ndarray:
    """Maximise total score subject to near-equal class sizes."""
    n, c = scores.shape
    slots = np.repeat(np.arange(c), -(-n // c))
    rows, cols = linear_sum_assignment(-scores[:, slots])
    labels = np.empty(n, dtype=np.int64)
    labels[rows] = slots[cols]
    return labels


def _knn(coords, k):
    """Indices of each point's ``k`` nearest other points (self excluded)."""
    n = coords.shape[0]
    k = min(k, n - 1)
    if k < 1:
        return np.zeros((n, 0), dtype=np.int64)
    _, idx = cKDTree(coords).query(coords, k=k + 1)
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        row = idx[i][idx[i] != i][:k]
        out[i] = row
    return out


def _majority_relabel(provisional, neighbors, c) -> np.ndarray:
    labels = provisional.copy()
    if neighbors.shape[1] == 0:
        return labels
    need = neighbors.shape[1] / 2.0
    for i in range(provisional.shape[0]):
        counts = np.bincount(provisional[neighbors[i]], minlength=c)
        top = int(np.argmax(counts))
        # only a strict majority of the neighbours overrides a point's own label
        if counts[top] > need:
            labels[i] = top
    return labels


def _class_means(cfg: GenConfig, rng) -> np.ndarray:
    g = rng.normal(size=(cfg.c, cfg.f))
    if cfg.f >= cfg.c:
        q, _ = np.linalg.qr(g.T)  # orthonormal class directions
        means = q.T
    else:
        means = g / np.linalg.norm(g, axis=1, keepdims=True)
    return cfg.signal_strength * means


def _stratified_masks(labels, c, fractions, rng) -> dict:
    n = labels.shape[0]
    masks = {name: np.zeros(n, dtype=bool) for name in SPLITS}
    for k in range(c):
        idx = np.flatnonzero(labels == k)
        idx = idx[rng.permutation(idx.size)]
        n_tr = int(round(fractions[0] * idx.size))
        n_va = min(int(round(fractions[1] * idx.size)), idx.size - n_tr)
        masks["train"][idx[:n_tr]] = True
        masks["val"][idx[n_tr : n_tr + n_va]] = True
        masks["test"][idx[n_tr + n_va :]] = True
    return masks


def generate(config: GenConfig | None = None, rng=None) -> SpatialDataset:
    """Draw a dataset; deterministic for a given config and seed."""
    cfg = config or GenConfig()
    rng = rng if rng is not None else make_rng(cfg.seed)
    for _ in range(MAX_ATTEMPTS):
        coords = _sample_coords(cfg, rng)
        provisional = _quota_assign(_class_fields(cfg, coords, rng))
        neighbors = _knn(coords, cfg.majority_k)
        labels = _majority_relabel(provisional, neighbors, cfg.c)
        if _balanced(labels, cfg.c):
            break
    else:
        raise ValidationError(
            f"could not reach class balance in {MAX_ATTEMPTS} attempts; "
            "try a larger n or a wider label_field_bandwidth"
        )

    means = _class_means(cfg, rng)
    own = means[labels]
    if neighbors.shape[1]:
        around = means[labels[neighbors]].mean(axis=1)
    else:
        around = own
    signal = (1.0 - cfg.neighbor_mix) * own + cfg.neighbor_mix * around
    features = signal + rng.normal(0.0, cfg.feature_noise_std, size=signal.shape)
    masks = _stratified_masks(labels, cfg.c, cfg.split_fractions, rng)

    names = list(CLASS_NAMES[: cfg.c]) + [f"class{k}" for k in range(len(CLASS_NAMES), cfg.c)]
    meta = {
        "seed": cfg.seed,
        "generator_version": GENERATOR_VERSION,
        "c": cfg.c,
        "class_names": names,
        "config": _config_dict(cfg),
    }
    ds = SpatialDataset(features=features, coords=coords, labels=labels, masks=masks, meta=meta)
    ds.validate()
    return ds


def _config_dict(cfg: GenConfig) -> dict:
    d = asdict(cfg)
    d["centers"] = [list(c) for c in cfg.centers]
    d["center_weights"] = list(cfg.center_weights)
    d["split_fractions"] = list(cfg.split_fractions)
    return d


# --- CSV -------------------------------------------------------------------


def _split_names(ds: SpatialDataset) -> list:
    out = []
    for i in range(ds.n):
        out.append(next(name for name in SPLITS if ds.masks[name][i]))
    return out


def to_csv(ds: SpatialDataset) -> str:
    f = ds.features.shape[1]
    header = ["id", "lat", "lon"] + [f"f{j}" for j in range(f)] + ["label", "split"]
    lines = [",".join(header)]
    splits = _split_names(ds)
    for i in range(ds.n):
        vals = [str(i), f"{ds.coords[i, 0]:.17g}", f"{ds.coords[i, 1]:.17g}"]
        vals += [f"{v:.17g}" for v in ds.features[i]]
        vals += [str(int(ds.labels[i])), splits[i]]
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def save(ds: SpatialDataset, path) -> None:
    Path(path).write_text(to_csv(ds), encoding="utf-8", newline="")


def save_meta(ds: SpatialDataset, path) -> None:
    Path(path).write_text(json.dumps(ds.meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load(path, n_classes: int = 4) -> SpatialDataset:
    """Read a dataset CSV, validating every row and the dataset invariants."""
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError(f"{path}: empty file") from None
    feat_cols = [h for h in header if h.startswith("f") and h[1:].isdigit()]
    expected = ["id", "lat", "lon"] + [f"f{j}" for j in range(len(feat_cols))] + ["label", "split"]
    if header != expected:
        raise ValidationError(f"{path}: header {header} does not match {expected}")
    feats, coords, labels, splits = [], [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValidationError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
        try:
            if int(row[0]) != len(labels):
                raise ValidationError(f"{path}: row {lineno} has id {row[0]}, expected {len(labels)}")
            lat, lon = float(row[1]), float(row[2])
            fv = [float(v) for v in row[3:-2]]
            label = int(row[-2])
        except ValueError as exc:
            raise ValidationError(f"{path}: row {lineno}: {exc}") from None
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            raise ValidationError(f"{path}: row {lineno} has invalid coordinates ({lat}, {lon})")
        if not all(np.isfinite(fv)):
            raise ValidationError(f"{path}: row {lineno} has non-finite features")
        if not 0 <= label < n_classes:
            raise ValidationError(f"{path}: row {lineno} has label {label} outside [0, {n_classes})")
        if row[-1] not in SPLITS:
            raise ValidationError(f"{path}: row {lineno} has unknown split {row[-1]!r}")
        feats.append(fv)
        coords.append((lat, lon))
        labels.append(label)
        splits.append(row[-1])
    if not labels:
        raise ValidationError(f"{path}: no data rows")
    split_arr = np.array(splits)
    ds = SpatialDataset(
        features=np.array(feats, dtype=np.float64).reshape(len(labels), len(feat_cols)),
        coords=np.array(coords, dtype=np.float64),
        labels=np.array(labels, dtype=np.int64),
        masks={name: split_arr == name for name in SPLITS},
        meta={"c": n_classes},
    )
    ds.validate()
    return ds


# --- quality probes --------------------------------------------------------


def neighbor_label_agreement(ds: SpatialDataset, k: int = 5) -> float:
    """Mean fraction of each point's ``k`` nearest neighbours sharing its label."""
    nbrs = _knn(ds.coords, k)
    return float(np.mean(ds.labels[nbrs] == ds.labels[:, None]))


def _knn_classify(train_x, train_y, test_x, k, c):
    k = min(k, train_x.shape[0])
    _, idx = cKDTree(train_x).query(test_x, k=k)
    idx = np.asarray(idx).reshape(test_x.shape[0], k)
    votes = train_y[idx]
    pred = np.empty(test_x.shape[0], dtype=np.int64)
    for i in range(test_x.shape[0]):
        counts = np.bincount(votes[i], minlength=c)
        pred[i] = np.flatnonzero(counts == counts.max())[0]
    return pred


def relational_gap_probe(ds: SpatialDataset, k: int = 5) -> float:
    """How much spatial feature averaging helps a k-NN classifier.

    Returns test accuracy on features averaged over each point and its ``k``
    nearest spatial neighbours minus test accuracy on raw features.
    """
    if k < 1:
        raise ValidationError("k must be at least 1")
    c = ds.n_classes
    nbrs = _knn(ds.coords, k)
    stacked = np.concatenate([ds.features[:, None, :], ds.features[nbrs]], axis=1)
    averaged = stacked.mean(axis=1)
    tr, te = ds.masks["train"], ds.masks["test"]
    if not tr.any() or not te.any():
        raise ValidationError("probe needs non-empty train and test masks")

    def acc(x):
        pred = _knn_classify(x[tr], ds.labels[tr], x[te], k, c)
        return float(np.mean(pred == ds.labels[te]))

    return acc(averaged) - acc(ds.features)
