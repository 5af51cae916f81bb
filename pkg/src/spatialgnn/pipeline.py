"""End-to-end glue: preprocessing, training any of the three models,
evaluation on a split, and the three-model benchmark."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import baselines, geoggnn
from .config import RunConfig
from .datagen import SpatialDataset, generate
from .errors import ValidationError
from .geograph import KernelConfig, WeightedGraph, build_graph
from .metrics import EvalReport, evaluate
from .optim import TrainTrace
from .tensor import apply_standardization, standardize_columns

MODEL_KINDS = ("geoggnn", "nn", "cnn")
MODEL_TITLES = {"geoggnn": "GeogGNN", "nn": "Standard NN", "cnn": "CNN"}


@dataclass
class Preprocessing:
    """Standardization statistics and, for the graph model, the edge kernel."""

    feature_means: np.ndarray
    feature_stds: np.ndarray
    coord_means: np.ndarray
    coord_stds: np.ndarray
    kernel: KernelConfig | None = None


@dataclass
class TrainedModel:
    kind: str
    model: object
    prep: Preprocessing

    @property
    def n_features(self) -> int:
        return self.prep.feature_means.shape[0]

    @property
    def n_classes(self) -> int:
        return self.model.config.n_classes


def fit_preprocessing(ds: SpatialDataset, kernel: KernelConfig | None = None) -> Preprocessing:
    # transductive: statistics over every node, as the graph sees them all
    _, fm, fs = standardize_columns(ds.features)
    _, cm, cs = standardize_columns(ds.coords)
    return Preprocessing(fm, fs, cm, cs, kernel)


def graph_inputs(prep: Preprocessing, ds: SpatialDataset):
    x = apply_standardization(ds.features, prep.feature_means, prep.feature_stds)
    kernel = prep.kernel or KernelConfig()
    graph = build_graph(ds.coords, kernel, features=x)
    return graph, x


def sample_inputs(prep: Preprocessing, ds: SpatialDataset) -> np.ndarray:
    x = apply_standardization(ds.features, prep.feature_means, prep.feature_stds)
    c = apply_standardization(ds.coords, prep.coord_means, prep.coord_stds)
    return baselines.append_coords(x, c)


def _masks(ds):
    return {"train": ds.masks["train"], "val": ds.masks["val"]}


def train_model(kind: str, ds: SpatialDataset, run: RunConfig, *, graph: WeightedGraph | None = None):
    """Train one model on ``ds``; returns ``(TrainedModel, TrainTrace)``."""
    if kind not in MODEL_KINDS:
        raise ValidationError(f"unknown model {kind!r}; choose from {', '.join(MODEL_KINDS)}")
    f, c = ds.features.shape[1], ds.n_classes
    if kind == "geoggnn":
        prep = fit_preprocessing(ds, run.kernel_config())
        g, x = graph_inputs(prep, ds)
        graph = graph if graph is not None else g
        cfg = run.gcn_config(f, c)
        model, trace = geoggnn.train(geoggnn.init_model(cfg), graph, x, ds.labels, _masks(ds))
    else:
        prep = fit_preprocessing(ds)
        xs = sample_inputs(prep, ds)
        if kind == "nn":
            model, trace = baselines.mlp_train(xs, ds.labels, _masks(ds), run.mlp_config(f, c))
        else:
            model, trace = baselines.cnn_train(xs, ds.labels, _masks(ds), run.cnn_config(f, c))
    return TrainedModel(kind, model, prep), trace


def predict_proba(tm: TrainedModel, ds: SpatialDataset) -> np.ndarray:
    if ds.features.shape[1] != tm.n_features:
        raise ValidationError(
            f"dataset has {ds.features.shape[1]} features, model expects {tm.n_features}"
        )
    if tm.kind == "geoggnn":
        graph, x = graph_inputs(tm.prep, ds)
        return geoggnn.predict(tm.model, graph, x)[1]
    return baselines.baseline_predict(tm.model, sample_inputs(tm.prep, ds))[1]


def evaluate_model(tm: TrainedModel, ds: SpatialDataset, split: str = "test") -> EvalReport:
    if ds.n_classes != tm.n_classes:
        raise ValidationError(f"dataset has {ds.n_classes} classes, model predicts {tm.n_classes}")
    probs = predict_proba(tm, ds)
    mask = ds.masks[split]
    if not mask.any():
        raise ValidationError(f"split {split!r} is empty")
    return evaluate(probs[mask], ds.labels[mask], tm.n_classes)


@dataclass
class BenchmarkRow:
    kind: str
    report: EvalReport
    trace: TrainTrace
    seconds: float


def benchmark(run: RunConfig, models=MODEL_KINDS, ds: SpatialDataset | None = None):
    """Train and test every requested model on one generated dataset."""
    ds = ds if ds is not None else generate(run.gen_config())
    rows = []
    for kind in models:
        t0 = time.perf_counter()
        tm, trace = train_model(kind, ds, run)
        report = evaluate_model(tm, ds, "test")
        rows.append(BenchmarkRow(kind, report, trace, time.perf_counter() - t0))
    return ds, rows


def benchmark_document(run: RunConfig, rows) -> dict:
    """Deterministic benchmark summary; wall-clock times are kept out of it."""
    return {
        "config_fingerprint": run.fingerprint(),
        "seed": run.seed,
        "split": "test",
        "models": [
            {"model": r.kind, "title": MODEL_TITLES[r.kind], "best_epoch": r.trace.best_epoch,
             **r.report.to_dict()}
            for r in rows
        ],
    }


def benchmark_table(rows) -> str:
    """Aligned text table: scalar metrics, then per-class AUC-ROC and AUC-PR."""
    c = len(rows[0].report.per_class) if rows else 0
    header = ["Model", "Accuracy", "F1", "Precision", "Recall", "Log-Loss"]
    header += [f"AUC-ROC c{k}" for k in range(c)] + [f"AUC-PR c{k}" for k in range(c)]
    lines = [header]
    for r in rows:
        rep = r.report
        cells = [MODEL_TITLES[r.kind]] + [
            f"{v:.4f}" for v in (rep.accuracy, rep.f1_macro, rep.precision_macro, rep.recall_macro, rep.log_loss)
        ]
        cells += [f"{pc.auc_roc:.4f}" for pc in rep.per_class]
        cells += [f"{pc.auc_pr:.4f}" for pc in rep.per_class]
        lines.append(cells)
    widths = [max(len(row[i]) for row in lines) for i in range(len(header))]
    out = []
    for j, row in enumerate(lines):
        out.append("  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths))).rstrip())
        if j == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out) + "\n"
