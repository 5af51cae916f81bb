"""Versioned JSON documents for trained models."""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .baselines import CnnConfig, CnnModel, MlpConfig, MlpModel
from .errors import ValidationError
from .geograph import KernelConfig
from .geoggnn import GcnConfig, GcnModel
from .pipeline import MODEL_KINDS, Preprocessing, TrainedModel

FORMAT = "spatialgnn-model"
VERSION = 1

_CONFIGS = {"geoggnn": (GcnConfig, GcnModel), "nn": (MlpConfig, MlpModel), "cnn": (CnnConfig, CnnModel)}


def _config_doc(cfg) -> dict:
    d = asdict(cfg)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def model_to_dict(tm: TrainedModel) -> dict:
    params = tm.model.weights if tm.kind == "geoggnn" else tm.model.params
    p = tm.prep
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": tm.kind,
        "config": _config_doc(tm.model.config),
        "preprocessing": {
            "feature_means": p.feature_means.tolist(),
            "feature_stds": p.feature_stds.tolist(),
            "coord_means": p.coord_means.tolist(),
            "coord_stds": p.coord_stds.tolist(),
            "kernel": asdict(p.kernel) if p.kernel is not None else None,
        },
        "weights": [w.tolist() for w in params],
    }


def model_to_json(tm: TrainedModel) -> str:
    return json.dumps(model_to_dict(tm), indent=1) + "\n"


def model_from_dict(doc: dict) -> TrainedModel:
    """Rebuild a model; shapes are checked against the stored config."""
    if doc.get("format") != FORMAT:
        raise ValidationError(f"not a {FORMAT} document")
    if doc.get("version") != VERSION:
        raise ValidationError(f"unsupported model version {doc.get('version')!r}")
    kind = doc.get("kind")
    if kind not in MODEL_KINDS:
        raise ValidationError(f"unknown model kind {kind!r}")
    cfg_cls, model_cls = _CONFIGS[kind]
    try:
        cfg = cfg_cls(**doc["config"])
        weights = [np.asarray(w, dtype=np.float64) for w in doc["weights"]]
        pp = doc["preprocessing"]
        kernel = KernelConfig(**pp["kernel"]) if pp.get("kernel") else None
        prep = Preprocessing(
            np.asarray(pp["feature_means"], dtype=np.float64),
            np.asarray(pp["feature_stds"], dtype=np.float64),
            np.asarray(pp["coord_means"], dtype=np.float64),
            np.asarray(pp["coord_stds"], dtype=np.float64),
            kernel,
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed model document: {exc}") from None
    if any(w.ndim != 2 for w in weights):
        raise ValidationError("every weight entry must be a 2-D array")
    if kind == "geoggnn":
        model = GcnModel(weights=weights, config=cfg)
        n_in = cfg.layer_dims[0]
    else:
        model = model_cls(params=weights, config=cfg)
        n_in = cfg.layer_dims[0] - 2 if kind == "nn" else cfg.input_len - 2
    if prep.feature_means.shape != (n_in,) or prep.feature_stds.shape != (n_in,):
        raise ValidationError("feature standardization does not match the model input width")
    return TrainedModel(kind, model, prep)


def model_from_json(text: str) -> TrainedModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid model JSON: {exc}") from None
    return model_from_dict(doc)
