"""Classification metrics: confusion counts, macro P/R/F1, log-loss, ROC and PR.

Multi-class curves are one-vs-rest using each class's probability column.
ROC area uses the trapezoid rule; PR area uses the step rule
``sum (R_k - R_{k-1}) * P_k`` (average precision).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .tensor import as_matrix

__all__ = [
    "ClassCurves",
    "EvalReport",
    "confusion_matrix",
    "accuracy",
    "precision_recall_f1_macro",
    "log_loss",
    "roc_curve_auc",
    "pr_curve_auc",
    "evaluate",
]

LOG_FLOOR = 1e-15


@dataclass
class ClassCurves:
    auc_roc: float
    auc_pr: float
    roc_points: list  # (fpr, tpr)
    pr_points: list  # (recall, precision)


@dataclass
class EvalReport:
    accuracy: float
    f1_macro: float
    precision_macro: float
    recall_macro: float
    log_loss: float
    confusion: np.ndarray
    per_class: list
    zero_division_classes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        def r6(v):
            return float(f"{v:.6f}") if np.isfinite(v) else None

        return {
            "accuracy": r6(self.accuracy),
            "f1_macro": r6(self.f1_macro),
            "precision_macro": r6(self.precision_macro),
            "recall_macro": r6(self.recall_macro),
            "log_loss": r6(self.log_loss),
            "confusion": [[int(v) for v in row] for row in self.confusion],
            "per_class": [
                {"class": c, "auc_roc": r6(pc.auc_roc), "auc_pr": r6(pc.auc_pr)}
                for c, pc in enumerate(self.per_class)
            ],
            "zero_division_classes": [int(c) for c in self.zero_division_classes],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _as_labels(a, name) -> np.ndarray:
    arr = np.asarray(a).reshape(-1)
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise ValidationError(f"{name} must be integer class ids")
    return arr.astype(np.int64)


def _pair(pred, true):
    p = _as_labels(pred, "pred")
    t = _as_labels(true, "true")
    if p.shape != t.shape:
        raise ValidationError(f"pred has {p.size} entries, true has {t.size}")
    if p.size == 0:
        raise ValidationError("metrics need at least one sample")
    return p, t


def confusion_matrix(pred, true, n_classes: int) -> np.ndarray:
    """``cm[i, j]`` counts samples of true class ``i`` predicted as ``j``."""
    p, t = _pair(pred, true)
    for name, arr in (("pred", p), ("true", t)):
        bad = np.flatnonzero((arr < 0) | (arr >= n_classes))
        if bad.size:
            raise ValidationError(
                f"{name}[{bad[0]}] = {arr[bad[0]]} outside [0, {n_classes})"
            )
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


def accuracy(pred, true) -> float:
    p, t = _pair(pred, true)
    return float(np.mean(p == t))


def _per_class_prf(cm: np.ndarray):
    tp = np.diag(cm).astype(np.float64)
    pred_pos = cm.sum(axis=0).astype(np.float64)
    true_pos = cm.sum(axis=1).astype(np.float64)
    undefined = (pred_pos == 0) | (true_pos == 0)
    prec = np.divide(tp, pred_pos, out=np.zeros_like(tp), where=pred_pos > 0)
    rec = np.divide(tp, true_pos, out=np.zeros_like(tp), where=true_pos > 0)
    denom = prec + rec
    f1 = np.divide(2 * prec * rec, denom, out=np.zeros_like(tp), where=denom > 0)
    return prec, rec, f1, np.flatnonzero(undefined)


def precision_recall_f1_macro(pred, true, n_classes: int):
    """Unweighted class means of one-vs-rest precision, recall and F1.

    Classes with a zero denominator contribute 0.
    """
    prec, rec, f1, _ = _per_class_prf(confusion_matrix(pred, true, n_classes))
    return float(prec.mean()), float(rec.mean()), float(f1.mean())


def log_loss(probabilities, true) -> float:
    probs = as_matrix(probabilities, "probabilities")
    t = _as_labels(true, "true")
    if t.size != probs.shape[0] or t.size == 0:
        raise ValidationError("need one non-empty label per probability row")
    sums = probs.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-6)
    if bad.size:
        raise ValidationError(f"probability row {bad[0]} sums to {sums[bad[0]]}, not 1")
    if t.min() < 0 or t.max() >= probs.shape[1]:
        raise ValidationError("label outside probability columns")
    p = probs[np.arange(t.size), t]
    return float(-np.mean(np.log(np.maximum(p, LOG_FLOOR))))


def _threshold_counts(scores, positives):
    """Cumulative TP/FP at each distinct score, highest first."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(positives).reshape(-1).astype(bool)
    if s.shape != y.shape:
        raise ValidationError("scores and labels differ in length")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    # last index of each run of equal scores
    ends = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.cumsum(y)[ends]
    fp = np.cumsum(~y)[ends]
    return tp.astype(np.float64), fp.astype(np.float64)


def roc_curve_auc(scores, positives):
    """Return ``(points, auc)`` with points ``[(0, 0), ..., (1, 1)]``.

    One point per distinct score, so tied scores move along a diagonal.
    """
    y = np.asarray(positives).reshape(-1).astype(bool)
    if y.all() or not y.any():
        raise ValidationError("ROC needs at least one positive and one negative sample")
    tp, fp = _threshold_counts(scores, y)
    tpr = np.r_[0.0, tp / y.sum()]
    fpr = np.r_[0.0, fp / (~y).sum()]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return list(zip(fpr.tolist(), tpr.tolist())), auc


def pr_curve_auc(scores, positives):
    """Return ``(points, auc)`` of ``(recall, precision)`` pairs.

    The curve starts at recall 0 carrying the precision of the top threshold.
    """
    y = np.asarray(positives).reshape(-1).astype(bool)
    if not y.any():
        raise ValidationError("PR curve needs at least one positive sample")
    tp, fp = _threshold_counts(scores, y)
    precision = tp / (tp + fp)
    recall = tp / y.sum()
    auc = float(np.sum(np.diff(np.r_[0.0, recall]) * precision))
    points = [(0.0, float(precision[0]))] + list(zip(recall.tolist(), precision.tolist()))
    return points, auc


def evaluate(probabilities, true, n_classes: int | None = None) -> EvalReport:
    """Assemble every metric for a probability matrix and true labels."""
    probs = as_matrix(probabilities, "probabilities")
    c = n_classes if n_classes is not None else probs.shape[1]
    if probs.shape[1] != c:
        raise ValidationError(f"probabilities have {probs.shape[1]} columns, expected {c}")
    t = _as_labels(true, "true")
    pred = np.argmax(probs, axis=1)
    cm = confusion_matrix(pred, t, c)
    prec, rec, f1, undefined = _per_class_prf(cm)
    per_class = []
    for k in range(c):
        positives = t == k
        if positives.all() or not positives.any():
            # single-class slice: curves undefined
            per_class.append(ClassCurves(float("nan"), float("nan"), [], []))
            continue
        roc_pts, roc_auc = roc_curve_auc(probs[:, k], positives)
        pr_pts, pr_auc = pr_curve_auc(probs[:, k], positives)
        per_class.append(ClassCurves(roc_auc, pr_auc, roc_pts, pr_pts))
    return EvalReport(
        accuracy=float(np.trace(cm) / cm.sum()),
        f1_macro=float(f1.mean()),
        precision_macro=float(prec.mean()),
        recall_macro=float(rec.mean()),
        log_loss=log_loss(probs, t),
        confusion=cm,
        per_class=per_class,
        zero_division_classes=undefined.tolist(),
    )
