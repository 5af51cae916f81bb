"""Full-batch training loop shared by the graph model and the baselines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalError, ValidationError

OPTIMIZERS = ("gd", "adam")


@dataclass
class TrainTrace:
    """Per-epoch history. Entry ``k`` describes the weights before update ``k``."""

    loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    best_epoch: int = -1

    def __len__(self) -> int:
        return len(self.loss)

    def to_csv(self) -> str:
        lines = ["epoch,loss,train_acc,val_acc"]
        for k, (l, tr, va) in enumerate(zip(self.loss, self.train_acc, self.val_acc)):
            lines.append(f"{k},{l:.17g},{tr:.17g},{va:.17g}")
        return "\n".join(lines) + "\n"


# objective(params) -> (loss, grads, train_acc, val_acc)
Objective = Callable[[Sequence[np.ndarray]], tuple]


def fit(
    params: Sequence[np.ndarray],
    objective: Objective,
    *,
    learning_rate: float,
    max_epochs: int,
    optimizer: str = "gd",
    has_validation: bool = True,
):
    """Run ``max_epochs`` full-batch updates and keep the best-validation weights.

    Ties in validation accuracy go to the later epoch. Without a validation
    set the final weights are returned.
    """
    if optimizer not in OPTIMIZERS:
        raise ValidationError(f"unknown optimizer {optimizer!r}; choose from {OPTIMIZERS}")
    if learning_rate < 0:
        raise ValidationError("learning rate must be non-negative")
    params = [p.copy() for p in params]
    trace = TrainTrace()
    best = [p.copy() for p in params]
    best_val = -np.inf
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2, eps = 0.9, 0.999, 1e-8

    for epoch in range(max_epochs):
        # overflow is reported below as a NumericalError, not as warnings
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grads, train_acc, val_acc = objective(params)
        if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
            raise NumericalError(
                f"non-finite loss or gradient at epoch {epoch} (loss={loss}); "
                "try a smaller learning rate"
            )
        trace.loss.append(float(loss))
        trace.train_acc.append(float(train_acc))
        trace.val_acc.append(float(val_acc))
        if has_validation and val_acc >= best_val:
            best_val = val_acc
            best = [p.copy() for p in params]
            trace.best_epoch = epoch

        if optimizer == "gd":
            for p, g in zip(params, grads):
                p -= learning_rate * g
        else:
            t = epoch + 1
            for p, g, mi, vi in zip(params, grads, m, v):
                mi *= b1
                mi += (1 - b1) * g
                vi *= b2
                vi += (1 - b2) * g * g
                mhat = mi / (1 - b1**t)
                vhat = vi / (1 - b2**t)
                p -= learning_rate * mhat / (np.sqrt(vhat) + eps)

    if not has_validation or max_epochs == 0:
        trace.best_epoch = max_epochs  # weights after the final update
        return params, trace
    return best, trace
