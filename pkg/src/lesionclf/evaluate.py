"""Scoring: accuracy, ROC curve, AUC, confusion matrix, cross-task mean AUC.

The positive-class score of an example is the softmax probability of
class 1 (malignant / non-melanocytic). The decision threshold is 0.5 with
exact ties predicted as class 0. AUC is the trapezoidal area under the
threshold-swept ROC curve, computed with integer pair counts and a single
final division so it equals the tie-aware pairwise statistic
P(s+ > s-) + 0.5*P(s+ = s-) exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import mlp
from .errors import (
    DegenerateLabels,
    EmptyInput,
    IdMismatch,
    LabelOutOfDomain,
    LengthMismatch,
    ShapeMismatch,
)

TASK_NAMES = ("malignancy", "cell_origin")


@dataclass(frozen=True)
class RocCurve:
    """(false_positive_rate, true_positive_rate) points from (0,0) to (1,1)."""

    points: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class TaskEval:
    task: str
    accuracy: float
    confusion: ConfusionMatrix
    auc: float | None
    roc: RocCurve | None
    error: str | None = None


@dataclass(frozen=True)
class EvalReport:
    tasks: tuple[TaskEval, TaskEval]
    mean_auc: float | None


def _check_scores_labels(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape[0] != labels.shape[0]:
        raise LengthMismatch(f"{scores.shape[0]} scores vs {labels.shape[0]} labels")
    if scores.shape[0] == 0:
        raise EmptyInput("no examples to score")
    if labels.dtype.kind not in "iub":
        raise LabelOutOfDomain(f"labels must be integers, got dtype {labels.dtype}")
    labels = labels.astype(np.intp)
    if labels.min() < 0 or labels.max() > 1:
        raise LabelOutOfDomain("labels must be 0 or 1")
    return scores, labels


def predict_probs(params: mlp.MlpParams, features, activation: str = "relu") -> np.ndarray:
    """Per-example class probabilities, shape (n, 2).

    Each example goes through the identical single-vector forward pass, so
    scores cannot depend on how examples are batched (BLAS picks different
    kernels for different batch shapes, which would break bitwise equality).
    """
    x = np.asarray(features, dtype=np.float32)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ShapeMismatch(f"expected a feature matrix, got shape {x.shape}")
    return np.stack([mlp.forward(params, row, activation).probs for row in x])


def _predictions(scores: np.ndarray) -> np.ndarray:
    # score exactly 0.5 predicts 0: ties break to the lower class index
    return scores > 0.5


def accuracy(scores, labels) -> float:
    scores, labels = _check_scores_labels(scores, labels)
    return float(np.mean(_predictions(scores) == (labels == 1)))


def confusion_matrix(scores, labels) -> ConfusionMatrix:
    scores, labels = _check_scores_labels(scores, labels)
    predicted = _predictions(scores)
    actual = labels == 1
    return ConfusionMatrix(
        tp=int(np.sum(predicted & actual)),
        fp=int(np.sum(predicted & ~actual)),
        tn=int(np.sum(~predicted & ~actual)),
        fn=int(np.sum(~predicted & actual)),
    )


def roc_auc(scores, labels) -> tuple[RocCurve, float]:
    """ROC curve swept over distinct scores in decreasing order, plus its
    trapezoidal area.

    The area is accumulated as an exact integer numerator over pair counts
    (ties contribute half), divided once at the end.
    """
    scores, labels = _check_scores_labels(scores, labels)
    positives = int(labels.sum())
    negatives = labels.shape[0] - positives
    if positives == 0 or negatives == 0:
        raise DegenerateLabels(
            f"need both classes to sweep a ROC curve, got {positives} positive(s) "
            f"and {negatives} negative(s)"
        )

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]

    points = [(0.0, 0.0)]
    tp = fp = 0
    numerator = 0  # 2 * (# correctly ordered pairs) + (# tied pairs)
    start = 0
    n = scores.shape[0]
    while start < n:
        stop = start
        while stop < n and sorted_scores[stop] == sorted_scores[start]:
            stop += 1
        pos_here = int(sorted_labels[start:stop].sum())
        neg_here = (stop - start) - pos_here
        numerator += neg_here * (2 * tp + pos_here)
        tp += pos_here
        fp += neg_here
        points.append((fp / negatives, tp / positives))
        start = stop

    auc = numerator / (2 * positives * negatives)
    return RocCurve(points=tuple(points)), auc


def _evaluate_task(name: str, scores, labels) -> TaskEval:
    scores, labels = _check_scores_labels(scores, labels)
    acc = accuracy(scores, labels)
    confusion = confusion_matrix(scores, labels)
    try:
        roc, auc = roc_auc(scores, labels)
    except DegenerateLabels as exc:
        return TaskEval(task=name, accuracy=acc, confusion=confusion, auc=None, roc=None, error=str(exc))
    return TaskEval(task=name, accuracy=acc, confusion=confusion, auc=auc, roc=roc)


def evaluation_report(
    task1: tuple,
    task2: tuple,
    task1_ids: list[str] | None = None,
    task2_ids: list[str] | None = None,
    task_names: tuple[str, str] = TASK_NAMES,
) -> EvalReport:
    """Score both tasks; ``task1``/``task2`` are (scores, labels) pairs.

    When id lists are supplied they must match, since the two tasks are
    meant to score the same examples. A degenerate-label task carries its
    error in the report and suppresses mean_auc.
    """
    if task1_ids is not None and task2_ids is not None and list(task1_ids) != list(task2_ids):
        raise IdMismatch("the two tasks scored different example ids")
    first = _evaluate_task(task_names[0], *task1)
    second = _evaluate_task(task_names[1], *task2)
    mean_auc = None
    if first.auc is not None and second.auc is not None:
        mean_auc = (first.auc + second.auc) / 2.0
    return EvalReport(tasks=(first, second), mean_auc=mean_auc)


def report_to_dict(report: EvalReport) -> dict:
    tasks = []
    for t in report.tasks:
        entry = {
            "task": t.task,
            "accuracy": t.accuracy,
            "auc": t.auc,
            "tp": t.confusion.tp,
            "fp": t.confusion.fp,
            "tn": t.confusion.tn,
            "fn": t.confusion.fn,
        }
        if t.error is not None:
            entry["error"] = t.error
        tasks.append(entry)
    return {"tasks": tasks, "mean_auc": report.mean_auc}


def write_report(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report_to_dict(report), fh, indent=2)
        fh.write("\n")


def write_roc_csv(curve: RocCurve, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("fpr,tpr\n")
        for fpr, tpr in curve.points:
            fh.write(f"{fpr!r},{tpr!r}\n")
