"""Classification metrics derived exactly from confusion counts."""

from __future__ import annotations

import numpy as np


def binary_counts(y_true, y_pred, positive) -> dict:
    """Confusion counts with the given label treated as positive."""
    tp = fp = fn = tn = 0
    for t, p in zip(y_true, y_pred):
        if p == positive:
            if t == positive:
                tp += 1
            else:
                fp += 1
        else:
            if t == positive:
                fn += 1
            else:
                tn += 1
    return {"tp": tp, "fp": fp, "fn": fn, "tn": tn}


def precision_recall_f1(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """P, R, F1 from counts; all 0 when undefined (empty denominators)."""
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (2.0 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    return precision, recall, f1


def accuracy(counts: dict) -> float:
    total = counts["tp"] + counts["fp"] + counts["fn"] + counts["tn"]
    return (counts["tp"] + counts["tn"]) / total if total else 0.0


def binary_report(y_true, y_pred, positive="intense", negative="mild") -> dict:
    """Accuracy plus per-rule (each label as positive) and averaged P/R/F1."""
    counts = binary_counts(y_true, y_pred, positive)
    per_rule = {}
    for label in (positive, negative):
        c = binary_counts(y_true, y_pred, label)
        p, r, f1 = precision_recall_f1(c["tp"], c["fp"], c["fn"])
        per_rule[label] = {"precision": p, "recall": r, "f1": f1,
                           "counts": c}
    averaged = {
        key: (per_rule[positive][key] + per_rule[negative][key]) / 2.0
        for key in ("precision", "recall", "f1")
    }
    return {"accuracy": accuracy(counts), "confusion": counts,
            "per_rule": per_rule, "averaged": averaged}


def multiclass_confusion(y_true, y_pred, labels) -> list[list[int]]:
    index = {lab: i for i, lab in enumerate(labels)}
    mat = np.zeros((len(labels), len(labels)), dtype=int)
    for t, p in zip(y_true, y_pred):
        mat[index[t], index[p]] += 1
    return mat.tolist()


def multiclass_accuracy(confusion: list[list[int]]) -> float:
    mat = np.asarray(confusion)
    total = int(mat.sum())
    return float(np.trace(mat)) / total if total else 0.0
