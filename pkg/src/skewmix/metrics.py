"""Clustering and outlier-detection metrics."""

from __future__ import annotations

import numpy as np


def _comb2(x):
    return x * (x - 1) / 2.0


def ari(labels_a, labels_b) -> float:
    """Adjusted Rand index via the pair-counting contingency formula.

    Symmetric and invariant to renaming the labels; 1 for identical
    partitions, about 0 for independent ones.
    """
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("labelings must be equal-length vectors")
    n = a.size
    if n < 2:
        raise ValueError("need at least two points")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1.0)
    sum_cells = _comb2(table).sum()
    sum_rows = _comb2(table.sum(axis=1)).sum()
    sum_cols = _comb2(table.sum(axis=0)).sum()
    total = _comb2(n)
    expected = sum_rows * sum_cols / total
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0  # both partitions are single-block or all-singletons
    return float((sum_cells - expected) / (max_index - expected))


def confusion_rates(flags_pred, flags_true):
    """Outlier-flag accuracy, true-positive and false-positive rates.

    ``flags_*`` are booleans with True meaning "outlier". TPR is None when
    the truth contains no outliers at all.
    """
    pred = np.asarray(flags_pred, dtype=bool)
    true = np.asarray(flags_true, dtype=bool)
    if pred.shape != true.shape:
        raise ValueError("flag vectors must have equal length")
    accuracy = float(np.mean(pred == true))
    n_bad = int(true.sum())
    n_good = int((~true).sum())
    tpr = float(np.mean(pred[true])) if n_bad else None
    fpr = float(np.mean(pred[~true])) if n_good else 0.0
    return accuracy, tpr, fpr
