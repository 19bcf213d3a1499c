"""Attack-evaluation metrics: accuracy, weighted F1, advantage, effect sizes.

All metrics are implemented from their definitions so their tie-breaking and
degenerate-case behaviour is pinned here rather than inherited from a library.
Percentages are used throughout (accuracy 0..100, advantage in percentage
points) to match how attribute-inference results are usually quoted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSample, EmptyInput, LengthMismatch


def _paired(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    if t.ndim != 1 or p.ndim != 1:
        raise LengthMismatch("label sequences must be one-dimensional")
    if t.size != p.size:
        raise LengthMismatch(f"{t.size} truths vs {p.size} predictions")
    if t.size == 0:
        raise EmptyInput("metrics require at least one prediction")
    return t, p


def accuracy(y_true, y_pred) -> float:
    """Percent of exact matches."""
    t, p = _paired(y_true, y_pred)
    return 100.0 * float(np.mean(t == p))


def per_class_precision_recall(y_true, y_pred) -> dict[int, dict[str, float]]:
    """Per-class precision, recall, F1 and support.

    Classes are those appearing in the ground truth.  A class with zero
    precision+recall gets F1 = 0 rather than NaN.
    """
    t, p = _paired(y_true, y_pred)
    table: dict[int, dict[str, float]] = {}
    for c in sorted(set(t.tolist())):
        tp = int(np.sum((t == c) & (p == c)))
        fp = int(np.sum((t != c) & (p == c)))
        fn = int(np.sum((t == c) & (p != c)))
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        table[c] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": float(int(np.sum(t == c))),
        }
    return table


def weighted_f1(y_true, y_pred) -> float:
    """Support-weighted mean of per-class F1, as a percentage."""
    t, p = _paired(y_true, y_pred)
    table = per_class_precision_recall(t, p)
    total = sum(row["support"] for row in table.values())
    return 100.0 * sum(row["f1"] * row["support"] for row in table.values()) / total


def uniform_baseline_pct(k: int) -> float:
    """Accuracy of blind uniform guessing over k classes, in percent."""
    if k < 1:
        raise EmptyInput("k must be >= 1")
    return 100.0 / k


def empirical_baseline_pct(y_true) -> float:
    """Accuracy of always guessing the majority class of the ground truth."""
    t = np.asarray(y_true, dtype=np.int64)
    if t.size == 0:
        raise EmptyInput("empirical baseline requires ground truth")
    _, counts = np.unique(t, return_counts=True)
    return 100.0 * float(counts.max()) / t.size


def adversarial_advantage(accuracy_pct: float, baseline_pct: float) -> float:
    """Attack accuracy minus guessing baseline, in percentage points."""
    return float(accuracy_pct) - float(baseline_pct)


def cohens_d(sample_a, sample_b) -> float:
    """Effect size (mean_a - mean_b) / pooled sample standard deviation.

    Pooling uses ddof=1 variances.  When the pooled deviation is zero the
    result degenerates: 0.0 if the means agree (two identical constants),
    otherwise a signed infinity sentinel instead of an exception so callers
    can still rank separations.
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise DegenerateSample("cohens_d requires at least two points per sample")
    mean_a, mean_b = float(a.mean()), float(b.mean())
    var_a, var_b = float(a.var(ddof=1)), float(b.var(ddof=1))
    pooled = math.sqrt(((a.size - 1) * var_a + (b.size - 1) * var_b) / (a.size + b.size - 2))
    diff = mean_a - mean_b
    if pooled == 0.0:
        if diff == 0.0:
            return 0.0
        return math.copysign(math.inf, diff)
    return diff / pooled


def cohens_d_matrix(values, groups, k: int) -> np.ndarray:
    """k x k matrix of absolute pairwise effect sizes between groups.

    Entry [i, j] is |d| between group i and group j; the diagonal is zero.
    Pairs where either group has fewer than two points are NaN.
    """
    v = np.asarray(values, dtype=np.float64)
    g = np.asarray(groups, dtype=np.int64)
    if v.shape != g.shape:
        raise LengthMismatch("values and groups must align")
    out = np.zeros((k, k), dtype=np.float64)
    samples = [v[g == c] for c in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            if samples[i].size < 2 or samples[j].size < 2:
                d = math.nan
            else:
                d = abs(cohens_d(samples[i], samples[j]))
            out[i, j] = d
            out[j, i] = d
    return out


def mean_abs_cohens_d(values, groups, k: int) -> float:
    """Mean of the finite off-diagonal entries of the pairwise |d| matrix."""
    m = cohens_d_matrix(values, groups, k)
    upper = m[np.triu_indices(k, 1)]
    finite = upper[np.isfinite(upper)]
    if finite.size == 0:
        raise DegenerateSample("no group pair has enough points for an effect size")
    return float(finite.mean())


@dataclass
class LeakageReport:
    """Metric bundle for one attack evaluation."""

    method: str
    accuracy_pct: float
    weighted_f1_pct: float
    baseline_kind: str
    baseline_pct: float
    advantage_pp: float
    n_eval: int
    k_sensitive: int
    per_class: dict[int, dict[str, float]]
    cohens_d: np.ndarray


def build_report(
    method: str,
    y_true,
    y_pred,
    latencies,
    k_sensitive: int,
    baseline_kind: str = "uniform",
) -> LeakageReport:
    """Assemble the full report for one attacker's predictions."""
    t, p = _paired(y_true, y_pred)
    acc = accuracy(t, p)
    if baseline_kind == "uniform":
        baseline = uniform_baseline_pct(k_sensitive)
    elif baseline_kind == "empirical":
        baseline = empirical_baseline_pct(t)
    else:
        raise EmptyInput(f"unknown baseline kind {baseline_kind!r}")
    return LeakageReport(
        method=method,
        accuracy_pct=acc,
        weighted_f1_pct=weighted_f1(t, p),
        baseline_kind=baseline_kind,
        baseline_pct=baseline,
        advantage_pp=adversarial_advantage(acc, baseline),
        n_eval=int(t.size),
        k_sensitive=int(k_sensitive),
        per_class=per_class_precision_recall(t, p),
        cohens_d=cohens_d_matrix(np.asarray(latencies, dtype=np.float64), t, k_sensitive),
    )
