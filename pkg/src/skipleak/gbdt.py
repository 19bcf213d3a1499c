"""One-vs-rest gradient-boosted regression trees with logistic loss.

Written from scratch so the split search and every tie-break are exactly
specified: splits are found by exhaustive variance-reduction search over
midpoints of consecutive distinct feature values, and ties resolve to the
lowest feature index, then the lowest threshold.  Given identical inputs the
fit is bit-for-bit deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLabels, DimensionMismatch, FeatureLayoutMismatch


@dataclass(frozen=True)
class GBDTConfig:
    n_trees: int = 150
    max_depth: int = 3
    learning_rate: float = 0.3
    min_samples_split: int = 2

    def __post_init__(self) -> None:
        if self.n_trees < 1 or self.max_depth < 1:
            raise DimensionMismatch("n_trees and max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise DimensionMismatch("learning_rate must lie in (0, 1]")
        if self.min_samples_split < 2:
            raise DimensionMismatch("min_samples_split must be >= 2")


@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _best_split(x: np.ndarray, residual: np.ndarray) -> tuple[int, float, float] | None:
    """Exhaustive variance-reduction split search.

    Returns (feature, threshold, gain) or None if no split strictly reduces
    the residual sum of squares.  Iterating features in index order and
    thresholds in ascending order with a strict improvement test implements
    the lowest-feature / lowest-threshold tie-break.
    """
    n = x.shape[0]
    total = residual.sum()
    best: tuple[int, float, float] | None = None
    for j in range(x.shape[1]):
        order = np.argsort(x[:, j], kind="stable")
        xs = x[order, j]
        rs = residual[order]
        prefix = np.cumsum(rs)
        # Candidate cut after position i-1 (left gets i points), only where
        # the sorted feature value actually changes.
        boundaries = np.nonzero(xs[1:] > xs[:-1])[0] + 1
        if boundaries.size == 0:
            continue
        left_n = boundaries.astype(np.float64)
        left_sum = prefix[boundaries - 1]
        right_n = n - left_n
        right_sum = total - left_sum
        gains = left_sum**2 / left_n + right_sum**2 / right_n - total**2 / n
        for idx in range(boundaries.size):
            gain = float(gains[idx])
            if gain > 1e-12 and (best is None or gain > best[2]):
                cut = boundaries[idx]
                threshold = float((xs[cut - 1] + xs[cut]) / 2.0)
                best = (j, threshold, gain)
    return best


def _grow(x: np.ndarray, residual: np.ndarray, depth: int, cfg: GBDTConfig) -> _Node:
    node = _Node(value=float(residual.mean()))
    if depth >= cfg.max_depth or x.shape[0] < cfg.min_samples_split:
        return node
    if np.all(residual == residual[0]):
        return node
    split = _best_split(x, residual)
    if split is None:
        return node
    j, threshold, _ = split
    mask = x[:, j] <= threshold
    node.feature = j
    node.threshold = threshold
    node.left = _grow(x[mask], residual[mask], depth + 1, cfg)
    node.right = _grow(x[~mask], residual[~mask], depth + 1, cfg)
    return node


def _apply(node: _Node, x: np.ndarray, out: np.ndarray, idx: np.ndarray) -> None:
    if node.is_leaf:
        out[idx] = node.value
        return
    mask = x[idx, node.feature] <= node.threshold
    _apply(node.left, x, out, idx[mask])
    _apply(node.right, x, out, idx[~mask])


def _tree_predict(node: _Node, x: np.ndarray) -> np.ndarray:
    out = np.empty(x.shape[0], dtype=np.float64)
    _apply(node, x, out, np.arange(x.shape[0]))
    return out


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-z)), np.exp(z) / (1.0 + np.exp(z)))


@dataclass
class GBDTModel:
    """One boosted ensemble per class, scored one-vs-rest."""

    cfg: GBDTConfig
    n_features: int
    n_classes: int
    ensembles: list[list[_Node]] = field(default_factory=list)
    constant_class: int | None = None

    @property
    def degenerate(self) -> bool:
        return self.constant_class is not None


def gbdt_fit(x: np.ndarray, y: np.ndarray, n_classes: int, cfg: GBDTConfig) -> GBDTModel:
    """Fit one-vs-rest boosted trees on negative-gradient residuals.

    Each class ensemble starts from a zero score; every round fits a
    regression tree to (indicator - sigmoid(score)) and adds it with the
    configured shrinkage.  A single-class training set yields a flagged
    constant classifier instead of an exception.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2:
        raise DimensionMismatch("feature matrix must be 2-D")
    if y.shape != (x.shape[0],):
        raise DimensionMismatch("labels must align with feature rows")
    if x.shape[0] == 0:
        raise DegenerateLabels("cannot fit on zero rows")
    if np.any(y < 0) or np.any(y >= n_classes):
        raise DimensionMismatch(f"label outside [0, {n_classes})")

    model = GBDTModel(cfg=cfg, n_features=x.shape[1], n_classes=int(n_classes))
    present = np.unique(y)
    if present.size < 2:
        model.constant_class = int(present[0])
        return model

    for c in range(n_classes):
        target = (y == c).astype(np.float64)
        score = np.zeros(x.shape[0], dtype=np.float64)
        trees: list[_Node] = []
        for _ in range(cfg.n_trees):
            residual = target - _sigmoid(score)
            tree = _grow(x, residual, 0, cfg)
            trees.append(tree)
            score += cfg.learning_rate * _tree_predict(tree, x)
        model.ensembles.append(trees)
    return model


def gbdt_scores(model: GBDTModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise FeatureLayoutMismatch(
            f"feature matrix has {x.shape[1] if x.ndim == 2 else '?'} columns, model was fit with {model.n_features}"
        )
    if model.degenerate:
        scores = np.full((x.shape[0], model.n_classes), -np.inf)
        scores[:, model.constant_class] = 0.0
        return scores
    scores = np.zeros((x.shape[0], model.n_classes), dtype=np.float64)
    for c, trees in enumerate(model.ensembles):
        for tree in trees:
            scores[:, c] += model.cfg.learning_rate * _tree_predict(tree, x)
    return scores


def gbdt_predict(model: GBDTModel, x: np.ndarray) -> np.ndarray:
    """Argmax of per-class scores; ties resolve to the lowest class index."""
    return np.argmax(gbdt_scores(model, x), axis=1)
