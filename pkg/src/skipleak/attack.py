"""Timing attribute-inference attacker.

The adversary interacts with the service exactly like any client: it submits
(identifier, features) queries and records latency and label.  Profiling
aggregates repeated measurements per identifier by the median.  Two inference
routes are built on the profiles: seeded 1-D k-means anchored by a labeled
auxiliary set, and gradient-boosted trees over
[latency, submitted features..., one-hot(predicted label)].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AmbiguousCluster,
    DimensionMismatch,
    EmptyInput,
    LengthMismatch,
    TooFewDistinctPoints,
)
from .gbdt import GBDTConfig, GBDTModel, gbdt_fit, gbdt_predict
from .service import EnrichmentService
from . import rng


@dataclass
class AttackRow:
    """One profiled identifier as the attacker sees it."""

    identifier: str
    latency_cycles: float
    client_features: np.ndarray
    predicted_label: int
    attribute: int | None = None


def profile(
    service: EnrichmentService,
    targets: list[tuple[str, np.ndarray]],
    repetitions: int,
    base_seed: int,
    ordinals: list[int] | None = None,
    sink: list | None = None,
) -> list[AttackRow]:
    """Median-aggregate repeated queries into one row per identifier.

    ``ordinals`` gives each target a stable noise-stream index so that the
    same (identifier, repetition) pair sees the same measurement noise across
    scenario variants; defaults to enumeration order.  When ``sink`` is given,
    every underlying query record is appended to it (for trace files and
    server-side aggregates).
    """
    if repetitions < 1:
        raise DimensionMismatch("repetitions must be >= 1")
    if len(targets) == 0:
        raise EmptyInput("profiling requires at least one target")
    if ordinals is None:
        ordinals = list(range(len(targets)))
    if len(ordinals) != len(targets):
        raise LengthMismatch("ordinals must align with targets")

    rows = []
    for (identifier, features), ordinal in zip(targets, ordinals):
        latencies = np.empty(repetitions, dtype=np.float64)
        label = 0
        for rep in range(repetitions):
            seed = rng.seed_entropy(base_seed, rng.QUERY_NOISE, ordinal, rep)
            record = service.query_traced(identifier, features, seed)
            latencies[rep] = record.response.latency_cycles
            if rep == 0:
                label = record.response.predicted_label
            if sink is not None:
                sink.append(record)
        rows.append(
            AttackRow(
                identifier=str(identifier),
                latency_cycles=float(np.median(latencies)),
                client_features=np.asarray(features, dtype=np.float64).copy(),
                predicted_label=label,
            )
        )
    return rows


@dataclass
class ClusterModel:
    """Sorted 1-D centroids plus the anchored cluster -> attribute map."""

    centroids: np.ndarray
    cluster_to_attribute: dict[int, int]


def kmeans_1d(values, k: int, seed: int, max_iter: int = 300) -> np.ndarray:
    """Lloyd's algorithm on scalars with seeded k-means++ init.

    Returns centroids sorted ascending.  Requires at least k distinct values.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptyInput("clustering requires at least one value")
    if k < 1:
        raise DimensionMismatch("k must be >= 1")
    distinct = np.unique(x)
    if distinct.size < k:
        raise TooFewDistinctPoints(f"{distinct.size} distinct values cannot form {k} clusters")

    gen = rng.substream(seed, rng.ATTACK_KMEANS)
    centroids = np.empty(k, dtype=np.float64)
    centroids[0] = x[gen.integers(x.size)]
    d2 = (x - centroids[0]) ** 2
    for i in range(1, k):
        total = d2.sum()
        if total == 0.0:
            # All mass sits on chosen points already; fall back to unused
            # distinct values to keep centroids unique.
            unused = np.setdiff1d(distinct, centroids[:i])
            centroids[i] = unused[0]
        else:
            centroids[i] = x[gen.choice(x.size, p=d2 / total)]
        d2 = np.minimum(d2, (x - centroids[i]) ** 2)

    assignment = np.full(x.size, -1)
    for _ in range(max_iter):
        dist = np.abs(x[:, None] - centroids[None, :])
        new_assignment = np.argmin(dist, axis=1)
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for c in range(k):
            members = x[assignment == c]
            if members.size:
                centroids[c] = members.mean()
    return np.sort(centroids)


def nearest_centroid(centroids: np.ndarray, value: float) -> int:
    """Index of the closest centroid; ties resolve to the lower index."""
    return int(np.argmin(np.abs(np.asarray(centroids, dtype=np.float64) - float(value))))


def anchor(centroids: np.ndarray, labeled: list[tuple[float, int]]) -> ClusterModel:
    """Map clusters to attributes by majority vote of labeled latencies.

    Ties go to the lowest attribute index; clusters receiving no vote stay
    unmapped and inference on them raises :class:`AmbiguousCluster`.
    """
    if len(labeled) == 0:
        raise EmptyInput("anchoring requires labeled points")
    centroids = np.asarray(centroids, dtype=np.float64)
    votes: dict[int, dict[int, int]] = {}
    for latency, attribute in labeled:
        c = nearest_centroid(centroids, latency)
        votes.setdefault(c, {})
        votes[c][int(attribute)] = votes[c].get(int(attribute), 0) + 1
    mapping = {}
    for c, counts in votes.items():
        best = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))
        mapping[c] = best[0]
    return ClusterModel(centroids=centroids, cluster_to_attribute=mapping)


def infer_cluster(model: ClusterModel, latency: float) -> int:
    """Attribute of the nearest anchored centroid."""
    c = nearest_centroid(model.centroids, latency)
    if c not in model.cluster_to_attribute:
        raise AmbiguousCluster(f"cluster {c} received no anchoring votes")
    return model.cluster_to_attribute[c]


def build_feature_matrix(rows: list[AttackRow], n_label_classes: int) -> np.ndarray:
    """Stack attack rows as [latency, features..., one-hot(predicted label)]."""
    if len(rows) == 0:
        raise EmptyInput("no attack rows")
    n_client = rows[0].client_features.size
    out = np.zeros((len(rows), 1 + n_client + n_label_classes), dtype=np.float64)
    for i, row in enumerate(rows):
        if row.client_features.size != n_client:
            raise LengthMismatch("attack rows have inconsistent feature widths")
        if not 0 <= row.predicted_label < n_label_classes:
            raise DimensionMismatch(f"predicted label {row.predicted_label} outside [0, {n_label_classes})")
        out[i, 0] = row.latency_cycles
        out[i, 1 : 1 + n_client] = row.client_features
        out[i, 1 + n_client + row.predicted_label] = 1.0
    return out


def fit_gbdt_attacker(
    aux_rows: list[AttackRow], k_sensitive: int, n_label_classes: int, cfg: GBDTConfig
) -> GBDTModel:
    """Train the supervised attacker on labeled auxiliary rows."""
    if any(row.attribute is None for row in aux_rows):
        raise EmptyInput("auxiliary rows must carry ground-truth attributes")
    x = build_feature_matrix(aux_rows, n_label_classes)
    y = np.array([row.attribute for row in aux_rows], dtype=np.int64)
    return gbdt_fit(x, y, k_sensitive, cfg)


def predict_gbdt_attacker(model: GBDTModel, rows: list[AttackRow], n_label_classes: int) -> np.ndarray:
    return gbdt_predict(model, build_feature_matrix(rows, n_label_classes))
