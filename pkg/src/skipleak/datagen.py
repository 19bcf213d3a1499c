"""Seeded synthetic population with a tunable attribute signal.

Each record is an individual: an opaque identifier, a hidden sensitive
attribute (one of ``k_sensitive`` classes), client-visible features drawn
from a Gaussian around that attribute's mean, and a task label produced by a
fixed linear teacher over the enriched input.

``separation`` is the single signal dial.  It sets both the distance between
attribute-conditional feature means and the weight of the attribute term in
the teacher, so at separation 0 neither the features nor the task carry any
attribute information, and the learned model has nothing attribute-specific
to internalise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyDataset,
    FractionSumInvalid,
    IoFailure,
    MalformedRow,
)
from . import rng

# Weight of the attribute term in the teacher, per unit of separation.
# Large enough that training must route the attribute through the hidden
# layers, small enough that the attribute rarely decides the argmax outright.
ATTR_COUPLING = 1.5


@dataclass(frozen=True)
class GenConfig:
    k_sensitive: int = 5
    n_client_features: int = 16
    n_task_classes: int = 10
    samples_per_class: int = 40
    separation: float = 4.0
    feature_noise: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k_sensitive < 1 or self.n_client_features < 1 or self.n_task_classes < 2:
            raise DimensionMismatch("k_sensitive, n_client_features >= 1 and n_task_classes >= 2 required")
        if self.samples_per_class < 1:
            raise DimensionMismatch("samples_per_class must be >= 1")
        if self.separation < 0:
            raise DimensionMismatch("separation must be >= 0")
        if self.feature_noise <= 0:
            raise DimensionMismatch("feature_noise must be > 0")

    @property
    def input_dim(self) -> int:
        return self.n_client_features + self.k_sensitive


@dataclass
class LabeledRow:
    identifier: str
    split: str
    attribute: int
    task_label: int
    features: np.ndarray


@dataclass
class LabeledDataset:
    rows: list[LabeledRow]
    k_sensitive: int
    n_client_features: int
    n_task_classes: int

    def subset(self, split: str) -> list[LabeledRow]:
        return [r for r in self.rows if r.split == split]

    def identifiers(self, split: str | None = None) -> list[str]:
        rows = self.rows if split is None else self.subset(split)
        return [r.identifier for r in rows]


def class_means(cfg: GenConfig) -> np.ndarray:
    """Attribute-conditional feature means, pairwise at least ``separation`` apart.

    With enough dimensions each mean sits on its own scaled coordinate axis (a
    regular simplex, exact pairwise distance).  In narrower spaces the means
    fall back to evenly spaced points along the first axis.
    """
    k, n = cfg.k_sensitive, cfg.n_client_features
    means = np.zeros((k, n), dtype=np.float64)
    if n >= k:
        scale = cfg.separation / np.sqrt(2.0)
        for c in range(k):
            means[c, c] = scale
    else:
        for c in range(k):
            means[c, 0] = c * cfg.separation
    return means


def teacher_matrices(cfg: GenConfig) -> tuple[np.ndarray, np.ndarray]:
    """Fixed linear teacher: a feature term and an attribute term."""
    gen = rng.substream(cfg.seed, rng.GEN_TEACHER)
    t_feat = gen.uniform(-1.0, 1.0, size=(cfg.n_task_classes, cfg.n_client_features))
    t_attr = gen.uniform(-1.0, 1.0, size=(cfg.n_task_classes, cfg.k_sensitive))
    return t_feat, t_attr


def teacher_label(cfg: GenConfig, t_feat: np.ndarray, t_attr: np.ndarray, x: np.ndarray, attribute: int) -> int:
    logits = t_feat @ x + ATTR_COUPLING * cfg.separation * t_attr[:, attribute]
    return int(np.argmax(logits))


def generate(cfg: GenConfig) -> LabeledDataset:
    """Draw the full population; per-class streams derive from (seed, class)."""
    means = class_means(cfg)
    t_feat, t_attr = teacher_matrices(cfg)
    rows: list[LabeledRow] = []
    for c in range(cfg.k_sensitive):
        gen = rng.substream(cfg.seed, rng.GEN_FEATURES, c)
        feats = means[c] + cfg.feature_noise * gen.standard_normal((cfg.samples_per_class, cfg.n_client_features))
        for j in range(cfg.samples_per_class):
            x = feats[j]
            rows.append(
                LabeledRow(
                    identifier=str(c * cfg.samples_per_class + j),
                    split="",
                    attribute=c,
                    task_label=teacher_label(cfg, t_feat, t_attr, x, c),
                    features=x,
                )
            )
    return LabeledDataset(rows, cfg.k_sensitive, cfg.n_client_features, cfg.n_task_classes)


def split_dataset(
    dataset: LabeledDataset, fractions: tuple[float, float, float], seed: int
) -> LabeledDataset:
    """Assign train/aux/test splits, stratified by attribute.

    Identifier sets are disjoint by construction.  Within each attribute
    class, train and aux take the floor of their share and test absorbs the
    remainder, so exact fractions of an exactly divisible class stay exact.
    """
    if any(f < 0 for f in fractions):
        raise FractionSumInvalid("split fractions must be >= 0")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise FractionSumInvalid(f"split fractions sum to {sum(fractions)}, expected 1")
    if not dataset.rows:
        raise EmptyDataset("cannot split an empty dataset")

    gen = rng.substream(seed, rng.GEN_SPLIT)
    new_rows: dict[str, LabeledRow] = {}
    by_class: dict[int, list[LabeledRow]] = {}
    for r in dataset.rows:
        by_class.setdefault(r.attribute, []).append(r)
    for c in sorted(by_class):
        members = by_class[c]
        order = gen.permutation(len(members))
        n = len(members)
        n_train = int(np.floor(fractions[0] * n))
        n_aux = int(np.floor(fractions[1] * n))
        for pos, idx in enumerate(order):
            if pos < n_train:
                tag = "train"
            elif pos < n_train + n_aux:
                tag = "aux"
            else:
                tag = "test"
            r = members[idx]
            new_rows[r.identifier] = LabeledRow(r.identifier, tag, r.attribute, r.task_label, r.features)
    # Preserve the original row order.
    ordered = [new_rows[r.identifier] for r in dataset.rows]
    return LabeledDataset(ordered, dataset.k_sensitive, dataset.n_client_features, dataset.n_task_classes)


DATASET_FIXED_COLUMNS = ["identifier", "split", "attribute", "task_label"]


def save_dataset(dataset: LabeledDataset, path: str) -> None:
    """CSV with header identifier,split,attribute,task_label,f0,f1,...

    Floats are written with shortest round-trip repr, so load(save(d)) == d.
    """
    header = DATASET_FIXED_COLUMNS + [f"f{i}" for i in range(dataset.n_client_features)]
    try:
        with open(path, "w", encoding="ascii", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for r in dataset.rows:
                row = [r.identifier, r.split, str(r.attribute), str(r.task_label)]
                row.extend(repr(float(v)) for v in r.features)
                writer.writerow(row)
    except OSError as exc:
        raise IoFailure(f"cannot write dataset {path}: {exc}") from exc


def load_dataset(
    path: str, k_sensitive: int | None = None, n_task_classes: int | None = None
) -> LabeledDataset:
    """Read a dataset CSV.  Class counts not supplied are inferred from the
    largest attribute / task label present."""
    try:
        with open(path, "r", encoding="ascii", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise EmptyDataset(f"{path} is empty")
            if header[: len(DATASET_FIXED_COLUMNS)] != DATASET_FIXED_COLUMNS:
                raise MalformedRow(1, "unexpected dataset header")
            n_features = len(header) - len(DATASET_FIXED_COLUMNS)
            rows = []
            for line_no, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise MalformedRow(line_no, f"expected {len(header)} columns, found {len(row)}")
                try:
                    rows.append(
                        LabeledRow(
                            identifier=row[0],
                            split=row[1],
                            attribute=int(row[2]),
                            task_label=int(row[3]),
                            features=np.array([float(v) for v in row[4 : 4 + n_features]], dtype=np.float64),
                        )
                    )
                except ValueError as exc:
                    raise MalformedRow(line_no, str(exc)) from exc
    except OSError as exc:
        raise IoFailure(f"cannot read dataset {path}: {exc}") from exc
    if not rows:
        raise EmptyDataset(f"{path} contains a header but no rows")
    if k_sensitive is None:
        k_sensitive = max(r.attribute for r in rows) + 1
    if n_task_classes is None:
        n_task_classes = max(max(r.task_label for r in rows) + 1, 2)
    return LabeledDataset(rows, k_sensitive, n_features, n_task_classes)


def with_seed(cfg: GenConfig, seed: int) -> GenConfig:
    return replace(cfg, seed=seed)
