"""Label-only prediction service with backend attribute enrichment.

The service mimics a production inference API: the caller sends an identifier
plus its own feature vector; the backend looks up the identifier's private
attribute, appends its one-hot encoding to the features, runs the victim
model, and returns only the predicted label and the (simulated) latency.
Logits, confidences, and sparsity never cross the boundary.

Two deployable defenses are modelled: latency padding to a fixed budget and
disabling zero-skipping (dense execution).  A confidence-masking switch is
accepted for completeness; since the API never returns confidences it changes
nothing, which the evaluation makes measurable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AttributeOutOfRange,
    DimensionMismatch,
    EmptyEvaluationSet,
    IoFailure,
    MalformedRow,
    UnknownIdentifier,
)
from .mlp import MLPModel, forward
from .timing import SkipMode, TimingModelConfig, cost, observe, skippable_energy, worst_case_cycles
from . import rng


@dataclass(frozen=True)
class DefenseConfig:
    padding_budget_cycles: float | None = None
    disable_zero_skip: bool = False
    mask_confidences: bool = False

    def __post_init__(self) -> None:
        if self.padding_budget_cycles is not None and self.padding_budget_cycles < 0:
            raise DimensionMismatch("padding budget must be >= 0")


@dataclass(frozen=True)
class APIResponse:
    """Everything a caller ever sees.  Keep this surface minimal: the privacy
    argument rests on no attribute-derived field existing besides the label
    and the latency."""

    predicted_label: int
    latency_cycles: float
    budget_violation: bool


@dataclass
class QueryRecord:
    """Server-side trace of one query, for audit files and evaluations."""

    identifier: str
    client_features: np.ndarray
    response: APIResponse
    cycles_true: float
    attribute: int
    energy_as_is: float
    energy_as_dense: float


class FeatureStore:
    """Identifier -> sensitive attribute lookup table."""

    def __init__(self, k_sensitive: int):
        if k_sensitive < 1:
            raise AttributeOutOfRange("k_sensitive must be >= 1")
        self.k_sensitive = int(k_sensitive)
        self._table: dict[str, int] = {}

    def register(self, identifier: str, attribute: int) -> None:
        """Insert or overwrite; the latest registration wins."""
        attribute = int(attribute)
        if not 0 <= attribute < self.k_sensitive:
            raise AttributeOutOfRange(
                f"attribute {attribute} outside [0, {self.k_sensitive})"
            )
        self._table[str(identifier)] = attribute

    def lookup(self, identifier: str) -> int:
        try:
            return self._table[str(identifier)]
        except KeyError:
            raise UnknownIdentifier(f"identifier {identifier!r} was never registered") from None

    def __len__(self) -> int:
        return len(self._table)

    def identifiers(self) -> list[str]:
        return list(self._table)


def enrich(client_features: np.ndarray, attribute: int, k_sensitive: int) -> np.ndarray:
    """Concatenate client features with the one-hot attribute encoding."""
    x = np.asarray(client_features, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch(f"client features must be a vector, got shape {x.shape}")
    if not 0 <= int(attribute) < k_sensitive:
        raise AttributeOutOfRange(f"attribute {attribute} outside [0, {k_sensitive})")
    onehot = np.zeros(k_sensitive, dtype=np.float64)
    onehot[int(attribute)] = 1.0
    return np.concatenate([x, onehot])


class EnrichmentService:
    """The victim deployment: model + timing model + feature store + defenses."""

    def __init__(
        self,
        model: MLPModel,
        timing_cfg: TimingModelConfig,
        defense: DefenseConfig,
        store: FeatureStore,
    ):
        if model.spec.input_dim <= store.k_sensitive:
            raise DimensionMismatch(
                "model input_dim must exceed k_sensitive (features plus one-hot)"
            )
        self.model = model
        self.timing_cfg = timing_cfg
        self.defense = defense
        self.store = store

    @property
    def client_dim(self) -> int:
        return self.model.spec.input_dim - self.store.k_sensitive

    def _effective_timing(self) -> TimingModelConfig:
        if self.defense.disable_zero_skip:
            return replace(self.timing_cfg, mode=SkipMode.DENSE)
        return self.timing_cfg

    def query(self, identifier: str, client_features: np.ndarray, noise_seed: int | list[int]) -> APIResponse:
        return self.query_traced(identifier, client_features, noise_seed).response

    def query_traced(
        self, identifier: str, client_features: np.ndarray, noise_seed: int | list[int]
    ) -> QueryRecord:
        """Run one query and keep the server-side record the caller never sees."""
        x = np.asarray(client_features, dtype=np.float64)
        if x.shape != (self.client_dim,):
            raise DimensionMismatch(
                f"client features have shape {x.shape}, service expects ({self.client_dim},)"
            )
        attribute = self.store.lookup(identifier)
        enriched = enrich(x, attribute, self.store.k_sensitive)
        logits, stats = forward(self.model, enriched)
        label = int(np.argmax(logits))

        cfg = self._effective_timing()
        cycles_true = cost(stats, self.model.spec, cfg)
        latency = observe(cycles_true, cfg, noise_seed)

        violation = False
        budget = self.defense.padding_budget_cycles
        if budget is not None:
            violation = latency > budget
            latency = max(latency, float(budget))

        # Dense execution really performs every MAC, so the skippable work
        # draws the nonzero-operand figure across the board.
        as_dense = skippable_energy(stats, self.model.spec, cfg, as_dense=True)
        if cfg.mode is SkipMode.DENSE:
            as_is = as_dense
        else:
            as_is = skippable_energy(stats, self.model.spec, cfg, as_dense=False)

        return QueryRecord(
            identifier=str(identifier),
            client_features=x.copy(),
            response=APIResponse(label, latency, violation),
            cycles_true=cycles_true,
            attribute=attribute,
            energy_as_is=as_is,
            energy_as_dense=as_dense,
        )

    def run_queries(
        self,
        queries: Sequence[tuple[str, np.ndarray]],
        base_seed: int,
        ordinals: Sequence[int] | None = None,
    ) -> list[QueryRecord]:
        """Run a batch of (identifier, features) queries with derived noise seeds.

        ``ordinals`` pins each query's noise stream; defaults to enumeration
        order.  Replaying with the same seed and ordinals is bit-identical.
        """
        if ordinals is None:
            ordinals = range(len(queries))
        if len(ordinals) != len(queries):
            raise DimensionMismatch("ordinals must align with queries")
        records = []
        for (identifier, features), ordinal in zip(queries, ordinals):
            seed = rng.seed_entropy(base_seed, rng.QUERY_NOISE, ordinal)
            records.append(self.query_traced(identifier, features, seed))
        return records

    def defense_overhead(
        self, queries: Sequence[tuple[str, np.ndarray]], base_seed: int,
        ordinals: Sequence[int] | None = None,
    ) -> float:
        """Relative latency cost of the padding budget.

        (budget - mean undefended latency) / mean undefended latency, where
        the undefended latencies replay the same queries and noise seeds with
        padding switched off.  Negative when the budget undershoots the mean;
        that is reported, not hidden.
        """
        if self.defense.padding_budget_cycles is None:
            raise EmptyEvaluationSet("defense_overhead requires an active padding budget")
        if len(queries) == 0:
            raise EmptyEvaluationSet("defense_overhead requires at least one query")
        undefended = EnrichmentService(
            self.model, self.timing_cfg, replace(self.defense, padding_budget_cycles=None), self.store
        )
        records = undefended.run_queries(queries, base_seed, ordinals)
        mean_latency = float(np.mean([r.response.latency_cycles for r in records]))
        return (float(self.defense.padding_budget_cycles) - mean_latency) / mean_latency

    def energy_report(
        self, queries: Sequence[tuple[str, np.ndarray]], base_seed: int,
        ordinals: Sequence[int] | None = None,
    ) -> tuple[float, float, float]:
        """Mean per-query energy of the zero-skip-governed work, as-is and as
        if forced dense, plus the dense/as-is ratio."""
        if len(queries) == 0:
            raise EmptyEvaluationSet("energy_report requires at least one query")
        records = self.run_queries(queries, base_seed, ordinals)
        as_is = float(np.mean([r.energy_as_is for r in records]))
        dense = float(np.mean([r.energy_as_dense for r in records]))
        return as_is, dense, dense / as_is

    def worst_case_cycles(self) -> float:
        return worst_case_cycles(self.model.spec, self._effective_timing())


TRACE_FIXED_COLUMNS = ["query_id", "identifier", "latency_cycles", "predicted_label", "attribute_ground_truth"]


def write_traces(path: str, records: Iterable[QueryRecord], *, oracle: bool) -> None:
    """Write query traces as CSV.

    Columns: query_id, identifier, latency_cycles, predicted_label,
    attribute_ground_truth, f0, f1, ...  In attack mode (``oracle=False``) the
    ground-truth column is left empty, matching what a real adversary logs.
    """
    records = list(records)
    n_features = records[0].client_features.size if records else 0
    header = TRACE_FIXED_COLUMNS + [f"f{i}" for i in range(n_features)]
    try:
        with open(path, "w", encoding="ascii", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for i, rec in enumerate(records):
                row = [
                    f"q{i:06d}",
                    rec.identifier,
                    repr(rec.response.latency_cycles),
                    str(rec.response.predicted_label),
                    str(rec.attribute) if oracle else "",
                ]
                row.extend(repr(float(v)) for v in rec.client_features)
                writer.writerow(row)
    except OSError as exc:
        raise IoFailure(f"cannot write trace file {path}: {exc}") from exc


def read_traces(path: str) -> list[dict]:
    """Read a trace CSV back into dicts; ground truth is None in attack mode."""
    try:
        with open(path, "r", encoding="ascii", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise MalformedRow(1, "trace file is empty")
            if header[: len(TRACE_FIXED_COLUMNS)] != TRACE_FIXED_COLUMNS:
                raise MalformedRow(1, "unexpected trace header")
            n_features = len(header) - len(TRACE_FIXED_COLUMNS)
            rows = []
            for line_no, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise MalformedRow(line_no, f"expected {len(header)} columns, found {len(row)}")
                try:
                    rows.append(
                        {
                            "query_id": row[0],
                            "identifier": row[1],
                            "latency_cycles": float(row[2]),
                            "predicted_label": int(row[3]),
                            "attribute_ground_truth": int(row[4]) if row[4] != "" else None,
                            "features": np.array([float(v) for v in row[5 : 5 + n_features]]),
                        }
                    )
                except ValueError as exc:
                    raise MalformedRow(line_no, str(exc)) from exc
            return rows
    except OSError as exc:
        raise IoFailure(f"cannot read trace file {path}: {exc}") from exc
