"""End-to-end experiment pipelines shared by the CLI and the test suite.

Every pipeline is a pure function of (ExperimentConfig, base seed): data
generation, victim training, attack probing, and reporting all draw from
streams derived off the base seed, so a rerun reproduces identical artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import rng
from .attack import (
    AttackRow,
    anchor,
    fit_gbdt_attacker,
    infer_cluster,
    kmeans_1d,
    predict_gbdt_attacker,
    profile,
)
from .config import ExperimentConfig
from .datagen import GenConfig, LabeledDataset, generate, load_dataset, save_dataset, split_dataset
from .errors import AmbiguousCluster, EmptyDataset, TooFewDistinctPoints
from .metrics import LeakageReport, build_report, mean_abs_cohens_d
from .mlp import (
    MLPModel,
    ModelSpec,
    TrainConfig,
    activation_count,
    build_model,
    forward,
    load_model,
    param_count,
    save_model,
    train,
)
from .service import DefenseConfig, EnrichmentService, FeatureStore, write_traces
from .timing import worst_case_cycles

SCALING_WIDTHS = (8, 16, 32, 64, 128, 256, 512)
SCALING_WIDTH_DEPTH = 4
SCALING_DEPTHS = (2, 3, 4, 5, 6, 7)
SCALING_DEPTH_WIDTH = 128


def enriched_matrix(dataset: LabeledDataset, rows) -> tuple[np.ndarray, np.ndarray]:
    """Stack [client features, one-hot(attribute)] rows with task labels."""
    k = dataset.k_sensitive
    x = np.zeros((len(rows), dataset.n_client_features + k), dtype=np.float64)
    y = np.zeros(len(rows), dtype=np.int64)
    for i, r in enumerate(rows):
        x[i, : dataset.n_client_features] = r.features
        x[i, dataset.n_client_features + r.attribute] = 1.0
        y[i] = r.task_label
    return x, y


def victim_spec(cfg: ExperimentConfig) -> ModelSpec:
    return ModelSpec(
        width=cfg.model.width,
        depth=cfg.model.depth,
        input_dim=cfg.gen.n_client_features + cfg.gen.k_sensitive,
        num_classes=cfg.gen.n_task_classes,
    )


def train_victim(cfg: ExperimentConfig, dataset: LabeledDataset) -> tuple[MLPModel, list[float]]:
    rows = dataset.subset("train")
    if not rows:
        raise EmptyDataset("dataset has no train split")
    x, y = enriched_matrix(dataset, rows)
    model = build_model(victim_spec(cfg), cfg.base_seed)
    tc = TrainConfig(
        learning_rate=cfg.model.learning_rate,
        epochs=cfg.model.epochs,
        batch_size=cfg.model.batch_size,
        seed=cfg.base_seed,
    )
    return train(model, x, y, tc)


def sparsity_by_class(dataset: LabeledDataset, model: MLPModel, rows) -> dict[int, float]:
    """Mean hidden-activation sparsity per sensitive class."""
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    k = dataset.k_sensitive
    for r in rows:
        x = np.zeros(model.spec.input_dim)
        x[: dataset.n_client_features] = r.features
        x[dataset.n_client_features + r.attribute] = 1.0
        _, stats = forward(model, x)
        sums[r.attribute] = sums.get(r.attribute, 0.0) + stats.total_sparsity
        counts[r.attribute] = counts.get(r.attribute, 0) + 1
    return {c: sums[c] / counts[c] for c in sorted(sums)}


def build_service(
    cfg: ExperimentConfig, dataset: LabeledDataset, model: MLPModel, defense: DefenseConfig
) -> EnrichmentService:
    store = FeatureStore(dataset.k_sensitive)
    for r in dataset.rows:
        store.register(r.identifier, r.attribute)
    return EnrichmentService(model, cfg.timing, defense, store)


def resolve_defense(cfg: ExperimentConfig) -> DefenseConfig:
    spec = victim_spec(cfg)
    return cfg.defense_config(worst_case_cycles(spec, cfg.timing), cfg.timing.noise_sigma)


@dataclass
class ProbePlan:
    """One probing query per profiled identifier, plus its noise ordinal."""

    targets: list[tuple[str, np.ndarray]]
    ordinals: list[int]
    attributes: list[int]


PROBE_SEARCH_RADII = (2.0, 4.0, 8.0, 16.0)
PROBE_SEARCH_COORDS = 8
PROBE_STABILITY_REPS = 5
PROBE_RANK_REPS = 25


def _loo_nearest_accuracy(medians: np.ndarray, attrs: np.ndarray) -> float:
    """Leave-one-out 1-NN accuracy of attribute from 1-D latency medians.

    Distance ties go to the lower attribute value so the score is
    deterministic regardless of identifier order.
    """
    n = medians.size
    hits = 0
    for i in range(n):
        best_dist = None
        best_attr = -1
        for j in range(n):
            if j == i:
                continue
            dist = abs(medians[j] - medians[i])
            if best_dist is None or dist < best_dist or (dist == best_dist and attrs[j] < best_attr):
                best_dist = dist
                best_attr = attrs[j]
        hits += best_attr == attrs[i]
    return hits / n


def select_probe_center(
    cfg: ExperimentConfig, dataset: LabeledDataset, service: EnrichmentService
) -> np.ndarray:
    """Pick the probing point the profiling queries will jitter around.

    The attacker wants a region where (a) the returned label does not react
    to the attribute, so latency is the only attribute-dependent column in
    its rows, and (b) latencies separate the attribute groups as cleanly as
    possible.  Starting from the mean of its auxiliary features it tries
    single-coordinate pushes.  Each candidate is first screened for label
    stability on a small panel of aux identifiers (one per known attribute
    value, jittered like the real probes).  Every stable candidate is then
    scored by profiling the full aux split and taking the leave-one-out
    nearest-neighbor accuracy of attribute from median latency - a direct,
    attacker-side estimate of how attackable the probe is; the best score
    wins (first in scan order on ties).  Everything used here - aux
    features, aux attributes, query access - is attacker-legal.  If no
    candidate is fully stable the least label-unstable one is used.
    """
    aux_rows = dataset.subset("aux")
    if not aux_rows:
        raise EmptyDataset("population probing requires an aux split")
    center = np.mean([r.features for r in aux_rows], axis=0)

    panel: dict[int, str] = {}
    for r in aux_rows:
        panel.setdefault(r.attribute, r.identifier)
    panel_ids = [panel[a] for a in sorted(panel)]

    jitter_gen = rng.substream(cfg.base_seed, rng.ATTACK_PROBE, 99)
    jitters = cfg.attack.probe_sigma * jitter_gen.standard_normal(
        (PROBE_STABILITY_REPS, dataset.n_client_features)
    )

    candidates: list[np.ndarray] = [center]
    for radius in PROBE_SEARCH_RADII:
        for j in range(min(dataset.n_client_features, PROBE_SEARCH_COORDS)):
            for sign in (1.0, -1.0):
                cand = center.copy()
                cand[j] += sign * radius
                candidates.append(cand)

    stable: list[np.ndarray] = []
    fallback: tuple[int, np.ndarray] | None = None
    counter = 0
    for cand in candidates:
        labels = set()
        for identifier in panel_ids:
            for offset in jitters:
                seed = rng.seed_entropy(cfg.base_seed, rng.QUERY_NOISE, 10**9, counter)
                counter += 1
                labels.add(service.query(identifier, cand + offset, seed).predicted_label)
        if len(labels) == 1:
            stable.append(cand)
        elif fallback is None or len(labels) < fallback[0]:
            fallback = (len(labels), cand)
    if not stable:
        return fallback[1]

    aux_ids = [r.identifier for r in aux_rows]
    aux_attrs = np.array([r.attribute for r in aux_rows], dtype=np.int64)
    rank_gen = rng.substream(cfg.base_seed, rng.ATTACK_PROBE, 98)
    rank_jitters = cfg.attack.probe_sigma * rank_gen.standard_normal(
        (len(aux_ids), dataset.n_client_features)
    )
    best: tuple[float, np.ndarray] | None = None
    for cand in stable:
        medians = np.empty(len(aux_ids))
        for i, identifier in enumerate(aux_ids):
            latencies = [
                service.query(
                    identifier,
                    cand + rank_jitters[i],
                    rng.seed_entropy(cfg.base_seed, rng.QUERY_NOISE, 10**9, counter + rep),
                ).latency_cycles
                for rep in range(PROBE_RANK_REPS)
            ]
            counter += PROBE_RANK_REPS
            medians[i] = np.median(latencies)
        score = _loo_nearest_accuracy(medians, aux_attrs)
        if best is None or score > best[0]:
            best = (score, cand)
    return best[1]


def plan_probes(
    cfg: ExperimentConfig,
    dataset: LabeledDataset,
    split: str,
    probe_center: np.ndarray | None = None,
) -> ProbePlan:
    """Choose what the attacker submits for each identifier in a split.

    ``population`` mode (default) jitters each identifier's probe around a
    shared attacker-chosen center: the submitted features carry no
    information about the target, so any attribute signal in the resulting
    rows came through the service.  ``dataset`` mode submits each
    identifier's real features instead (quasi-identifier threat model).
    """
    rows = dataset.subset(split)
    if not rows:
        raise EmptyDataset(f"dataset has no {split!r} split")
    index_of = {r.identifier: i for i, r in enumerate(dataset.rows)}
    ordinals = [index_of[r.identifier] for r in rows]
    attributes = [r.attribute for r in rows]

    if cfg.attack.probe_mode == "dataset":
        targets = [(r.identifier, r.features.copy()) for r in rows]
        return ProbePlan(targets, ordinals, attributes)

    if probe_center is None:
        aux_rows = dataset.subset("aux")
        if not aux_rows:
            raise EmptyDataset("population probing requires an aux split")
        probe_center = np.mean([r.features for r in aux_rows], axis=0)
    gen = rng.substream(cfg.base_seed, rng.ATTACK_PROBE, 0 if split == "aux" else 1)
    noise = gen.standard_normal((len(rows), dataset.n_client_features))
    targets = [
        (r.identifier, probe_center + cfg.attack.probe_sigma * noise[i])
        for i, r in enumerate(rows)
    ]
    return ProbePlan(targets, ordinals, attributes)


@dataclass
class AttackOutcome:
    gbdt_report: LeakageReport
    cluster_report: LeakageReport
    aux_rows: list[AttackRow]
    test_rows: list[AttackRow]
    y_true: np.ndarray
    gbdt_pred: np.ndarray
    cluster_pred: np.ndarray
    ambiguous_clusters: int
    mean_abs_d: float
    mean_latency: float
    mean_energy_as_is: float
    mean_energy_as_dense: float
    violation_rate: float
    n_queries: int
    records: list


def run_attack_core(
    cfg: ExperimentConfig,
    dataset: LabeledDataset,
    model: MLPModel,
    defense: DefenseConfig,
    capture_records: bool = False,
) -> AttackOutcome:
    """Profile, attack, and score one service configuration."""
    service = build_service(cfg, dataset, model, defense)
    center = None
    if cfg.attack.probe_mode == "population":
        center = select_probe_center(cfg, dataset, service)
    aux_plan = plan_probes(cfg, dataset, "aux", center)
    test_plan = plan_probes(cfg, dataset, "test", center)

    sink: list = []
    aux_rows = profile(service, aux_plan.targets, cfg.attack.repetitions, cfg.base_seed, aux_plan.ordinals, sink)
    test_rows = profile(service, test_plan.targets, cfg.attack.repetitions, cfg.base_seed, test_plan.ordinals, sink)
    for row, attribute in zip(aux_rows, aux_plan.attributes):
        row.attribute = attribute

    # Supervised route: boosted trees on [latency, probe features, label].
    gbdt = fit_gbdt_attacker(aux_rows, dataset.k_sensitive, dataset.n_task_classes, cfg.attack.gbdt_config())
    gbdt_pred = predict_gbdt_attacker(gbdt, test_rows, dataset.n_task_classes)

    # Unsupervised route: 1-D clusters anchored by the labeled aux rows.
    latencies_all = np.array([r.latency_cycles for r in aux_rows + test_rows])
    k = min(cfg.cluster_k, np.unique(latencies_all).size)
    centroids = kmeans_1d(latencies_all, k, cfg.base_seed)
    cluster_model = anchor(centroids, [(r.latency_cycles, r.attribute) for r in aux_rows])
    cluster_pred = np.empty(len(test_rows), dtype=np.int64)
    ambiguous = 0
    for i, r in enumerate(test_rows):
        try:
            cluster_pred[i] = infer_cluster(cluster_model, r.latency_cycles)
        except AmbiguousCluster:
            cluster_pred[i] = -1
            ambiguous += 1

    y_true = np.array(test_plan.attributes, dtype=np.int64)
    test_latencies = np.array([r.latency_cycles for r in test_rows])
    gbdt_report = build_report(
        "gbdt", y_true, gbdt_pred, test_latencies, dataset.k_sensitive, cfg.attack.aa_baseline
    )
    cluster_report = build_report(
        "cluster", y_true, cluster_pred, test_latencies, dataset.k_sensitive, cfg.attack.aa_baseline
    )
    try:
        mean_abs_d = mean_abs_cohens_d(test_latencies, y_true, dataset.k_sensitive)
    except Exception:
        mean_abs_d = float("nan")

    outcome = AttackOutcome(
        gbdt_report=gbdt_report,
        cluster_report=cluster_report,
        aux_rows=aux_rows,
        test_rows=test_rows,
        y_true=y_true,
        gbdt_pred=gbdt_pred,
        cluster_pred=cluster_pred,
        ambiguous_clusters=ambiguous,
        mean_abs_d=mean_abs_d,
        mean_latency=float(np.mean([rec.response.latency_cycles for rec in sink])),
        mean_energy_as_is=float(np.mean([rec.energy_as_is for rec in sink])),
        mean_energy_as_dense=float(np.mean([rec.energy_as_dense for rec in sink])),
        violation_rate=float(np.mean([rec.response.budget_violation for rec in sink])),
        n_queries=len(sink),
        records=sink if capture_records else [],
    )
    return outcome


# ---------------------------------------------------------------- pipelines


def run_gen(cfg: ExperimentConfig) -> dict:
    """Generate, split, and persist the synthetic population."""
    gen_cfg = replace(cfg.gen, seed=cfg.base_seed)
    dataset = split_dataset(generate(gen_cfg), cfg.fractions(), cfg.base_seed)
    out = cfg.path("dataset")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(dataset, str(out))
    return {
        "dataset": str(out),
        "rows": len(dataset.rows),
        "by_split": {s: len(dataset.subset(s)) for s in ("train", "aux", "test")},
    }


def _load_dataset(cfg: ExperimentConfig) -> LabeledDataset:
    return load_dataset(str(cfg.path("dataset")), cfg.gen.k_sensitive, cfg.gen.n_task_classes)


def run_train(cfg: ExperimentConfig) -> dict:
    """Train the victim on the train split and persist it."""
    dataset = _load_dataset(cfg)
    model, losses = train_victim(cfg, dataset)
    out = cfg.path("model")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, str(out))

    rows = dataset.subset("train")
    x, y = enriched_matrix(dataset, rows)
    pred = _batch_labels(model, x)
    acc = 100.0 * float(np.mean(pred == y))
    sparsity = sparsity_by_class(dataset, model, rows)
    return {
        "model": str(out),
        "train_accuracy_pct": acc,
        "first_epoch_loss": losses[0],
        "final_epoch_loss": losses[-1],
        "sparsity_by_class": sparsity,
    }


def _batch_labels(model: MLPModel, x: np.ndarray) -> np.ndarray:
    h = x
    for w in model.weights[:-1]:
        h = np.maximum(h @ w, 0.0)
    return np.argmax(h @ model.weights[-1], axis=1)


def run_attack(cfg: ExperimentConfig) -> tuple[AttackOutcome, dict]:
    """Full attack pipeline against the configured (possibly defended) service."""
    dataset = _load_dataset(cfg)
    model = load_model(str(cfg.path("model")))
    defense = resolve_defense(cfg)
    outcome = run_attack_core(cfg, dataset, model, defense, capture_records=True)

    trace_path = cfg.path("traces")
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    write_traces(str(trace_path), outcome.records, oracle=cfg.attack.trace_mode == "oracle")

    from . import reports as reports_mod

    report_dir = cfg.path("reports")
    files = reports_mod.write_attack_reports(str(report_dir), cfg, outcome)
    files["traces"] = str(trace_path)
    return outcome, files


DEFENSE_SCENARIOS = ("none", "padding", "dense", "mask")


def run_defend_eval(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    """Sweep the defense matrix with identical seeds and tabulate the effect.

    Attack metrics come from each scenario's own end-to-end attack; the cost
    columns (latency overhead, energy ratio) are measured on one fixed
    evaluation workload replayed with identical noise seeds under every
    defense, so they isolate what the defense itself costs.
    """
    dataset = _load_dataset(cfg)
    model = load_model(str(cfg.path("model")))
    spec = model.spec
    budget = worst_case_cycles(spec, cfg.timing) + 6.0 * cfg.timing.noise_sigma

    # Cost columns are measured on production-shaped traffic (each test
    # identifier's real features), not on attacker probes, so the overhead
    # and energy figures describe what the defense costs the service.
    eval_cfg = replace(cfg, attack=replace(cfg.attack, probe_mode="dataset"))
    eval_plan = plan_probes(eval_cfg, dataset, "test")
    baseline_service = build_service(cfg, dataset, model, DefenseConfig())
    baseline_records = baseline_service.run_queries(eval_plan.targets, cfg.base_seed, eval_plan.ordinals)
    baseline_eval_latency = float(np.mean([r.response.latency_cycles for r in baseline_records]))
    baseline_eval_energy = float(np.mean([r.energy_as_is for r in baseline_records]))

    table: list[dict] = []
    for scenario in DEFENSE_SCENARIOS:
        if scenario == "none":
            defense = DefenseConfig()
        elif scenario == "padding":
            defense = DefenseConfig(padding_budget_cycles=budget)
        elif scenario == "dense":
            defense = DefenseConfig(disable_zero_skip=True)
        else:
            defense = DefenseConfig(mask_confidences=True)
        outcome = run_attack_core(cfg, dataset, model, defense)

        service = build_service(cfg, dataset, model, defense)
        if scenario == "padding":
            overhead = service.defense_overhead(eval_plan.targets, cfg.base_seed, eval_plan.ordinals)
        elif scenario == "dense":
            records = service.run_queries(eval_plan.targets, cfg.base_seed, eval_plan.ordinals)
            overhead = float(np.mean([r.response.latency_cycles for r in records])) / baseline_eval_latency - 1.0
        else:
            overhead = 0.0
        eval_energy, _, _ = service.energy_report(eval_plan.targets, cfg.base_seed, eval_plan.ordinals)

        table.append(
            {
                "defense": scenario,
                "attack_accuracy_pct": outcome.gbdt_report.accuracy_pct,
                "advantage_pp": outcome.gbdt_report.advantage_pp,
                "cluster_accuracy_pct": outcome.cluster_report.accuracy_pct,
                "overhead_fraction": overhead,
                "energy_ratio": eval_energy / baseline_eval_energy,
                "mean_latency_cycles": outcome.mean_latency,
                "violation_rate": outcome.violation_rate,
                "mean_abs_cohens_d": outcome.mean_abs_d,
            }
        )

    from . import reports as reports_mod

    files = reports_mod.write_defense_reports(str(cfg.path("reports")), table)
    return table, files


def run_scaling_study(
    cfg: ExperimentConfig,
    widths: tuple[int, ...] = SCALING_WIDTHS,
    depths: tuple[int, ...] = SCALING_DEPTHS,
) -> tuple[list[dict], dict]:
    """Leakage versus model size, holding input_dim equal to width.

    Each row regenerates the population (client features fill the input not
    taken by the one-hot), trains a fresh victim, and runs the undefended
    attack.  Width rows sweep at a fixed depth, depth rows at a fixed width.
    """
    rows = [("width", w, SCALING_WIDTH_DEPTH) for w in widths]
    rows += [("depth", SCALING_DEPTH_WIDTH, d) for d in depths]
    table = []
    for sweep, width, depth in rows:
        table.append(scaling_row(cfg, width, depth, sweep))

    from . import reports as reports_mod

    files = reports_mod.write_scaling_reports(str(cfg.path("reports")), table)
    return table, files


def scaling_row(cfg: ExperimentConfig, width: int, depth: int, sweep: str = "") -> dict:
    """One scaling measurement at (width, depth) with input_dim == width."""
    if width <= cfg.gen.k_sensitive:
        raise EmptyDataset("width must exceed k_sensitive to leave room for client features")
    row_cfg = replace(
        cfg,
        gen=replace(cfg.gen, n_client_features=width - cfg.gen.k_sensitive, seed=cfg.base_seed),
        model=replace(cfg.model, width=width, depth=depth),
    )
    dataset = split_dataset(generate(row_cfg.gen), row_cfg.fractions(), row_cfg.base_seed)
    model, _ = train_victim(row_cfg, dataset)
    outcome = run_attack_core(row_cfg, dataset, model, DefenseConfig())
    spec = model.spec
    return {
        "sweep": sweep,
        "width": width,
        "depth": depth,
        "param_count": param_count(spec),
        "activation_count": activation_count(spec),
        "mean_abs_cohens_d": outcome.mean_abs_d,
        "attack_accuracy_pct": outcome.gbdt_report.accuracy_pct,
        "advantage_pp": outcome.gbdt_report.advantage_pp,
    }
