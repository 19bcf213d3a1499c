"""Enrichment-service tests: the API surface, defenses, energy, traces."""

import numpy as np
import pytest

from skipleak import rng
from skipleak.errors import (
    AttributeOutOfRange,
    DimensionMismatch,
    EmptyEvaluationSet,
    MalformedRow,
    UnknownIdentifier,
)
from skipleak.mlp import ActivationStats, MLPModel, ModelSpec, build_model, forward
from skipleak.service import (
    APIResponse,
    DefenseConfig,
    EnrichmentService,
    FeatureStore,
    enrich,
    read_traces,
    write_traces,
)
from skipleak.timing import SkipMode, TimingModelConfig, cost, worst_case_cycles


def make_service(
    noise_sigma=0.0,
    defense=DefenseConfig(),
    width=8,
    depth=2,
    n_client=4,
    k=3,
    n_ids=9,
    seed=5,
) -> EnrichmentService:
    spec = ModelSpec(width=width, depth=depth, input_dim=n_client + k, num_classes=4)
    model = build_model(spec, seed=seed)
    store = FeatureStore(k_sensitive=k)
    for i in range(n_ids):
        store.register(str(i), i % k)
    return EnrichmentService(
        model=model,
        timing_cfg=TimingModelConfig(noise_sigma=noise_sigma),
        defense=defense,
        store=store,
    )


def test_feature_store_register_lookup_overwrite():
    store = FeatureStore(k_sensitive=4)
    store.register("alice", 2)
    assert store.lookup("alice") == 2
    store.register("alice", 3)  # latest registration wins
    assert store.lookup("alice") == 3
    assert len(store) == 1
    with pytest.raises(UnknownIdentifier):
        store.lookup("bob")
    with pytest.raises(AttributeOutOfRange):
        store.register("carol", 4)
    with pytest.raises(AttributeOutOfRange):
        store.register("carol", -1)


def test_enrich_appends_one_hot():
    out = enrich(np.array([1.5, -2.0]), attribute=1, k_sensitive=3)
    assert out.tolist() == [1.5, -2.0, 0.0, 1.0, 0.0]
    with pytest.raises(AttributeOutOfRange):
        enrich(np.zeros(2), 3, 3)
    with pytest.raises(DimensionMismatch):
        enrich(np.zeros((2, 2)), 0, 3)


def test_response_exposes_only_label_latency_violation():
    """The privacy barrier is structural: the response type has exactly the
    three public fields and nothing attribute-derived besides them."""
    fields = set(APIResponse.__dataclass_fields__)
    assert fields == {"predicted_label", "latency_cycles", "budget_violation"}


def test_query_latency_matches_cost_of_enriched_input_when_quiet():
    service = make_service(noise_sigma=0.0)
    features = np.array([0.5, -1.0, 2.0, 0.0])
    response = service.query("4", features, noise_seed=0)
    enriched = enrich(features, service.store.lookup("4"), 3)
    _, stats = forward(service.model, enriched)
    want = cost(stats, service.model.spec, service.timing_cfg)
    assert response.latency_cycles == want
    assert response.budget_violation is False


def test_query_rejects_wrong_width_and_unknown_identifier():
    service = make_service()
    with pytest.raises(DimensionMismatch):
        service.query("1", np.zeros(7), 0)  # enriched width, not client width
    with pytest.raises(UnknownIdentifier):
        service.query("unseen", np.zeros(4), 0)


def test_padding_clamps_latency_to_budget_exactly():
    budget = 1e9
    service = make_service(
        noise_sigma=250.0, defense=DefenseConfig(padding_budget_cycles=budget)
    )
    for i in range(50):
        r = service.query("1", np.full(4, 0.3), noise_seed=i)
        assert r.latency_cycles == budget
        assert r.budget_violation is False


def test_padding_violation_flag_and_ceiling_rate():
    """With budget = worst_case + 6 sigma, violations are practically absent."""
    service_plain = make_service(noise_sigma=500.0)
    budget = service_plain.worst_case_cycles() + 6 * 500.0
    service = make_service(
        noise_sigma=500.0, defense=DefenseConfig(padding_budget_cycles=budget)
    )
    violations = 0
    n = 10_000
    for i in range(n):
        r = service.query(str(i % 9), np.full(4, 0.2), noise_seed=i)
        violations += r.budget_violation
        assert r.latency_cycles >= budget
    assert violations / n < 0.001


def test_low_budget_is_reported_as_violation_not_hidden():
    service = make_service(noise_sigma=0.0, defense=DefenseConfig(padding_budget_cycles=1.0))
    r = service.query("0", np.full(4, 1.0), noise_seed=0)
    assert r.budget_violation is True
    assert r.latency_cycles > 1.0  # true latency passes through


def test_dense_defense_latency_is_input_independent():
    service = make_service(noise_sigma=0.0, defense=DefenseConfig(disable_zero_skip=True))
    gen = np.random.Generator(np.random.PCG64(0))
    latencies = {
        service.query(str(i % 9), gen.normal(size=4), noise_seed=i).latency_cycles
        for i in range(30)
    }
    assert latencies == {service.worst_case_cycles()}
    # And it equals the dense worst case of the undefended timing model.
    plain = make_service(noise_sigma=0.0)
    assert service.worst_case_cycles() == plain.worst_case_cycles()


def test_labels_unchanged_by_defenses():
    features = [np.full(4, v) for v in (-1.0, 0.0, 0.5, 2.0)]
    plain = make_service()
    padded = make_service(defense=DefenseConfig(padding_budget_cycles=1e9))
    dense = make_service(defense=DefenseConfig(disable_zero_skip=True))
    masked = make_service(defense=DefenseConfig(mask_confidences=True))
    for i, f in enumerate(features):
        labels = {
            s.query(str(i), f, noise_seed=i).predicted_label
            for s in (plain, padded, dense, masked)
        }
        assert len(labels) == 1


def test_run_queries_replay_is_bit_identical():
    service = make_service(noise_sigma=400.0)
    queries = [(str(i % 9), np.full(4, 0.1 * i)) for i in range(12)]
    a = service.run_queries(queries, base_seed=3)
    b = service.run_queries(queries, base_seed=3)
    assert [r.response.latency_cycles for r in a] == [r.response.latency_cycles for r in b]
    c = service.run_queries(queries, base_seed=4)
    assert [r.response.latency_cycles for r in a] != [r.response.latency_cycles for r in c]
    # Ordinals pin noise streams independently of position.
    d = service.run_queries(queries[6:], base_seed=3, ordinals=range(6, 12))
    assert [r.response.latency_cycles for r in d] == [
        r.response.latency_cycles for r in a[6:]
    ]


def test_defense_overhead_formula_to_1e9():
    budget = 80_000.0
    service = make_service(
        noise_sigma=300.0, defense=DefenseConfig(padding_budget_cycles=budget)
    )
    queries = [(str(i % 9), np.full(4, 0.4)) for i in range(40)]
    overhead = service.defense_overhead(queries, base_seed=9)
    plain = make_service(noise_sigma=300.0)
    records = plain.run_queries(queries, base_seed=9)
    mean_latency = np.mean([r.response.latency_cycles for r in records])
    assert overhead == pytest.approx((budget - mean_latency) / mean_latency, abs=1e-9)


def test_defense_overhead_requires_budget_and_queries():
    service = make_service()
    with pytest.raises(EmptyEvaluationSet):
        service.defense_overhead([(str(0), np.zeros(4))], base_seed=0)
    padded = make_service(defense=DefenseConfig(padding_budget_cycles=1.0))
    with pytest.raises(EmptyEvaluationSet):
        padded.defense_overhead([], base_seed=0)


def test_energy_report_padding_ratio_is_1_and_dense_ratio_grows():
    queries = [(str(i % 9), np.full(4, 0.25)) for i in range(20)]
    plain = make_service()
    padded = make_service(defense=DefenseConfig(padding_budget_cycles=1e9))
    p_as_is, p_dense, _ = padded.energy_report(queries, base_seed=2)
    n_as_is, n_dense, _ = plain.energy_report(queries, base_seed=2)
    # Padding does not change executed work: identical energy to no defense.
    assert p_as_is == n_as_is
    # Forcing dense execution raises per-op draw on every skippable MAC.
    dense = make_service(defense=DefenseConfig(disable_zero_skip=True))
    d_as_is, d_dense, d_ratio = dense.energy_report(queries, base_seed=2)
    assert d_as_is == d_dense
    assert d_as_is >= n_as_is
    assert d_ratio == 1.0


def test_energy_ratio_is_1p25_on_fully_sparse_workload():
    """A model whose hidden layers all die gives the exact per-op ratio."""
    spec = ModelSpec(width=4, depth=2, input_dim=5, num_classes=3)
    model = build_model(spec, seed=0)
    for w in model.weights[:-1]:
        w[:] = -np.abs(w)  # every hidden pre-activation is <= 0
    store = FeatureStore(k_sensitive=2)
    store.register("x", 0)
    service = EnrichmentService(
        model=model, timing_cfg=TimingModelConfig(noise_sigma=0.0),
        defense=DefenseConfig(), store=store,
    )
    as_is, dense, ratio = service.energy_report([("x", np.ones(3))], base_seed=0)
    assert ratio == 1.25
    assert dense == as_is * 1.25


def test_trace_round_trip_and_oracle_flag(tmp_path):
    service = make_service(noise_sigma=100.0)
    queries = [(str(i % 9), np.full(4, 0.1 * i)) for i in range(8)]
    records = service.run_queries(queries, base_seed=1)

    oracle_path = tmp_path / "oracle.csv"
    write_traces(str(oracle_path), records, oracle=True)
    rows = read_traces(str(oracle_path))
    assert len(rows) == 8
    for rec, row in zip(records, rows):
        assert row["identifier"] == rec.identifier
        assert row["latency_cycles"] == rec.response.latency_cycles
        assert row["predicted_label"] == rec.response.predicted_label
        assert row["attribute_ground_truth"] == rec.attribute
        assert np.array_equal(row["features"], rec.client_features)

    attack_path = tmp_path / "attack.csv"
    write_traces(str(attack_path), records, oracle=False)
    for row in read_traces(str(attack_path)):
        assert row["attribute_ground_truth"] is None


def test_trace_write_is_byte_stable(tmp_path):
    service = make_service(noise_sigma=100.0)
    records = service.run_queries([("1", np.full(4, 0.5))] * 5, base_seed=7)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_traces(str(a), records, oracle=True)
    write_traces(str(b), records, oracle=True)
    assert a.read_bytes() == b.read_bytes()


def test_read_traces_rejects_malformed(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("nope,nope\n1,2\n")
    with pytest.raises(MalformedRow):
        read_traces(str(bad))


def test_service_requires_room_for_one_hot():
    spec = ModelSpec(width=4, depth=1, input_dim=3, num_classes=2)
    model = build_model(spec, seed=0)
    store = FeatureStore(k_sensitive=3)
    with pytest.raises(DimensionMismatch):
        EnrichmentService(model=model, timing_cfg=TimingModelConfig(), defense=DefenseConfig(), store=store)


def test_defense_config_validation():
    with pytest.raises(DimensionMismatch):
        DefenseConfig(padding_budget_cycles=-5.0)
