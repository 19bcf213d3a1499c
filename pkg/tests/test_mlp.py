"""Victim-network tests: counts, forward math, training, gradients, I/O."""

import numpy as np
import pytest

from skipleak.errors import DimensionMismatch, IoFailure, NonFiniteInput
from skipleak.mlp import (
    ActivationStats,
    MLPModel,
    ModelSpec,
    TrainConfig,
    activation_count,
    build_model,
    forward,
    grad_check,
    load_model,
    param_count,
    predict_label,
    save_model,
    train,
)

# Scaling-table convention: input_dim = width, 10 task classes.
# Closed forms: params = w*w + (d-1)*w^2 + 10w, activations = d*(w^2 + w).
# Two published cells disagree with their own closed forms and are asserted
# at the formula values here: (128,7) params 115,968 (not 116,352) and
# (256,4) activations 263,168 (not 263,198).
COUNT_TABLE = [
    # (width, depth, params, activations)
    (8, 4, 336, 288),
    (16, 4, 1_184, 1_088),
    (32, 4, 4_416, 4_224),
    (64, 4, 17_024, 16_640),
    (128, 2, 34_048, 33_024),
    (128, 3, 50_432, 49_536),
    (128, 4, 66_816, 66_048),
    (128, 5, 83_200, 82_560),
    (128, 6, 99_584, 99_072),
    (128, 7, 115_968, 115_584),
    (256, 4, 264_704, 263_168),
    (512, 4, 1_053_696, 1_050_624),
]


@pytest.mark.parametrize("width,depth,params,activations", COUNT_TABLE)
def test_count_table(width, depth, params, activations):
    spec = ModelSpec(width=width, depth=depth, input_dim=width, num_classes=10)
    assert param_count(spec) == params
    assert activation_count(spec) == activations


def test_param_count_matches_actual_weight_arrays():
    spec = ModelSpec(width=6, depth=3, input_dim=4, num_classes=5)
    model = build_model(spec, seed=0)
    assert sum(w.size for w in model.weights) == param_count(spec)
    shapes = [w.shape for w in model.weights]
    assert shapes == [(4, 6), (6, 6), (6, 6), (6, 5)]


def test_forward_hand_example():
    # Two ReLU units, identity output layer: input [1, 1] against columns
    # (+1,+1) and (-1,-1) gives hidden [2, 0], logits [2, 0].
    spec = ModelSpec(width=2, depth=1, input_dim=2, num_classes=2)
    model = MLPModel(
        spec,
        [np.array([[1.0, -1.0], [1.0, -1.0]]), np.eye(2)],
        seed=0,
    )
    logits, stats = forward(model, np.array([1.0, 1.0]))
    assert np.allclose(logits, [2.0, 0.0])
    assert stats.hidden_masks[0].tolist() == [True, False]
    assert stats.input_mask.tolist() == [True, True]
    assert stats.per_layer_nonzero == [1]
    assert stats.total_sparsity == 0.5
    assert predict_label(model, np.array([1.0, 1.0])) == 0


def test_predict_label_tie_breaks_low():
    spec = ModelSpec(width=2, depth=1, input_dim=2, num_classes=2)
    model = MLPModel(spec, [np.zeros((2, 2)), np.zeros((2, 2))], seed=0)
    assert predict_label(model, np.array([1.0, 2.0])) == 0  # logits all equal


def test_forward_rejects_bad_inputs():
    model = build_model(ModelSpec(width=3, depth=2, input_dim=4, num_classes=2), seed=1)
    with pytest.raises(DimensionMismatch):
        forward(model, np.zeros(5))
    with pytest.raises(NonFiniteInput):
        forward(model, np.array([1.0, np.nan, 0.0, 0.0]))


def test_activation_stats_counts_follow_masks():
    stats = ActivationStats(
        input_mask=np.array([True, False, True]),
        hidden_masks=[np.array([False, False]), np.array([True, True])],
    )
    assert stats.input_nonzero == 2
    assert stats.input_size == 3
    assert stats.per_layer_nonzero == [0, 2]
    assert stats.per_layer_size == [2, 2]
    assert stats.total_sparsity == 0.5


def test_build_model_deterministic_and_within_init_bound():
    spec = ModelSpec(width=16, depth=3, input_dim=9, num_classes=4)
    a = build_model(spec, seed=7)
    b = build_model(spec, seed=7)
    c = build_model(spec, seed=8)
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)
    assert any(not np.array_equal(wa, wc) for wa, wc in zip(a.weights, c.weights))
    for w, (fan_in, _) in zip(a.weights, spec.layer_shapes()):
        assert np.all(np.abs(w) <= 1.0 / np.sqrt(fan_in))


def test_train_is_deterministic_and_preserves_input_model():
    spec = ModelSpec(width=8, depth=2, input_dim=5, num_classes=3)
    model = build_model(spec, seed=3)
    frozen = [w.copy() for w in model.weights]
    gen = np.random.Generator(np.random.PCG64(0))
    x = gen.normal(size=(40, 5))
    y = gen.integers(0, 3, size=40)
    cfg = TrainConfig(learning_rate=0.05, epochs=4, batch_size=8, seed=11)
    m1, losses1 = train(model, x, y, cfg)
    m2, losses2 = train(model, x, y, cfg)
    assert losses1 == losses2
    for wa, wb in zip(m1.weights, m2.weights):
        assert np.array_equal(wa, wb)
    for w, f in zip(model.weights, frozen):
        assert np.array_equal(w, f)


def test_zero_learning_rate_leaves_weights_identical():
    spec = ModelSpec(width=8, depth=2, input_dim=5, num_classes=3)
    model = build_model(spec, seed=3)
    gen = np.random.Generator(np.random.PCG64(1))
    x = gen.normal(size=(30, 5))
    y = gen.integers(0, 3, size=30)
    trained, _ = train(model, x, y, TrainConfig(learning_rate=0.0, epochs=3, batch_size=10, seed=5))
    for wa, wb in zip(trained.weights, model.weights):
        assert np.array_equal(wa, wb)


def test_training_loss_decreases_on_average():
    spec = ModelSpec(width=16, depth=2, input_dim=6, num_classes=4)
    model = build_model(spec, seed=9)
    gen = np.random.Generator(np.random.PCG64(2))
    x = gen.normal(size=(120, 6))
    y = gen.integers(0, 4, size=120)
    _, losses = train(model, x, y, TrainConfig(learning_rate=0.05, epochs=10, batch_size=16, seed=4))
    assert losses[-1] < losses[0]


def test_training_fits_linearly_separable_data():
    sklearn_linear = pytest.importorskip("sklearn.linear_model")
    gen = np.random.Generator(np.random.PCG64(123))
    centers = np.array([[4.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 4.0]])
    x = np.vstack([c + 0.5 * gen.normal(size=(60, 3)) for c in centers])
    y = np.repeat([0, 1, 2], 60)
    # Independent check that the data really is (almost) linearly separable.
    oracle = sklearn_linear.LogisticRegression(max_iter=2000).fit(x, y)
    assert oracle.score(x, y) >= 0.99

    spec = ModelSpec(width=16, depth=2, input_dim=3, num_classes=3)
    model = build_model(spec, seed=0)
    trained, _ = train(model, x, y, TrainConfig(learning_rate=0.1, epochs=40, batch_size=16, seed=0))
    preds = [predict_label(trained, row) for row in x]
    assert np.mean(np.array(preds) == y) >= 0.95


def test_train_input_validation():
    spec = ModelSpec(width=4, depth=1, input_dim=3, num_classes=2)
    model = build_model(spec, seed=0)
    cfg = TrainConfig(learning_rate=0.1, epochs=1, batch_size=4, seed=0)
    with pytest.raises(DimensionMismatch):
        train(model, np.zeros((5, 4)), np.zeros(5, dtype=int), cfg)
    with pytest.raises(DimensionMismatch):
        train(model, np.zeros((5, 3)), np.array([0, 0, 0, 0, 2]), cfg)
    with pytest.raises(NonFiniteInput):
        train(model, np.full((5, 3), np.inf), np.zeros(5, dtype=int), cfg)


GRAD_CHECK_SEEDS = list(range(50))


@pytest.mark.parametrize("seed", GRAD_CHECK_SEEDS)
def test_grad_check_analytic_matches_numeric(seed):
    gen = np.random.Generator(np.random.PCG64(seed))
    spec = ModelSpec(
        width=int(gen.integers(2, 6)),
        depth=int(gen.integers(1, 4)),
        input_dim=int(gen.integers(2, 5)),
        num_classes=int(gen.integers(2, 5)),
    )
    model = build_model(spec, seed=seed)
    x = gen.normal(size=spec.input_dim)
    label = int(gen.integers(0, spec.num_classes))
    assert grad_check(model, x, label) < 1e-4


def test_grad_check_epsilon_validation():
    model = build_model(ModelSpec(width=3, depth=1, input_dim=2, num_classes=2), seed=0)
    with pytest.raises(DimensionMismatch):
        grad_check(model, np.array([1.0, 2.0]), 0, epsilon=0.0)
    with pytest.raises(DimensionMismatch):
        grad_check(model, np.array([1.0, 2.0]), 5)


def test_model_save_load_round_trip_is_exact(tmp_path):
    spec = ModelSpec(width=7, depth=3, input_dim=5, num_classes=4)
    model = build_model(spec, seed=21)
    path = tmp_path / "victim.mlp"
    save_model(model, str(path))
    back = load_model(str(path))
    assert back.spec == spec
    assert back.seed == 21
    for wa, wb in zip(model.weights, back.weights):
        assert np.array_equal(wa, wb)
    # Same logits bit-for-bit on a probe input.
    x = np.linspace(-1, 1, 5)
    la, _ = forward(model, x)
    lb, _ = forward(back, x)
    assert np.array_equal(la, lb)


def test_load_model_rejects_corrupt_files(tmp_path):
    spec = ModelSpec(width=3, depth=1, input_dim=2, num_classes=2)
    model = build_model(spec, seed=1)
    good = tmp_path / "m.mlp"
    save_model(model, str(good))

    truncated = tmp_path / "t.mlp"
    truncated.write_text("\n".join(good.read_text().splitlines()[:-2]) + "\n")
    with pytest.raises(IoFailure):
        load_model(str(truncated))

    garbled = tmp_path / "g.mlp"
    garbled.write_text(good.read_text().replace("mlp", "xxx", 1))
    with pytest.raises(IoFailure):
        load_model(str(garbled))

    with pytest.raises(IoFailure):
        load_model(str(tmp_path / "missing.mlp"))


def test_spec_validation():
    with pytest.raises(DimensionMismatch):
        ModelSpec(width=0, depth=1, input_dim=2, num_classes=2)
    with pytest.raises(DimensionMismatch):
        ModelSpec(width=2, depth=0, input_dim=2, num_classes=2)
    with pytest.raises(DimensionMismatch):
        ModelSpec(width=2, depth=1, input_dim=0, num_classes=2)
    with pytest.raises(DimensionMismatch):
        ModelSpec(width=2, depth=1, input_dim=2, num_classes=1)


def test_forward_concurrent_readers_agree(tmp_path):
    """Inference is read-only: parallel callers see identical results."""
    from concurrent.futures import ThreadPoolExecutor

    spec = ModelSpec(width=12, depth=3, input_dim=6, num_classes=4)
    model = build_model(spec, seed=13)
    gen = np.random.Generator(np.random.PCG64(99))
    xs = gen.normal(size=(64, 6))
    serial = [forward(model, x)[0] for x in xs]
    with ThreadPoolExecutor(max_workers=8) as pool:
        parallel = list(pool.map(lambda x: forward(model, x)[0], xs))
    for a, b in zip(serial, parallel):
        assert np.array_equal(a, b)
