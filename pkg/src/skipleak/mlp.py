"""Bias-free multilayer perceptron with exact activation-sparsity accounting.

The victim model is deliberately small and transparent: ``depth`` hidden
layers of equal ``width``, ReLU activations, no biases, float64 weights, and a
linear output layer.  Every forward pass reports exactly which post-ReLU
activations were zero, because the timing model charges work per consumed
activation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyDataset,
    InconsistentStats,
    IoFailure,
    LengthMismatch,
    NonFiniteInput,
)
from . import rng

MODEL_MAGIC = "mlp"
MODEL_VERSION = "v1"


@dataclass(frozen=True)
class ModelSpec:
    """Geometry of a model: sizes only, no weights."""

    width: int
    depth: int
    input_dim: int
    num_classes: int

    def __post_init__(self) -> None:
        for name in ("width", "depth", "input_dim", "num_classes"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise DimensionMismatch(f"{name} must be a positive integer, got {v!r}")
        if self.num_classes < 2:
            raise DimensionMismatch("num_classes must be >= 2")

    def layer_shapes(self) -> list[tuple[int, int]]:
        """Shapes of the depth+1 weight matrices, in forward order."""
        shapes = [(self.input_dim, self.width)]
        shapes += [(self.width, self.width)] * (self.depth - 1)
        shapes.append((self.width, self.num_classes))
        return shapes


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    epochs: int
    batch_size: int
    seed: int

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise DimensionMismatch("learning_rate must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise DimensionMismatch("epochs and batch_size must be >= 1")


@dataclass
class MLPModel:
    spec: ModelSpec
    weights: list[np.ndarray]
    seed: int

    def copy(self) -> "MLPModel":
        return MLPModel(self.spec, [w.copy() for w in self.weights], self.seed)


@dataclass
class ActivationStats:
    """Exact occupancy record of one forward pass.

    ``input_mask`` / ``hidden_masks`` mark strictly nonzero entries.  Counts
    are derived from the masks, so the two views can never disagree.  The
    masks matter: tile-granular skipping and input-layer energy both depend on
    where the zeros sit, not just how many there are.
    """

    input_mask: np.ndarray
    hidden_masks: list[np.ndarray]
    per_layer_nonzero: list[int] = field(init=False)
    per_layer_size: list[int] = field(init=False)
    input_nonzero: int = field(init=False)
    input_size: int = field(init=False)

    def __post_init__(self) -> None:
        self.input_mask = np.asarray(self.input_mask, dtype=bool)
        self.hidden_masks = [np.asarray(m, dtype=bool) for m in self.hidden_masks]
        self.per_layer_nonzero = [int(m.sum()) for m in self.hidden_masks]
        self.per_layer_size = [int(m.size) for m in self.hidden_masks]
        self.input_nonzero = int(self.input_mask.sum())
        self.input_size = int(self.input_mask.size)

    @property
    def total_sparsity(self) -> float:
        """Fraction of hidden activations that are exactly zero."""
        total = sum(self.per_layer_size)
        if total == 0:
            return 0.0
        return 1.0 - sum(self.per_layer_nonzero) / total

    def validate_against(self, spec: ModelSpec) -> None:
        if self.input_size != spec.input_dim:
            raise InconsistentStats(
                f"input occupancy has {self.input_size} entries, model expects {spec.input_dim}"
            )
        if len(self.hidden_masks) != spec.depth:
            raise InconsistentStats(
                f"stats cover {len(self.hidden_masks)} hidden layers, model has {spec.depth}"
            )
        for i, size in enumerate(self.per_layer_size):
            if size != spec.width:
                raise InconsistentStats(f"hidden layer {i} has {size} entries, model width is {spec.width}")


def param_count(spec: ModelSpec) -> int:
    """Number of weights: input_dim*w + (depth-1)*w^2 + w*num_classes."""
    w = spec.width
    return spec.input_dim * w + (spec.depth - 1) * w * w + w * spec.num_classes


def activation_count(spec: ModelSpec) -> int:
    """Activation-site count used by the scaling study: depth*(w^2 + w)."""
    w = spec.width
    return spec.depth * (w * w + w)


def build_model(spec: ModelSpec, seed: int) -> MLPModel:
    """Initialise weights uniformly in +-1/sqrt(fan_in) from a PCG64 stream."""
    gen = rng.substream(seed, rng.MODEL_INIT)
    weights = []
    for fan_in, fan_out in spec.layer_shapes():
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(gen.uniform(-bound, bound, size=(fan_in, fan_out)).astype(np.float64))
    return MLPModel(spec, weights, int(seed))


def _check_input(model: MLPModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.spec.input_dim:
        raise DimensionMismatch(
            f"input has shape {x.shape}, model expects ({model.spec.input_dim},)"
        )
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("input vector contains NaN or infinity")
    return x


def forward(model: MLPModel, x: np.ndarray) -> tuple[np.ndarray, ActivationStats]:
    """Run one input through the network.

    Returns the raw logits and the exact per-layer activation occupancy.
    """
    x = _check_input(model, x)
    h = x
    masks: list[np.ndarray] = []
    for w in model.weights[:-1]:
        h = np.maximum(h @ w, 0.0)
        masks.append(h > 0.0)
    logits = h @ model.weights[-1]
    return logits, ActivationStats(input_mask=x != 0.0, hidden_masks=masks)


def predict_label(model: MLPModel, x: np.ndarray) -> int:
    """Argmax class of the logits; ties resolve to the lowest index."""
    logits, _ = forward(model, x)
    return int(np.argmax(logits))


def _forward_batch(model: MLPModel, x: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Hidden activations and logits for a batch. Internal, no validation."""
    hs = []
    h = x
    for w in model.weights[:-1]:
        h = np.maximum(h @ w, 0.0)
        hs.append(h)
    return hs, h @ model.weights[-1]


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _batch_loss_and_grads(
    model: MLPModel, x: np.ndarray, y: np.ndarray
) -> tuple[float, list[np.ndarray]]:
    n = x.shape[0]
    hs, logits = _forward_batch(model, x)
    z = logits - logits.max(axis=1, keepdims=True)
    log_softmax = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = float(-log_softmax[np.arange(n), y].mean())

    g = _softmax(logits)
    g[np.arange(n), y] -= 1.0
    g /= n

    grads = [np.empty(0)] * len(model.weights)
    grads[-1] = hs[-1].T @ g
    upstream = g @ model.weights[-1].T
    for i in range(len(model.weights) - 2, -1, -1):
        dz = upstream * (hs[i] > 0.0)
        below = x if i == 0 else hs[i - 1]
        grads[i] = below.T @ dz
        upstream = dz @ model.weights[i].T
    return loss, grads


def train(
    model: MLPModel, x: np.ndarray, y: np.ndarray, cfg: TrainConfig
) -> tuple[MLPModel, list[float]]:
    """Mini-batch SGD on softmax cross-entropy.

    The input model is left untouched; a trained copy is returned together
    with the mean loss of each epoch.  Shuffling is driven by ``cfg.seed``
    alone, so identical calls return identical weights.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or x.shape[1] != model.spec.input_dim:
        raise DimensionMismatch(f"training features have shape {x.shape}")
    if y.shape != (x.shape[0],):
        raise LengthMismatch("labels do not align with feature rows")
    if x.shape[0] == 0:
        raise EmptyDataset("cannot train on zero rows")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("training features contain NaN or infinity")
    if np.any(y < 0) or np.any(y >= model.spec.num_classes):
        raise DimensionMismatch("label outside [0, num_classes)")

    out = model.copy()
    shuffle = rng.substream(cfg.seed, rng.TRAIN_SHUFFLE)
    n = x.shape[0]
    epoch_losses: list[float] = []
    for _ in range(cfg.epochs):
        order = shuffle.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = _batch_loss_and_grads(out, x[idx], y[idx])
            total += loss * idx.size
            if cfg.learning_rate != 0.0:
                for w, g in zip(out.weights, grads):
                    w -= cfg.learning_rate * g
        epoch_losses.append(total / n)
    return out, epoch_losses


def grad_check(model: MLPModel, x: np.ndarray, label: int, epsilon: float = 1e-4) -> float:
    """Max relative error between analytic and central-difference gradients."""
    if not 0.0 < epsilon <= 1e-2:
        raise DimensionMismatch("epsilon must lie in (0, 1e-2]")
    x = _check_input(model, x)
    label = int(label)
    if not 0 <= label < model.spec.num_classes:
        raise DimensionMismatch("label outside [0, num_classes)")

    xb = x[None, :]
    yb = np.array([label])
    _, grads = _batch_loss_and_grads(model, xb, yb)

    def loss_at() -> float:
        _, logits = _forward_batch(model, xb)
        z = logits[0] - logits[0].max()
        return float(np.log(np.exp(z).sum()) - z[label])

    worst = 0.0
    for w, g in zip(model.weights, grads):
        it = np.nditer(w, flags=["multi_index"])
        for _ in it:
            ij = it.multi_index
            orig = w[ij]
            w[ij] = orig + epsilon
            up = loss_at()
            w[ij] = orig - epsilon
            down = loss_at()
            w[ij] = orig
            numeric = (up - down) / (2.0 * epsilon)
            analytic = g[ij]
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst


def save_model(model: MLPModel, path: str) -> None:
    """Write a model as plain text: a header line then one weight per line."""
    s = model.spec
    lines = [f"{MODEL_MAGIC} {MODEL_VERSION} {s.width} {s.depth} {s.input_dim} {s.num_classes} {model.seed}"]
    for w in model.weights:
        lines.extend(repr(float(v)) for v in w.ravel())
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write model file {path}: {exc}") from exc


def load_model(path: str) -> MLPModel:
    """Read a model written by :func:`save_model`; exact round trip."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            header = fh.readline().split()
            if len(header) != 7 or header[0] != MODEL_MAGIC or header[1] != MODEL_VERSION:
                raise IoFailure(f"{path}: not a {MODEL_MAGIC} {MODEL_VERSION} model file")
            width, depth, input_dim, num_classes, seed = map(int, header[2:])
            spec = ModelSpec(width, depth, input_dim, num_classes)
            values = [float(line) for line in fh if line.strip()]
    except OSError as exc:
        raise IoFailure(f"cannot read model file {path}: {exc}") from exc
    except ValueError as exc:
        raise IoFailure(f"{path}: malformed weight value: {exc}") from exc

    expected = param_count(spec)
    if len(values) != expected:
        raise IoFailure(f"{path}: expected {expected} weights, found {len(values)}")
    weights = []
    flat = np.asarray(values, dtype=np.float64)
    pos = 0
    for shape in spec.layer_shapes():
        size = shape[0] * shape[1]
        weights.append(flat[pos : pos + size].reshape(shape).copy())
        pos += size
    return MLPModel(spec, weights, seed)
