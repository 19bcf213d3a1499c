"""Cycle and energy model of a zero-skipping matrix accelerator.

The accelerator spends ``cycles_per_mac`` on every multiply-accumulate unless
the consumed activation is exactly zero, in which case zero-skipping hardware
reduces the charge to ``cycles_skip_per_mac``.  Skipping applies only to MACs
that consume *hidden* activations: the input layer is always executed densely
because raw inputs bypass the sparsity predictor.  Three execution modes are
modelled:

* ``element``: each zero activation is skipped individually,
* ``tile``: activations are grouped into contiguous blocks of ``tile_rows``
  and a block executes densely if any entry is nonzero,
* ``dense``: skipping disabled, every MAC pays the full charge.

Energy is charged per MAC operand: a MAC consuming a nonzero value draws
``energy_nonzero_per_op``, a MAC consuming a zero draws ``energy_zero_per_op``
(skipped or not, the operand still transits the array).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DimensionMismatch, InconsistentStats
from .mlp import ActivationStats, ModelSpec
from . import rng


class SkipMode(enum.Enum):
    ELEMENT = "element"
    TILE = "tile"
    DENSE = "dense"


@dataclass(frozen=True)
class TimingModelConfig:
    mode: SkipMode = SkipMode.ELEMENT
    tile_rows: int = 4
    cycles_per_mac: float = 1.0
    cycles_skip_per_mac: float = 0.0
    cycles_base_per_layer: float = 1000.0
    noise_sigma: float = 500.0
    energy_nonzero_per_op: float = 15.0
    energy_zero_per_op: float = 12.0

    def __post_init__(self) -> None:
        if self.cycles_per_mac <= 0:
            raise DimensionMismatch("cycles_per_mac must be > 0")
        if not 0 <= self.cycles_skip_per_mac <= self.cycles_per_mac:
            raise DimensionMismatch("cycles_skip_per_mac must lie in [0, cycles_per_mac]")
        if self.cycles_base_per_layer < 0 or self.noise_sigma < 0:
            raise DimensionMismatch("base cycles and noise_sigma must be >= 0")
        if self.tile_rows < 1:
            raise DimensionMismatch("tile_rows must be >= 1")
        if self.energy_nonzero_per_op < 0 or self.energy_zero_per_op < 0:
            raise DimensionMismatch("per-op energies must be >= 0")


def _consumer_cols(spec: ModelSpec) -> list[int]:
    """Output width of the matrix consuming each hidden layer's activations."""
    return [spec.width] * (spec.depth - 1) + [spec.num_classes]


def cost(stats: ActivationStats, spec: ModelSpec, cfg: TimingModelConfig) -> float:
    """True cycle count of one inference under the configured skip mode."""
    stats.validate_against(spec)
    total = cfg.cycles_base_per_layer * (spec.depth + 1)
    # Input layer: raw inputs are never skipped.
    total += spec.input_dim * spec.width * cfg.cycles_per_mac

    for mask, cols in zip(stats.hidden_masks, _consumer_cols(spec)):
        rows = mask.size
        if cfg.mode is SkipMode.DENSE:
            dense_rows = rows
        elif cfg.mode is SkipMode.ELEMENT:
            dense_rows = int(mask.sum())
        else:
            dense_rows = 0
            for start in range(0, rows, cfg.tile_rows):
                block = mask[start : start + cfg.tile_rows]
                if block.any():
                    dense_rows += block.size
        skipped_rows = rows - dense_rows
        total += cols * (dense_rows * cfg.cycles_per_mac + skipped_rows * cfg.cycles_skip_per_mac)
    return float(total)


def worst_case_cycles(spec: ModelSpec, cfg: TimingModelConfig) -> float:
    """Cycle count with every activation nonzero; equals dense-mode cost."""
    macs = spec.input_dim * spec.width
    macs += (spec.depth - 1) * spec.width * spec.width
    macs += spec.width * spec.num_classes
    return float(macs * cfg.cycles_per_mac + cfg.cycles_base_per_layer * (spec.depth + 1))


def energy(stats: ActivationStats, spec: ModelSpec, cfg: TimingModelConfig) -> float:
    """Total energy of one inference, charged per MAC operand occupancy.

    Mode-independent: zero-skipping saves cycles, not operand energy.
    """
    stats.validate_against(spec)
    e_nz, e_z = cfg.energy_nonzero_per_op, cfg.energy_zero_per_op
    nz = stats.input_nonzero
    total = spec.width * (nz * e_nz + (spec.input_dim - nz) * e_z)
    for count, size, cols in zip(stats.per_layer_nonzero, stats.per_layer_size, _consumer_cols(spec)):
        total += cols * (count * e_nz + (size - count) * e_z)
    return float(total)


def skippable_energy(stats: ActivationStats, spec: ModelSpec, cfg: TimingModelConfig, *, as_dense: bool) -> float:
    """Energy of the zero-skip-governed work only (MACs consuming hidden
    activations).  ``as_dense`` charges every such MAC at the nonzero rate,
    modelling a part with skipping fused off."""
    stats.validate_against(spec)
    e_nz, e_z = cfg.energy_nonzero_per_op, cfg.energy_zero_per_op
    total = 0.0
    for count, size, cols in zip(stats.per_layer_nonzero, stats.per_layer_size, _consumer_cols(spec)):
        if as_dense:
            total += cols * size * e_nz
        else:
            total += cols * (count * e_nz + (size - count) * e_z)
    return float(total)


def observe(cycles_true: float, cfg: TimingModelConfig, noise_seed: int | list[int]) -> float:
    """Measured latency: true cycles plus clamped Gaussian measurement noise."""
    if not math.isfinite(cycles_true) or cycles_true < 0:
        raise InconsistentStats(f"cycles_true must be finite and >= 0, got {cycles_true!r}")
    if cfg.noise_sigma == 0:
        return float(cycles_true)
    gen = rng.generator_from(noise_seed)
    return float(max(0.0, cycles_true + gen.normal(0.0, cfg.noise_sigma)))
