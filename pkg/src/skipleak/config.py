"""Experiment configuration: flat INI-style sections with strict validation.

Unknown sections or keys are rejected by their full dotted path so typos
cannot silently fall back to defaults.  Every key has a default, so an empty
file (or no file at all) is a valid, fully reproducible experiment.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .datagen import GenConfig
from .errors import ConfigError
from .gbdt import GBDTConfig
from .service import DefenseConfig
from .timing import SkipMode, TimingModelConfig


@dataclass(frozen=True)
class ModelSectionConfig:
    width: int = 128
    depth: int = 4
    learning_rate: float = 0.08
    epochs: int = 40
    batch_size: int = 32

    def __post_init__(self) -> None:
        if self.width < 1 or self.depth < 1:
            raise ConfigError("model.width and model.depth must be >= 1")
        if self.learning_rate < 0:
            raise ConfigError("model.learning_rate must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("model.epochs and model.batch_size must be >= 1")


@dataclass(frozen=True)
class AttackSectionConfig:
    repetitions: int = 101
    cluster_k: int = 0  # 0 means "use k_sensitive"
    n_trees: int = 300
    max_depth: int = 1
    learning_rate: float = 0.1
    aa_baseline: str = "uniform"  # uniform | empirical
    probe_mode: str = "population"  # population | dataset
    probe_sigma: float = 0.03
    histogram_bins: int = 40
    trace_mode: str = "attack"  # attack | oracle

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ConfigError("attack.repetitions must be >= 1")
        if self.cluster_k < 0:
            raise ConfigError("attack.cluster_k must be >= 0")
        if self.n_trees < 1 or self.max_depth < 1:
            raise ConfigError("attack.n_trees and attack.max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("attack.learning_rate must lie in (0, 1]")
        if self.probe_sigma < 0:
            raise ConfigError("attack.probe_sigma must be >= 0")
        if self.histogram_bins < 1:
            raise ConfigError("attack.histogram_bins must be >= 1")

    def gbdt_config(self) -> GBDTConfig:
        return GBDTConfig(n_trees=self.n_trees, max_depth=self.max_depth, learning_rate=self.learning_rate)


@dataclass(frozen=True)
class PathsConfig:
    dataset: str = "dataset.csv"
    model: str = "victim.mlp"
    traces: str = "traces.csv"
    reports: str = "reports"


@dataclass(frozen=True)
class ExperimentConfig:
    base_seed: int = 17
    gen: GenConfig = field(default_factory=GenConfig)
    train_frac: float = 0.4
    aux_frac: float = 0.35
    test_frac: float = 0.25
    model: ModelSectionConfig = field(default_factory=ModelSectionConfig)
    timing: TimingModelConfig = field(default_factory=TimingModelConfig)
    padding_budget: str = "none"  # none | auto | numeric literal
    disable_zero_skip: bool = False
    mask_confidences: bool = False
    attack: AttackSectionConfig = field(default_factory=AttackSectionConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    out_dir: str = "out"

    @property
    def cluster_k(self) -> int:
        return self.attack.cluster_k if self.attack.cluster_k > 0 else self.gen.k_sensitive

    def fractions(self) -> tuple[float, float, float]:
        return (self.train_frac, self.aux_frac, self.test_frac)

    def defense_config(self, worst_case: float, noise_sigma: float) -> DefenseConfig:
        """Resolve the padding budget ("auto" pads to worst case + 6 sigma)."""
        if self.padding_budget == "none":
            budget = None
        elif self.padding_budget == "auto":
            budget = worst_case + 6.0 * noise_sigma
        else:
            budget = float(self.padding_budget)
        return DefenseConfig(
            padding_budget_cycles=budget,
            disable_zero_skip=self.disable_zero_skip,
            mask_confidences=self.mask_confidences,
        )

    def path(self, name: str) -> Path:
        rel = getattr(self.paths, name)
        return Path(self.out_dir) / rel


def _parse_bool(raw: str, where: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{where}: expected a boolean, got {raw!r}")


def _parse_int(raw: str, where: str) -> int:
    try:
        return int(raw.strip())
    except ValueError:
        raise ConfigError(f"{where}: expected an integer, got {raw!r}") from None


def _parse_float(raw: str, where: str) -> float:
    try:
        return float(raw.strip())
    except ValueError:
        raise ConfigError(f"{where}: expected a number, got {raw!r}") from None


def _parse_choice(raw: str, where: str, choices: tuple[str, ...]) -> str:
    value = raw.strip().lower()
    if value not in choices:
        raise ConfigError(f"{where}: expected one of {', '.join(choices)}, got {raw!r}")
    return value


# section -> key -> parser tag. Tags: int, float, bool, or a tuple of choices.
_SCHEMA: dict[str, dict[str, object]] = {
    "experiment": {"base_seed": "int"},
    "gen": {
        "k_sensitive": "int",
        "n_client_features": "int",
        "n_task_classes": "int",
        "samples_per_class": "int",
        "separation": "float",
        "feature_noise": "float",
        "train_frac": "float",
        "aux_frac": "float",
        "test_frac": "float",
    },
    "model": {
        "width": "int",
        "depth": "int",
        "learning_rate": "float",
        "epochs": "int",
        "batch_size": "int",
    },
    "timing": {
        "mode": ("element", "tile", "dense"),
        "tile_rows": "int",
        "cycles_per_mac": "float",
        "cycles_skip_per_mac": "float",
        "cycles_base_per_layer": "float",
        "noise_sigma": "float",
        "energy_nonzero_per_op": "float",
        "energy_zero_per_op": "float",
    },
    "defense": {
        "padding_budget_cycles": "budget",
        "disable_zero_skip": "bool",
        "mask_confidences": "bool",
    },
    "attack": {
        "repetitions": "int",
        "cluster_k": "int",
        "n_trees": "int",
        "max_depth": "int",
        "learning_rate": "float",
        "aa_baseline": ("uniform", "empirical"),
        "probe_mode": ("population", "dataset"),
        "probe_sigma": "float",
        "histogram_bins": "int",
        "trace_mode": ("attack", "oracle"),
    },
    "paths": {"dataset": "str", "model": "str", "traces": "str", "reports": "str"},
}


def _parse_value(tag: object, raw: str, where: str) -> object:
    if tag == "int":
        return _parse_int(raw, where)
    if tag == "float":
        return _parse_float(raw, where)
    if tag == "bool":
        return _parse_bool(raw, where)
    if tag == "str":
        return raw.strip()
    if tag == "budget":
        value = raw.strip().lower()
        if value in ("none", "auto"):
            return value
        _parse_float(raw, where)
        return raw.strip()
    if isinstance(tag, tuple):
        return _parse_choice(raw, where, tag)
    raise AssertionError(f"unhandled schema tag {tag!r}")


def parse_config_text(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc

    if parser.defaults():
        raise ConfigError("unknown section [DEFAULT]")
    values: dict[str, dict[str, object]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            values[section][key] = _parse_value(_SCHEMA[section][key], raw, f"{section}.{key}")
    return _assemble(values)


def _assemble(values: dict[str, dict[str, object]]) -> ExperimentConfig:
    def sec(name: str) -> dict[str, object]:
        return values.get(name, {})

    gen_raw = dict(sec("gen"))
    # Fractions live in [gen] for the user but on ExperimentConfig internally;
    # pass through only what the file set so dataclass defaults stay canonical.
    fracs = {
        key: gen_raw.pop(key) for key in ("train_frac", "aux_frac", "test_frac") if key in gen_raw
    }
    try:
        gen = GenConfig(**gen_raw)
        model = ModelSectionConfig(**sec("model"))
        timing_raw = dict(sec("timing"))
        if "mode" in timing_raw:
            timing_raw["mode"] = SkipMode(timing_raw["mode"])
        timing = TimingModelConfig(**timing_raw)
        attack = AttackSectionConfig(**sec("attack"))
        paths = PathsConfig(**sec("paths"))
    except Exception as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc

    defense_raw = sec("defense")
    return ExperimentConfig(
        base_seed=int(sec("experiment").get("base_seed", 17)),
        gen=gen,
        model=model,
        timing=timing,
        padding_budget=str(defense_raw.get("padding_budget_cycles", "none")),
        disable_zero_skip=bool(defense_raw.get("disable_zero_skip", False)),
        mask_confidences=bool(defense_raw.get("mask_confidences", False)),
        attack=attack,
        paths=paths,
        **fracs,
    )


def load_config(path: str | None, seed_override: int | None = None, out_override: str | None = None) -> ExperimentConfig:
    """Load a config file; None means all defaults.  CLI flags override."""
    if path is None:
        cfg = ExperimentConfig()
    else:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        cfg = parse_config_text(text)
    if seed_override is not None:
        cfg = replace(cfg, base_seed=int(seed_override))
    if out_override is not None:
        cfg = replace(cfg, out_dir=str(out_override))
    return cfg
