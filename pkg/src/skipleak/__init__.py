"""skipleak: a desk-scale lab for timing leakage in zero-skipping accelerators.

The package simulates a label-only inference API whose backend enriches each
request with a hidden per-identifier attribute, models the cycle cost of a
zero-skipping matrix engine, mounts attribute-inference attacks on the
resulting latency side channel, and evaluates padding and dense-execution
defenses.
"""

from .mlp import (
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
    save_model,
    train,
)
from .timing import SkipMode, TimingModelConfig, cost, energy, observe, worst_case_cycles
from .service import (
    APIResponse,
    DefenseConfig,
    EnrichmentService,
    FeatureStore,
    enrich,
    read_traces,
    write_traces,
)
from .attack import (
    AttackRow,
    ClusterModel,
    anchor,
    infer_cluster,
    kmeans_1d,
    profile,
)
from .gbdt import GBDTConfig, GBDTModel, gbdt_fit, gbdt_predict
from .metrics import (
    LeakageReport,
    accuracy,
    adversarial_advantage,
    build_report,
    cohens_d,
    cohens_d_matrix,
    weighted_f1,
)
from .datagen import GenConfig, LabeledDataset, generate, load_dataset, save_dataset, split_dataset
from .config import ExperimentConfig, load_config, parse_config_text
from .errors import SkipleakError

__version__ = "0.1.0"
