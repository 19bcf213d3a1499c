"""Command-line front end.

Exit codes: 0 on success, 2 for configuration errors, 3 for runtime failures.
Failures print a single machine-parsable line to stderr:
``error kind=<ExceptionName> msg=<description>``.
"""

from __future__ import annotations

import argparse
import sys

from .config import ExperimentConfig, load_config
from .errors import ConfigError, SkipleakError
from . import experiment, reports

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _add_common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="experiment config file (INI sections); defaults apply if omitted")
    sub.add_argument("--seed", type=int, help="override experiment.base_seed")
    sub.add_argument("--out", help="output directory (default: out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skipleak",
        description="Timing-leakage lab for zero-skipping inference accelerators",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("gen", "generate the synthetic population CSV"),
        ("train", "train the victim model on the train split"),
        ("attack", "profile the service and run the attribute-inference attacks"),
        ("defend-eval", "compare defenses on identical seeds"),
        ("scaling-study", "leakage vs model width and depth"),
    ):
        _add_common_flags(sub.add_parser(name, help=help_text))
    return parser


def cmd_gen(cfg: ExperimentConfig) -> None:
    summary = experiment.run_gen(cfg)
    print(f"wrote {summary['dataset']}: {summary['rows']} rows {summary['by_split']}")


def cmd_train(cfg: ExperimentConfig) -> None:
    summary = experiment.run_train(cfg)
    files = reports.write_sparsity_report(str(cfg.path("reports")), summary["sparsity_by_class"])
    print(f"wrote {summary['model']}")
    print(f"train accuracy: {summary['train_accuracy_pct']:.2f}%")
    for c, s in summary["sparsity_by_class"].items():
        print(f"mean sparsity class {c}: {s:.4f}")
    print(f"wrote {files['sparsity_by_class']}")


def cmd_attack(cfg: ExperimentConfig) -> None:
    outcome, files = experiment.run_attack(cfg)
    for report in (outcome.gbdt_report, outcome.cluster_report):
        print(
            f"{report.method}: accuracy {report.accuracy_pct:.2f}% "
            f"({report.baseline_kind} baseline {report.baseline_pct:.2f}%, "
            f"advantage {report.advantage_pp:+.2f} pp)"
        )
    print(f"mean |cohen d|: {outcome.mean_abs_d:.3f}")
    for key in ("report", "per_class", "cohens_d_matrix", "traces", "latency_hist_figure"):
        print(f"wrote {files[key]}")


def cmd_defend_eval(cfg: ExperimentConfig) -> None:
    table, files = experiment.run_defend_eval(cfg)
    for entry in table:
        print(
            f"{entry['defense']:>8}: accuracy {entry['attack_accuracy_pct']:6.2f}% "
            f"advantage {entry['advantage_pp']:+7.2f} pp "
            f"overhead {entry['overhead_fraction']:+.4f} "
            f"energy x{entry['energy_ratio']:.4f}"
        )
    print(f"wrote {files['defense_comparison']}")
    print(f"wrote {files['defense_figure']}")


def cmd_scaling_study(cfg: ExperimentConfig) -> None:
    table, files = experiment.run_scaling_study(cfg)
    for entry in table:
        print(
            f"{entry['sweep']:>5} w={entry['width']:<4} d={entry['depth']}: "
            f"params {entry['param_count']:>9} activations {entry['activation_count']:>9} "
            f"|d| {entry['mean_abs_cohens_d']:8.3f} accuracy {entry['attack_accuracy_pct']:6.2f}%"
        )
    print(f"wrote {files['scaling_study']}")
    print(f"wrote {files['scaling_figure']}")


_COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "attack": cmd_attack,
    "defend-eval": cmd_defend_eval,
    "scaling-study": cmd_scaling_study,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed, args.out)
    except ConfigError as exc:
        print(f"error kind=ConfigError msg={exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error kind=ConfigError msg={exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SkipleakError as exc:
        print(f"error kind={type(exc).__name__} msg={exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
