"""Report rendering: delimited outputs plus matplotlib figures beside them.

CSV files are the machine-readable artifacts (and the reproducibility
surface: reruns must be byte-identical); every report also renders a PNG so a
run can be eyeballed without further tooling.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import IoFailure
from .experiment import AttackOutcome
from .config import ExperimentConfig


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str | Path, header: list[str], rows: list[list]) -> None:
    try:
        with open(path, "w", encoding="ascii", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise IoFailure(f"cannot write report {path}: {exc}") from exc


def latency_histograms(
    latencies: np.ndarray, groups: np.ndarray, k: int, bins: int
) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Shared-bin histograms of latency per sensitive class.

    Returns bin centers and one count vector per class; each class's counts
    sum to its row count.
    """
    lo, hi = float(latencies.min()), float(latencies.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    centers = (edges[:-1] + edges[1:]) / 2.0
    counts = {}
    for c in range(k):
        counts[c], _ = np.histogram(latencies[groups == c], bins=edges)
    return centers, counts


def write_attack_reports(report_dir: str, cfg: ExperimentConfig, outcome: AttackOutcome) -> dict:
    out = Path(report_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}

    header = [
        "method",
        "accuracy_pct",
        "weighted_f1_pct",
        "baseline_kind",
        "baseline_pct",
        "advantage_pp",
        "n_eval",
        "k_sensitive",
        "mean_abs_cohens_d",
    ]
    rows = []
    for report in (outcome.gbdt_report, outcome.cluster_report):
        rows.append(
            [
                report.method,
                report.accuracy_pct,
                report.weighted_f1_pct,
                report.baseline_kind,
                report.baseline_pct,
                report.advantage_pp,
                report.n_eval,
                report.k_sensitive,
                outcome.mean_abs_d,
            ]
        )
    path = out / "report.csv"
    write_csv(path, header, rows)
    files["report"] = str(path)

    per_class_rows = []
    for c, row in outcome.gbdt_report.per_class.items():
        per_class_rows.append(
            [c, row["support"], row["precision"], row["recall"], row["f1"]]
        )
    path = out / "per_class.csv"
    write_csv(path, ["class", "support", "precision", "recall", "f1"], per_class_rows)
    files["per_class"] = str(path)

    k = outcome.gbdt_report.k_sensitive
    d = outcome.gbdt_report.cohens_d
    path = out / "cohens_d_matrix.csv"
    write_csv(
        path,
        ["class"] + [f"c{j}" for j in range(k)],
        [[i] + [d[i, j] for j in range(k)] for i in range(k)],
    )
    files["cohens_d_matrix"] = str(path)

    latencies = np.array([r.latency_cycles for r in outcome.test_rows])
    centers, counts = latency_histograms(latencies, outcome.y_true, k, cfg.attack.histogram_bins)
    for c in range(k):
        path = out / f"latency_hist_class{c}.csv"
        write_csv(path, ["bin_center", "count"], [[centers[i], int(counts[c][i])] for i in range(centers.size)])
        files[f"latency_hist_class{c}"] = str(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    for c in range(k):
        ax.plot(centers, counts[c], drawstyle="steps-mid", label=f"class {c}")
    ax.set_xlabel("median latency (cycles)")
    ax.set_ylabel("identifiers")
    ax.set_title("Per-class latency profile")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out / "latency_hist.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    files["latency_hist_figure"] = str(path)
    return files


def write_defense_reports(report_dir: str, table: list[dict]) -> dict:
    out = Path(report_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = [
        "defense",
        "attack_accuracy_pct",
        "advantage_pp",
        "cluster_accuracy_pct",
        "overhead_fraction",
        "energy_ratio",
        "mean_latency_cycles",
        "violation_rate",
        "mean_abs_cohens_d",
    ]
    rows = [[entry[h] for h in header] for entry in table]
    path = out / "defense_comparison.csv"
    write_csv(path, header, rows)
    files = {"defense_comparison": str(path)}

    labels = [entry["defense"] for entry in table]
    xs = np.arange(len(labels))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.bar(xs, [entry["advantage_pp"] for entry in table], color="#75507b")
    ax1.set_xticks(xs, labels)
    ax1.set_ylabel("advantage (pp)")
    ax1.set_title("Attack advantage by defense")
    ax1.axhline(0.0, color="black", linewidth=0.8)
    ax2.bar(xs - 0.2, [entry["overhead_fraction"] for entry in table], width=0.4, label="latency overhead")
    ax2.bar(xs + 0.2, [entry["energy_ratio"] - 1.0 for entry in table], width=0.4, label="energy ratio - 1")
    ax2.set_xticks(xs, labels)
    ax2.set_title("Defense cost")
    ax2.legend(fontsize=8)
    fig.tight_layout()
    path = out / "defense_comparison.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    files["defense_figure"] = str(path)
    return files


def write_scaling_reports(report_dir: str, table: list[dict]) -> dict:
    out = Path(report_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = [
        "sweep",
        "width",
        "depth",
        "param_count",
        "activation_count",
        "mean_abs_cohens_d",
        "attack_accuracy_pct",
        "advantage_pp",
    ]
    rows = [[entry[h] for h in header] for entry in table]
    path = out / "scaling_study.csv"
    write_csv(path, header, rows)
    files = {"scaling_study": str(path)}

    width_rows = [entry for entry in table if entry["sweep"] == "width"]
    depth_rows = [entry for entry in table if entry["sweep"] == "depth"]
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    for ax, rows_, key, label in (
        (axes[0], width_rows, "width", "hidden width"),
        (axes[1], depth_rows, "depth", "hidden depth"),
    ):
        if not rows_:
            continue
        xs = [entry[key] for entry in rows_]
        ax.plot(xs, [entry["mean_abs_cohens_d"] for entry in rows_], "o-", label="mean |d|")
        ax.set_xlabel(label)
        ax.set_ylabel("mean |d|")
        if key == "width":
            ax.set_xscale("log", base=2)
        twin = ax.twinx()
        twin.plot(xs, [entry["attack_accuracy_pct"] for entry in rows_], "s--", color="#cc0000", label="accuracy")
        twin.set_ylabel("attack accuracy (%)")
        ax.set_title(f"Leakage vs {label}")
    fig.tight_layout()
    path = out / "scaling_trends.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    files["scaling_figure"] = str(path)
    return files


def write_sparsity_report(report_dir: str, sparsity: dict[int, float]) -> dict:
    out = Path(report_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sparsity_by_class.csv"
    write_csv(path, ["class", "mean_sparsity"], [[c, s] for c, s in sparsity.items()])
    files = {"sparsity_by_class": str(path)}

    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(list(sparsity), list(sparsity.values()), color="#3465a4")
    ax.set_xlabel("sensitive class")
    ax.set_ylabel("mean activation sparsity")
    ax.set_ylim(0, 1)
    ax.set_title("Trained-model sparsity by class")
    fig.tight_layout()
    path = out / "sparsity_by_class.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    files["sparsity_figure"] = str(path)
    return files
