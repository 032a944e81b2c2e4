"""Benchmark report files: CSV tables, confusion matrices, rendered figures.

The results table is one CSV row per configuration
(config_id, descriptor, adaptation, classifier, accuracy, seconds); every
confusion matrix gets its own CSV (rows = predicted class, columns = true
class). Figures are rendered to PNG next to the CSVs. Numeric columns use
fixed formats so reruns with identical seeds are byte-identical (the seconds
column is wall-clock and excluded from that contract).
"""

from __future__ import annotations

import csv
import dataclasses
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .classify import ConfusionMatrix

RESULTS_COLUMNS = ["config_id", "descriptor", "adaptation", "classifier", "accuracy", "seconds"]


@dataclasses.dataclass
class BenchRow:
    config_id: str
    descriptor: str
    adaptation: str
    classifier: str
    accuracy: float
    seconds: float
    error: str | None = None


def write_results_csv(path, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(RESULTS_COLUMNS)
        for row in rows:
            if row.error is not None:
                continue
            writer.writerow(
                [
                    row.config_id,
                    row.descriptor,
                    row.adaptation,
                    row.classifier,
                    f"{row.accuracy:.6f}",
                    f"{row.seconds:.4f}",
                ]
            )


def load_results_csv(path) -> list:
    rows = []
    with open(path, "r", newline="") as handle:
        for rec in csv.DictReader(handle):
            rows.append(
                BenchRow(
                    rec["config_id"],
                    rec["descriptor"],
                    rec["adaptation"],
                    rec["classifier"],
                    float(rec["accuracy"]),
                    float(rec["seconds"]),
                )
            )
    return rows


def write_confusion_csv(path, confusion: ConfusionMatrix) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["predicted\\true"] + list(confusion.classes))
        for i, cls in enumerate(confusion.classes):
            writer.writerow([cls] + [f"{v:.6f}" for v in confusion.values[i]])


def load_confusion_csv(path) -> ConfusionMatrix:
    with open(path, "r", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        classes = header[1:]
        values = np.array([[float(v) for v in row[1:]] for row in reader])
    return ConfusionMatrix(values, classes)


def write_summary(path, rows, manifest_info: dict | None = None) -> None:
    lines = ["benchmark summary", "=" * 17, ""]
    if manifest_info:
        for key, value in manifest_info.items():
            lines.append(f"{key}: {value}")
        lines.append("")
    ok = [r for r in rows if r.error is None]
    failed = [r for r in rows if r.error is not None]
    for row in sorted(ok, key=lambda r: -r.accuracy):
        lines.append(
            f"{row.accuracy:7.2%}  {row.config_id}  ({row.seconds:.3f}s classification)"
        )
    if failed:
        lines.append("")
        lines.append("failed configurations:")
        for row in failed:
            lines.append(f"  {row.config_id}: {row.error}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n")


def _accuracy_figure(rows, path) -> None:
    ok = [r for r in rows if r.error is None]
    if not ok:
        return
    ok = sorted(ok, key=lambda r: r.accuracy)
    labels = [r.config_id for r in ok]
    accs = [r.accuracy for r in ok]
    colors = ["#4878d0" if r.config_id.startswith("cross") else "#ee854a" for r in ok]
    fig, ax = plt.subplots(figsize=(9, max(3, 0.28 * len(ok))))
    ax.barh(np.arange(len(ok)), accs, color=colors)
    ax.set_yticks(np.arange(len(ok)))
    ax.set_yticklabels(labels, fontsize=7)
    ax.set_xlabel("accuracy")
    ax.set_xlim(0, 1)
    ax.set_title("recognition accuracy by configuration")
    ax.grid(axis="x", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _confusion_figure(confusion: ConfusionMatrix, title: str, path) -> None:
    fig, ax = plt.subplots(figsize=(6.5, 5.5))
    im = ax.imshow(confusion.values, cmap="Blues", vmin=0, vmax=1)
    ax.set_xticks(np.arange(len(confusion.classes)))
    ax.set_yticks(np.arange(len(confusion.classes)))
    ax.set_xticklabels(confusion.classes, rotation=90, fontsize=7)
    ax.set_yticklabels(confusion.classes, fontsize=7)
    ax.set_xlabel("true class")
    ax.set_ylabel("predicted class")
    ax.set_title(title, fontsize=9)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_figures(out_dir, rows, confusions: dict) -> list:
    """Render the accuracy overview and the best confusion matrix per arm."""
    out_dir = Path(out_dir)
    fig_dir = out_dir / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    written = []

    acc_path = fig_dir / "accuracy_overview.png"
    _accuracy_figure(rows, acc_path)
    written.append(acc_path)

    ok = [r for r in rows if r.error is None and r.config_id in confusions]
    by_arm: dict = {}
    for row in ok:
        arm = row.config_id.split("_")[0]
        if arm not in by_arm or row.accuracy > by_arm[arm].accuracy:
            by_arm[arm] = row
    for arm, row in sorted(by_arm.items()):
        path = fig_dir / f"confusion_best_{arm}.png"
        _confusion_figure(
            confusions[row.config_id],
            f"{row.config_id} (accuracy {row.accuracy:.1%})",
            path,
        )
        written.append(path)
    return written
