"""Report assembly: CSV plot data, SVG figures, and the merged Markdown.

Figures are plain file output (Agg backend, no display). SVG ids are
salted deterministically and dates omitted so reruns with the same seed
produce byte-identical artifacts.
"""

from __future__ import annotations

import csv
import statistics
from pathlib import Path
from typing import Iterable

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "hitl-review"

import matplotlib.pyplot as plt
import numpy as np

from .error_analysis import natural_spline_basis
from .store import TimingRecord, filter_timings

_SAVE_KWARGS = {"format": "svg", "metadata": {"Date": None}}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
    return path


# -- error-analysis plot data -------------------------------------------------


def write_error_csvs(report: dict, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    path = out_dir / "error_by_class.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["code", "class_size", "misclassified", "error_rate"])
        for entry in report["per_class_error"]:
            writer.writerow(
                [entry["code"], entry["class_size"], entry["misclassified"], entry["error_rate"]]
            )
    paths.append(path)

    path = out_dir / "top_misclassified.csv"
    sizes = {e["code"]: e["class_size"] for e in report["per_class_error"]}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["code", "misclassified", "class_size"])
        for entry in report["top_misclassified"]:
            writer.writerow(
                [entry["code"], entry["misclassified"], sizes.get(entry["code"], 0)]
            )
    paths.append(path)

    path = out_dir / "confusion_flows.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["predicted", "true_code", "count"])
        for flow in report["confusion_flows"]:
            for source in flow["sources"]:
                writer.writerow([flow["predicted"], source["true_code"], source["count"]])
    paths.append(path)
    return paths


def figure_error_by_class(report: dict, path: Path) -> Path:
    """Scatter of per-class error rate against class size, with the trend."""
    entries = report["per_class_error"]
    sizes = np.array([e["class_size"] for e in entries], dtype=float)
    rates = np.array([e["error_rate"] for e in entries], dtype=float)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.scatter(sizes, rates, s=14, alpha=0.6, edgecolors="none", label="class")
    trend = report.get("trend", {})
    if "coefficients" in trend:
        grid = np.linspace(np.log10(sizes.min()), np.log10(sizes.max()), 200)
        basis = natural_spline_basis(grid, trend["knots"])
        ax.plot(
            10**grid,
            basis @ np.asarray(trend["coefficients"]),
            color="crimson",
            label="natural-spline trend",
        )
    ax.set_xscale("log")
    ax.set_xlabel("class size (images with this human label)")
    ax.set_ylabel("misclassification rate")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(loc="upper right", frameon=False)
    ax.set_title("Model error by class size")
    fig.tight_layout()
    return _save(fig, path)


def figure_top_misclassified(report: dict, path: Path) -> Path:
    entries = report["top_misclassified"]
    sizes = {e["code"]: e["class_size"] for e in report["per_class_error"]}
    codes = [e["code"] for e in entries][::-1]
    wrong = [e["misclassified"] for e in entries][::-1]
    total = [sizes.get(c, 0) for c in codes]
    y = np.arange(len(codes))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.barh(y + 0.2, total, height=0.38, color="lightsteelblue", label="class size")
    ax.barh(y - 0.2, wrong, height=0.38, color="indianred", label="misclassified")
    ax.set_yticks(y, codes)
    ax.set_xlabel("images")
    ax.set_title("Most frequently misclassified codes")
    ax.legend(loc="lower right", frameon=False)
    fig.tight_layout()
    return _save(fig, path)


def figure_confusion_flows(report: dict, path: Path, max_sources: int = 8) -> Path:
    flows = report["confusion_flows"]
    if not flows:
        fig, ax = plt.subplots(figsize=(6, 2))
        ax.axis("off")
        ax.text(0.5, 0.5, "no misclassification flows", ha="center")
        return _save(fig, path)
    fig, axes = plt.subplots(
        1, len(flows), figsize=(3.2 * len(flows), 4), squeeze=False
    )
    for ax, flow in zip(axes[0], flows):
        sources = flow["sources"][:max_sources]
        codes = [s["true_code"] for s in sources][::-1]
        counts = [s["count"] for s in sources][::-1]
        ax.barh(np.arange(len(codes)), counts, color="slategray")
        ax.set_yticks(np.arange(len(codes)), codes)
        ax.set_title(f"predicted {flow['predicted']}")
        ax.set_xlabel("images")
    fig.suptitle("What the wrongly-predicted images really were")
    fig.tight_layout()
    return _save(fig, path)


# -- timing -------------------------------------------------------------------


def timing_summary(timings: Iterable[TimingRecord], break_threshold: float) -> dict:
    """Per-reviewer effort after break filtering; states the threshold used."""
    records = list(timings)
    kept, removed = filter_timings(records, break_threshold)
    per_reviewer: dict[str, list[float]] = {}
    for record in kept:
        per_reviewer.setdefault(record.reviewer_id, []).append(record.duration)
    removed_by: dict[str, int] = {}
    for record in removed:
        removed_by[record.reviewer_id] = removed_by.get(record.reviewer_id, 0) + 1
    return {
        "break_threshold_s": break_threshold,
        "records_total": len(records),
        "records_removed_as_breaks": len(removed),
        "reviewers": {
            reviewer: {
                "pages_timed": len(durations),
                "breaks_removed": removed_by.get(reviewer, 0),
                "total_s": sum(durations),
                "median_s": statistics.median(durations) if durations else None,
            }
            for reviewer, durations in sorted(per_reviewer.items())
        },
    }


def figure_time_usage(
    timings: Iterable[TimingRecord], break_threshold: float, path: Path
) -> Path:
    """Per-reviewer page durations over the start/middle/end of their work."""
    records = list(timings)
    kept, _ = filter_timings(records, break_threshold)
    by_reviewer: dict[str, list[TimingRecord]] = {}
    for record in kept:
        by_reviewer.setdefault(record.reviewer_id, []).append(record)
    reviewers = sorted(by_reviewer)
    fig, ax = plt.subplots(figsize=(max(6, 1.8 * len(reviewers)), 4.5))
    data, positions, labels = [], [], []
    pos = 0
    for reviewer in reviewers:
        series = sorted(by_reviewer[reviewer], key=lambda r: r.recorded_at)
        durations = [r.duration for r in series]
        third = max(1, len(durations) // 3)
        chunks = [durations[:third], durations[third : 2 * third], durations[2 * third :]]
        for name, chunk in zip(("start", "mid", "end"), chunks):
            if chunk:
                data.append(chunk)
                positions.append(pos)
                labels.append(f"{reviewer}\n{name}")
                pos += 1
        pos += 1
    if data:
        ax.boxplot(data, positions=positions, widths=0.7)
        ax.set_xticks(positions, labels, fontsize=8)
    ax.set_ylabel("seconds per page")
    ax.set_title(f"Time per page (breaks over {break_threshold:.0f}s removed)")
    fig.tight_layout()
    return _save(fig, path)


def write_timing_csv(summary: dict, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["reviewer_id", "pages_timed", "breaks_removed", "total_s", "median_s"]
        )
        for reviewer, stats in summary["reviewers"].items():
            writer.writerow(
                [
                    reviewer,
                    stats["pages_timed"],
                    stats["breaks_removed"],
                    stats["total_s"],
                    stats["median_s"],
                ]
            )
    return path


# -- merged Markdown ------------------------------------------------------------


def _pct(value: float) -> str:
    return f"{value * 100:.1f}%"


def render_report_markdown(
    agreement: dict,
    errors: dict,
    timing: dict | None,
    figure_names: dict[str, str],
) -> str:
    lines = ["# Review campaign report", ""]

    single = agreement["single_review"]
    counts, fractions = single["counts"], single["fractions"]
    lines += [
        "## Corrected labels",
        "",
        f"Reviewed images: {counts['total']}",
        "",
        f"- Corrected: {_pct(fractions['corrected'])} ({counts['corrected']})",
        f"- Agreed with model: {_pct(fractions['model_agreed'])} ({counts['model_agreed']})",
        f"- Unlabelable: {_pct(fractions['unlabelable'])} ({counts['unlabelable']})",
        f"- Uncertain: {_pct(fractions['uncertain'])} ({counts['uncertain']})",
        f"- Invalid: {_pct(fractions['invalid'])} ({counts['invalid']})",
        "",
    ]

    lines += ["## Verification and correction quality", ""]
    overlap = agreement.get("overlap")
    if overlap and overlap["counts"]["total"]:
        ocounts = overlap["counts"]
        ofr = overlap["fractions"]
        rates = overlap["rates"]
        lines += [
            f"Double-reviewed images: {ocounts['total']}",
            "",
            f"- Certain: {_pct(ofr['certain'])} ({ocounts['certain']})",
            f"- Unknown: {_pct(ofr['unknown'])} ({ocounts['unknown']})",
            f"- Uncertain: {_pct(ofr['uncertain'])} ({ocounts['uncertain']})",
            f"- Both reviewers agree with the model: {rates['both_agree_with_model'] * 100:.2f}%",
        ]
        if rates["one_agrees_within_unknown"] is not None:
            lines.append(
                "- One reviewer agrees with the model, within Unknown: "
                f"{rates['one_agrees_within_unknown'] * 100:.2f}%"
            )
        lines.append(
            "- At least one reviewer agrees with the model: "
            f"{rates['at_least_one_agrees_with_model'] * 100:.2f}%"
        )
        lines.append("")
    else:
        lines += ["no overlap data", ""]

    lines += ["## Labeling consistency", ""]
    for reviewer in agreement["consistency"]["reviewers"]:
        mismatch_bits = ", ".join(
            f"{m['first']!r} vs {m['second']!r} ({m['kind']})"
            for m in reviewer["mismatches"]
        )
        lines.append(
            f"- {reviewer['reviewer_id']}: {reviewer['exact_matches']}/{reviewer['duplicates']}"
            " duplicates matched exactly"
            + (f"; mismatches: {mismatch_bits}" if mismatch_bits else "")
        )
    if not agreement["consistency"]["reviewers"]:
        lines.append("no self-duplicate data")
    lines.append("")

    lines += ["## Model classification error analysis", ""]
    lines.append(
        f"Images with a trusted human label: {errors['truth_images']}"
        f" across {errors['classes']} classes."
    )
    trend = errors.get("trend", {})
    if "coefficients" in trend:
        lines.append(
            f"Trend: least-squares natural cubic spline, {len(trend['knots'])} knots,"
            f" x = {trend['x_transform']}, residual norm {trend['residual_norm']:.4f}."
        )
    top = errors.get("top_misclassified", [])
    if top:
        lines.append("")
        lines.append("Most frequently misclassified codes:")
        for entry in top:
            lines.append(f"- {entry['code']}: {entry['misclassified']} images")
    for key in ("error_by_class", "top_misclassified", "confusion_flows"):
        if key in figure_names:
            lines.append("")
            lines.append(f"![{key}]({figure_names[key]})")
    lines.append("")

    lines += ["## Time usage", ""]
    if timing and timing["reviewers"]:
        lines.append(
            f"Break filtering removed {timing['records_removed_as_breaks']} of"
            f" {timing['records_total']} page timings"
            f" (threshold {timing['break_threshold_s']:.0f}s)."
        )
        lines.append("")
        lines.append("| reviewer | pages timed | breaks removed | total (s) | median (s) |")
        lines.append("|---|---|---|---|---|")
        for reviewer, stats in timing["reviewers"].items():
            median = f"{stats['median_s']:.1f}" if stats["median_s"] is not None else "-"
            lines.append(
                f"| {reviewer} | {stats['pages_timed']} | {stats['breaks_removed']} |"
                f" {stats['total_s']:.1f} | {median} |"
            )
        if "time_usage" in figure_names:
            lines.append("")
            lines.append(f"![time_usage]({figure_names['time_usage']})")
    else:
        lines.append("no timing data")
    lines.append("")
    return "\n".join(lines)
