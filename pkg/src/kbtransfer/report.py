"""Report rendering: text tables mirroring the experiment matrices, CSV
emission, and figure output.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .experiment import Report

__all__ = [
    "ReportError",
    "emit_report_table",
    "write_reports_csv",
    "render_report_figures",
    "save_report",
    "load_reports",
]

LAYOUTS = ("retrieval", "reasoning")

RETRIEVAL_COLUMNS = ("Source", "Target", "Learning", "R@1", "R@5", "R@10", "MR")
REASONING_COLUMNS = ("Vision", "Learning", "Knowledge", "DET", "DA", "Accuracy")


class ReportError(ValueError):
    pass


def _learning_cell(config: dict) -> str:
    extras = []
    if config.get("det", "off") != "off":
        extras.append("DET")
    if config.get("da"):
        extras.append("DA")
    label = config.get("learning", "?")
    return f"{label} (w/ {'+'.join(extras)})" if extras else label


def _rows(reports: list[Report], layout: str) -> list[tuple[str, ...]]:
    if layout not in LAYOUTS:
        raise ReportError(f"unknown layout {layout!r}")
    rows = []
    for report in sorted(reports, key=lambda r: r.fingerprint):
        cfg = report.config
        if layout == "retrieval":
            if report.retrieval is None:
                raise ReportError(
                    f"report {report.fingerprint} has no retrieval metrics (mixed layouts?)"
                )
            m = report.retrieval
            rows.append(
                (
                    cfg.get("source", "-"),
                    cfg.get("target", "-"),
                    _learning_cell(cfg),
                    f"{m.r_at.get(1, float('nan')):.3f}",
                    f"{m.r_at.get(5, float('nan')):.3f}",
                    f"{m.r_at.get(10, float('nan')):.3f}",
                    str(m.mr),
                )
            )
        else:
            if report.reasoning_accuracy is None:
                raise ReportError(
                    f"report {report.fingerprint} has no reasoning accuracy (mixed layouts?)"
                )
            rows.append(
                (
                    cfg.get("vision", "-"),
                    cfg.get("learning", "?"),
                    cfg.get("knowledge", "-"),
                    "yes" if cfg.get("det", "off") != "off" else "-",
                    "yes" if cfg.get("da") else "-",
                    f"{report.reasoning_accuracy:.3f}",
                )
            )
    return rows


def emit_report_table(reports: list[Report], layout: str) -> str:
    """Fixed-width text table; rows ordered by config fingerprint."""
    header = RETRIEVAL_COLUMNS if layout == "retrieval" else REASONING_COLUMNS
    rows = _rows(reports, layout)
    widths = [
        max(len(header[i]), *(len(r[i]) for r in rows)) if rows else len(header[i])
        for i in range(len(header))
    ]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def write_reports_csv(reports: list[Report], layout: str, path) -> Path:
    header = RETRIEVAL_COLUMNS if layout == "retrieval" else REASONING_COLUMNS
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fd:
        writer = csv.writer(fd)
        writer.writerow(header)
        writer.writerows(_rows(reports, layout))
    return path


def render_report_figures(reports: list[Report], layout: str, out_dir) -> list[Path]:
    """Bar charts of the tabulated metrics, one PNG per metric group."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    reports = sorted(reports, key=lambda r: r.fingerprint)
    labels = [f"{r.config.get('name', r.fingerprint)}\n{_learning_cell(r.config)}" for r in reports]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    if layout == "retrieval":
        ks = (1, 5, 10)
        fig, ax = plt.subplots(figsize=(max(6, 2 * len(reports)), 4))
        x = np.arange(len(reports))
        width = 0.25
        for i, k in enumerate(ks):
            vals = [r.retrieval.r_at.get(k, 0.0) for r in reports]
            ax.bar(x + (i - 1) * width, vals, width, label=f"R@{k}")
        ax.set_xticks(x, labels, fontsize=8)
        ax.set_ylabel("recall")
        ax.set_ylim(0, 1)
        ax.legend()
        ax.set_title("Knowledge retrieval recall")
        fig.tight_layout()
        path = out_dir / "retrieval_recall.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)

        fig, ax = plt.subplots(figsize=(max(6, 2 * len(reports)), 4))
        ax.bar(x, [r.retrieval.mr for r in reports], color="tab:red")
        ax.set_xticks(x, labels, fontsize=8)
        ax.set_ylabel("median rank")
        ax.set_title("Knowledge retrieval median rank (lower is better)")
        fig.tight_layout()
        path = out_dir / "retrieval_mr.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)
    else:
        fig, ax = plt.subplots(figsize=(max(6, 2 * len(reports)), 4))
        x = np.arange(len(reports))
        ax.bar(x, [r.reasoning_accuracy for r in reports], color="tab:green")
        ax.set_xticks(x, labels, fontsize=8)
        ax.set_ylabel("accuracy")
        ax.set_ylim(0, 1)
        ax.set_title("Answer prediction accuracy")
        fig.tight_layout()
        path = out_dir / "reasoning_accuracy.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)
    return paths


def save_report(report: Report, path) -> None:
    with open(path, "w", encoding="utf-8") as fd:
        json.dump(report.to_dict(), fd, indent=2, sort_keys=True)
        fd.write("\n")


def load_reports(paths) -> list[Report]:
    reports = []
    for path in paths:
        with open(path, encoding="utf-8") as fd:
            reports.append(Report.from_dict(json.load(fd)))
    return reports
