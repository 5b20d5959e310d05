"""Report emission: delimited tables, text tables, and rendered figures.

Every report path writes machine-readable output (JSON + CSV) and, next to
it, a PNG rendering of the same numbers. Files are deterministic byte-for-
byte given identical inputs (figures are saved without embedded timestamps).
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .domain import CATEGORY_ORDER, DIMENSION_ORDER

_SAVEFIG_KW = {"dpi": 120, "metadata": {"Date": None}}


def report_to_csv(report: dict) -> str:
    """Dimension x category cells, then category and overall pooling rows."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["section", "dimension", "category", "n", "score"])
    for cell in report.get("cells", []):
        writer.writerow(
            ["cell", cell["dimension"], cell["category"], cell["n"], _fmt(cell["score"])]
        )
    for category, entry in report.get("category_overall", {}).items():
        writer.writerow(
            ["category", "", category, entry["n_questions"], _fmt(entry["score"])]
        )
    writer.writerow(
        ["overall", "", "", report.get("counts", {}).get("scored_questions", 0),
         _fmt(report.get("overall"))]
    )
    return buf.getvalue()


def report_to_text(report: dict) -> str:
    """Fixed-width table: one row per category, one column per dimension."""
    cells = {
        (c["dimension"], c["category"]): c for c in report.get("cells", [])
    }
    categories = [
        c for c in CATEGORY_ORDER if any((d, c) in cells for d in DIMENSION_ORDER)
    ]
    header = ["category"] + [d[:6] for d in DIMENSION_ORDER] + ["overall", "n"]
    rows = [header]
    for category in categories:
        row = [category]
        for dimension in DIMENSION_ORDER:
            cell = cells.get((dimension, category))
            row.append(_fmt(cell["score"], 4) if cell else "-")
        entry = report.get("category_overall", {}).get(category, {})
        row.append(_fmt(entry.get("score"), 4) if entry else "-")
        row.append(str(entry.get("n_questions", "-")))
        rows.append(row)
    rows.append(
        ["OVERALL"] + ["-"] * len(DIMENSION_ORDER)
        + [_fmt(report.get("overall"), 4),
           str(report.get("counts", {}).get("scored_questions", "-"))]
    )
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines) + "\n"


def _fmt(value: Optional[float], places: int = 6) -> str:
    if value is None:
        return ""
    return f"{value:.{places}f}"


def render_report_figure(report: dict, path: Path) -> None:
    """Per-category overall scores as a bar chart."""
    entries = report.get("category_overall", {})
    categories = [c for c in CATEGORY_ORDER if c in entries]
    values = [entries[c]["score"] for c in categories]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(range(len(categories)), values, color="#4878a8")
    ax.set_xticks(range(len(categories)))
    ax.set_xticklabels(categories, rotation=30, ha="right")
    ax.set_ylim(0, 1)
    ax.set_ylabel("score")
    title = f"Run {report.get('run_id', '')}"
    if report.get("overall") is not None:
        title += f"  overall={report['overall']:.4f}"
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)


def write_report_files(report: dict, outdir: str | Path, stem: str = "report") -> list[Path]:
    """Emit JSON + CSV + text + PNG for one evaluation report."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    json_path = outdir / f"{stem}.json"
    json_path.write_text(
        json.dumps(report, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    paths.append(json_path)
    csv_path = outdir / f"{stem}.csv"
    csv_path.write_text(report_to_csv(report), encoding="utf-8")
    paths.append(csv_path)
    txt_path = outdir / f"{stem}.txt"
    txt_path.write_text(report_to_text(report), encoding="utf-8")
    paths.append(txt_path)
    png_path = outdir / f"{stem}.png"
    render_report_figure(report, png_path)
    paths.append(png_path)
    return paths


def write_series_files(series: Sequence[dict], outdir: str | Path, stem: str = "daily") -> list[Path]:
    """Score-vs-day line (gaps left open) plus the delimited series."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / f"{stem}.csv"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["day", "date", "score", "gap"])
    for point in series:
        writer.writerow(
            [point["day"], point["date"], _fmt(point.get("score")), int(bool(point.get("gap")))]
        )
    csv_path.write_text(buf.getvalue(), encoding="utf-8")

    days = [p["day"] for p in series if p.get("score") is not None]
    scores = [p["score"] for p in series if p.get("score") is not None]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(days, scores, marker="o", color="#4878a8")
    for point in series:
        if point.get("gap"):
            ax.axvline(point["day"], color="#c0c0c0", linestyle="--", linewidth=1)
    ax.set_xlabel("days after question creation")
    ax.set_ylabel("score")
    ax.set_ylim(0, 1)
    ax.set_title("Daily prediction performance")
    fig.tight_layout()
    png_path = outdir / f"{stem}.png"
    fig.savefig(png_path, **_SAVEFIG_KW)
    plt.close(fig)
    return [csv_path, png_path]


def write_validity_files(table: dict, outdir: str | Path, stem: str = "validity") -> list[Path]:
    """Per-category answerability accuracy plus the delimited table."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / f"{stem}.csv"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["category", "n", "accuracy"])
    for category, entry in table.get("per_category", {}).items():
        writer.writerow([category, entry["n"], _fmt(entry["accuracy"])])
    writer.writerow(["overall", table.get("n", 0), _fmt(table.get("overall"))])
    csv_path.write_text(buf.getvalue(), encoding="utf-8")

    entries = table.get("per_category", {})
    categories = [c for c in CATEGORY_ORDER if c in entries] + sorted(
        set(entries) - set(CATEGORY_ORDER)
    )
    values = [entries[c]["accuracy"] for c in categories]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(range(len(categories)), values, color="#6a9a58")
    if table.get("overall") is not None:
        ax.axhline(table["overall"], color="#333333", linestyle=":", linewidth=1,
                   label=f"overall {table['overall']:.3f}")
        ax.legend()
    ax.set_xticks(range(len(categories)))
    ax.set_xticklabels(categories, rotation=30, ha="right")
    ax.set_ylim(0, 1)
    ax.set_ylabel("accuracy")
    ax.set_title("Answerability identification by category")
    fig.tight_layout()
    png_path = outdir / f"{stem}.png"
    fig.savefig(png_path, **_SAVEFIG_KW)
    plt.close(fig)
    return [csv_path, png_path]


def write_matrix_files(
    rows: Sequence[dict], outdir: str | Path, stem: str = "matrix"
) -> list[Path]:
    """Method/ablation cells as rows, category scores as columns."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / f"{stem}.csv"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["run_id", "method", "ablations"] + CATEGORY_ORDER + ["overall"])
    for row in rows:
        per_cat = row.get("category_overall", {})
        writer.writerow(
            [
                row.get("run_id", ""),
                row.get("method", ""),
                "+".join(sorted(row.get("ablations", {}))) or "-",
            ]
            + [_fmt(per_cat.get(c, {}).get("score")) for c in CATEGORY_ORDER]
            + [_fmt(row.get("overall"))]
        )
    csv_path.write_text(buf.getvalue(), encoding="utf-8")
    return [csv_path]
