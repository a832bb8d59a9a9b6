"""Evaluation reports: JSON + CSV next to rendered matplotlib figures.

Every report lands in one directory so a run is self-contained:
``metrics.json`` (machine readable), ``metrics.csv`` (spreadsheet
friendly), and one PNG per figure.  The Agg backend is forced so report
generation works on headless boxes.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

FIG_DPI = 120


def _write_json(out_dir: Path, payload: dict) -> Path:
    path = out_dir / "metrics.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), "utf-8")
    return path


def _write_csv(out_dir: Path, rows: list[dict]) -> Path:
    path = out_dir / "metrics.csv"
    if rows:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    return path


def write_prediction_report(out_dir: str | Path, result: dict, scores=None) -> list[Path]:
    """Persist an LRAP/LRL evaluation with a metric bar figure."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [
        _write_json(out_dir, result),
        _write_csv(out_dir, [{k: v for k, v in result.items() if not isinstance(v, (list, dict))}]),
    ]
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    bars = ["lrap", "lrl"]
    ax.bar(bars, [result[b] for b in bars], color=["#3b74b8", "#b8533b"], width=0.55)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.set_title(f"label ranking, {result.get('kind', '?')} "
                 f"(n={result.get('n_samples', '?')})")
    for i, b in enumerate(bars):
        ax.text(i, result[b] + 0.02, f"{result[b]:.4f}", ha="center", fontsize=9)
    fig.tight_layout()
    fig_path = out_dir / "label_ranking.png"
    fig.savefig(fig_path, dpi=FIG_DPI)
    plt.close(fig)
    written.append(fig_path)
    return written


def write_retrieval_report(out_dir: str | Path, result: dict) -> list[Path]:
    """Persist a retrieval (rank) evaluation with a rank histogram."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    per_query = result.get("per_query", [])
    rows = [
        {"query": q["query"], "nar": q["nar"], "ranks": ";".join(map(str, q["ranks"]))}
        for q in per_query
    ]
    written = [_write_json(out_dir, result), _write_csv(out_dir, rows)]

    all_ranks = [r for q in per_query for r in q["ranks"]]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.4, 3.2))
    if all_ranks:
        ax1.hist(all_ranks, bins=min(30, max(all_ranks)), color="#3b74b8")
    ax1.set_xlabel("rank of relevant logo")
    ax1.set_ylabel("count")
    ax1.set_title("relevant-rank distribution")
    nars = [q["nar"] for q in per_query]
    if nars:
        ax2.hist(nars, bins=20, color="#4c9a62")
        ax2.axvline(result["nar_mean"], color="k", linestyle="--", linewidth=1,
                    label=f"mean {result['nar_mean']:.4f}")
        ax2.legend(fontsize=8)
    ax2.set_xlabel("normalized average rank")
    ax2.set_title("per-query NAR")
    fig.tight_layout()
    fig_path = out_dir / "retrieval_ranks.png"
    fig.savefig(fig_path, dpi=FIG_DPI)
    plt.close(fig)
    written.append(fig_path)
    return written
