"""Figures for delta sweeps, rendered headless with the Agg backend."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# PNG text chunks would otherwise embed the matplotlib version
_META = {"Software": None}


def sweep_figure(rows: Sequence[dict], path: str | Path, series: Sequence[tuple[str, str]], title: str) -> None:
    """Plot columns of a sweep table against ``delta``.

    ``series`` lists (column, legend label) pairs; missing columns are skipped.
    """
    deltas = [r["delta"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=100)
    markers = "osd^v"
    for i, (col, label) in enumerate(series):
        if not rows or col not in rows[0]:
            continue
        ax.plot(deltas, [r[col] for r in rows], marker=markers[i % len(markers)], label=label)
    ax.set_xlabel("ambiguity level delta")
    ax.set_ylabel("welfare")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_META)
    plt.close(fig)


def gnuplot_script(csv_name: str, columns: Sequence[str], series: Sequence[tuple[str, str]], title: str) -> str:
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set title '{title}'",
        "set xlabel 'ambiguity level delta'",
        "set ylabel 'welfare'",
        "set grid",
    ]
    plots = []
    for col, label in series:
        if col in columns:
            plots.append(f"'{csv_name}' using 1:{columns.index(col) + 1} with linespoints title '{label}'")
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"
