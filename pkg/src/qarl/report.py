"""CSV traces and deterministic SVG reports (heatmaps and boxplots).

SVG output is assembled from formatted strings with fixed precision so the
same inputs always produce byte-identical files, which keeps golden-file
tests meaningful.
"""

from __future__ import annotations

import csv
import os

import numpy as np

__all__ = [
    "write_trace_csv",
    "write_grid_csv",
    "read_grid_csv",
    "heatmap_svg",
    "boxplot_svg",
    "atomic_write_text",
]

TRACE_COLUMNS = [
    "seed",
    "iteration",
    "mean_return",
    "k",
    "rate",
    "lam",
    "eta",
    "beta",
    "adversary_entropy",
    "performance_estimate",
    "sampled_mean",
]

# fixed 9-step viridis-style ramp
_RAMP = [
    "#440154",
    "#472d7b",
    "#3b528b",
    "#2c728e",
    "#21918c",
    "#28ae80",
    "#5ec962",
    "#addc30",
    "#fde725",
]


def atomic_write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_trace_csv(path: str, records, seed: int, append: bool = False) -> None:
    """One row per (seed, iteration); `records` are IterationRecord objects."""
    mode = "a" if append and os.path.exists(path) else "w"
    with open(path, mode, newline="") as fh:
        writer = csv.writer(fh)
        if mode == "w":
            writer.writerow(TRACE_COLUMNS)
        for it in records:
            writer.writerow(
                [
                    seed,
                    it.iteration,
                    f"{it.mean_return:.10g}",
                    f"{it.k:.10g}",
                    f"{it.rate:.10g}",
                    f"{it.lam:.10g}",
                    f"{it.eta:.10g}",
                    f"{it.beta:.10g}",
                    f"{it.adversary_entropy:.10g}",
                    f"{it.performance_estimate:.10g}",
                    f"{float(np.mean(it.sampled_values)):.10g}",
                ]
            )


def write_grid_csv(path: str, grid: np.ndarray, axis1, axis2) -> None:
    """Robustness grid in long form: axis1, axis2, mean_return."""
    rows = ["axis1,axis2,mean_return"]
    for i, m1 in enumerate(axis1):
        for j, m2 in enumerate(axis2):
            rows.append(f"{m1:.10g},{m2:.10g},{grid[i, j]:.10g}")
    atomic_write_text(path, "\n".join(rows) + "\n")


def read_grid_csv(path: str):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        entries = [(float(r["axis1"]), float(r["axis2"]), float(r["mean_return"])) for r in reader]
    if not entries:
        raise ValueError(f"empty grid CSV {path}")
    axis1 = sorted({e[0] for e in entries})
    axis2 = sorted({e[1] for e in entries})
    grid = np.full((len(axis1), len(axis2)), np.nan)
    for m1, m2, v in entries:
        grid[axis1.index(m1), axis2.index(m2)] = v
    return grid, axis1, axis2


def _color(value: float, lo: float, hi: float) -> str:
    if hi <= lo:
        return _RAMP[len(_RAMP) // 2]
    frac = (value - lo) / (hi - lo)
    idx = min(int(frac * len(_RAMP)), len(_RAMP) - 1)
    return _RAMP[idx]


def heatmap_svg(
    grid: np.ndarray,
    axis1,
    axis2,
    title: str = "robustness",
    cell: int = 48,
) -> str:
    """Colored-cell heatmap; rows are axis1, columns axis2; min/max annotated."""
    grid = np.asarray(grid, dtype=float)
    n1, n2 = grid.shape
    lo, hi = float(np.nanmin(grid)), float(np.nanmax(grid))
    margin = 70
    width = margin + n2 * cell + 20
    height = margin + n1 * cell + 50
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{margin}" y="20" font-size="14">{title}</text>',
        f'<text x="{margin}" y="{margin + n1 * cell + 30}" font-size="11">'
        f"min={lo:.4g} max={hi:.4g}</text>",
    ]
    for i in range(n1):
        parts.append(
            f'<text x="8" y="{margin + i * cell + cell // 2 + 4}" font-size="10">'
            f"{axis1[i]:.3g}</text>"
        )
        for j in range(n2):
            color = _color(grid[i, j], lo, hi)
            x = margin + j * cell
            y = margin + i * cell
            parts.append(
                f'<rect class="cell" x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{color}" stroke="#ffffff"/>'
            )
            parts.append(
                f'<text x="{x + 4}" y="{y + cell // 2 + 4}" font-size="9" '
                f'fill="#ffffff">{grid[i, j]:.3g}</text>'
            )
    for j in range(n2):
        parts.append(
            f'<text x="{margin + j * cell + cell // 2 - 8}" y="{margin - 8}" '
            f'font-size="10">{axis2[j]:.3g}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def boxplot_svg(data: dict[str, list[float]], title: str = "returns") -> str:
    """Minimal box-and-whisker summary, one box per labelled group."""
    if not data:
        raise ValueError("no data to plot")
    labels = list(data)
    all_vals = [v for vs in data.values() for v in vs]
    lo, hi = min(all_vals), max(all_vals)
    if hi <= lo:
        hi = lo + 1.0
    width_per = 90
    height = 260
    plot_h = 180
    top = 40

    def y_of(v: float) -> float:
        return top + plot_h * (1.0 - (v - lo) / (hi - lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{60 + width_per * len(labels)}" height="{height}">',
        f'<text x="10" y="20" font-size="14">{title}</text>',
        f'<text x="10" y="{top + plot_h + 30}" font-size="11">'
        f"min={lo:.4g} max={hi:.4g}</text>",
    ]
    for idx, label in enumerate(labels):
        vals = np.sort(np.asarray(data[label], dtype=float))
        q1, med, q3 = (float(np.percentile(vals, p)) for p in (25, 50, 75))
        x = 60 + idx * width_per
        bw = 40
        parts.append(
            f'<line x1="{x + bw // 2}" y1="{y_of(float(vals[0])):.1f}" '
            f'x2="{x + bw // 2}" y2="{y_of(float(vals[-1])):.1f}" stroke="#333333"/>'
        )
        parts.append(
            f'<rect class="box" x="{x}" y="{y_of(q3):.1f}" width="{bw}" '
            f'height="{max(y_of(q1) - y_of(q3), 1.0):.1f}" '
            f'fill="#5ec962" stroke="#333333"/>'
        )
        parts.append(
            f'<line x1="{x}" y1="{y_of(med):.1f}" x2="{x + bw}" '
            f'y2="{y_of(med):.1f}" stroke="#000000"/>'
        )
        parts.append(
            f'<text x="{x}" y="{top + plot_h + 15}" font-size="10">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
