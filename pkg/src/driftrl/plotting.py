"""Plot-data emission: headered CSV plus a minimal self-contained SVG renderer.

The SVG writer is deliberately tiny and dependency-free so output bytes are a
pure function of the input data (no timestamps, no library metadata).
"""

from __future__ import annotations

import math

import numpy as np

_W, _H = 640, 400
_ML, _MR, _MT, _MB = 60, 20, 20, 50

_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _svg_header() -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
    ]


def _axes(x_lo, x_hi, y_lo, y_hi) -> tuple[list[str], callable, callable]:
    def sx(x):
        return _ML + (x - x_lo) / (x_hi - x_lo or 1.0) * (_W - _ML - _MR)

    def sy(y):
        return _H - _MB - (y - y_lo) / (y_hi - y_lo or 1.0) * (_H - _MT - _MB)

    parts = [
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" stroke="black"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        yv = y_lo + frac * (y_hi - y_lo)
        parts.append(f'<text x="{sx(xv):.1f}" y="{_H - _MB + 18}" font-size="11" '
                     f'text-anchor="middle">{xv:.3g}</text>')
        parts.append(f'<text x="{_ML - 6}" y="{sy(yv):.1f}" font-size="11" '
                     f'text-anchor="end">{yv:.3g}</text>')
    return parts, sx, sy


def emit_lines_svg(path: str, xs: np.ndarray, series: dict[str, np.ndarray]) -> None:
    """One polyline per named series over a shared x axis."""
    xs = np.asarray(xs, dtype=float)
    all_y = np.concatenate([np.asarray(v, dtype=float) for v in series.values()])
    y_lo, y_hi = float(all_y.min()), float(all_y.max())
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    parts = _svg_header()
    axes, sx, sy = _axes(float(xs.min()), float(xs.max()), y_lo, y_hi)
    parts += axes
    for i, (name, ys) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{_W - _MR - 4}" y="{_MT + 14 + 14 * i}" font-size="12" '
                     f'text-anchor="end" fill="{color}">{name}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def emit_bars_svg(path: str, labels: list[str], values: np.ndarray) -> None:
    values = np.asarray(values, dtype=float)
    y_lo = min(0.0, float(values.min()))
    y_hi = max(float(values.max()), 1e-9)
    parts = _svg_header()
    axes, _, sy = _axes(0.0, 1.0, y_lo, y_hi)
    parts += axes
    n = len(labels)
    span = (_W - _ML - _MR) / max(n, 1)
    for i, (label, v) in enumerate(zip(labels, values)):
        x0 = _ML + i * span + span * 0.15
        top = sy(max(v, 0.0))
        base = sy(min(v, 0.0))
        parts.append(f'<rect x="{x0:.1f}" y="{top:.1f}" width="{span * 0.7:.1f}" '
                     f'height="{abs(base - top):.1f}" fill="{_PALETTE[i % len(_PALETTE)]}"/>')
        parts.append(f'<text x="{x0 + span * 0.35:.1f}" y="{_H - _MB + 32}" font-size="11" '
                     f'text-anchor="middle">{label}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def emit_histogram_svg(path: str, values: np.ndarray, bins: int = 30) -> None:
    values = np.asarray(values, dtype=float)
    counts, edges = np.histogram(values, bins=bins)
    parts = _svg_header()
    axes, sx, sy = _axes(float(edges[0]), float(edges[-1]), 0.0, float(counts.max() or 1))
    parts += axes
    for i, c in enumerate(counts):
        x0, x1 = sx(edges[i]), sx(edges[i + 1])
        top = sy(float(c))
        parts.append(f'<rect x="{x0:.1f}" y="{top:.1f}" width="{x1 - x0:.1f}" '
                     f'height="{_H - _MB - top:.1f}" fill="{_PALETTE[0]}"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def emit_plot_data(rows: list[dict], kind: str, path: str, svg_path: str | None = None) -> None:
    """Write headered CSV; optionally render the matching SVG next to it.

    `rows` share a key set; the first key is the x axis for line plots, every
    numeric non-x key becomes a series. Histogram rows need a 'value' key.
    """
    if kind not in ("bars", "lines", "histogram"):
        raise ValueError(f"unknown plot kind {kind!r}")
    keys = list(rows[0].keys()) if rows else []
    with open(path, "w") as fh:
        fh.write(",".join(keys) + "\n")
        for row in rows:
            fh.write(",".join(repr(row[k]) if isinstance(row[k], float) else str(row[k])
                              for k in keys) + "\n")
    if svg_path is None or not rows:
        return
    if kind == "histogram":
        emit_histogram_svg(svg_path, np.array([r["value"] for r in rows]))
    elif kind == "lines":
        xs = np.array([float(r[keys[0]]) for r in rows])
        order = np.argsort(xs, kind="stable")
        series = {}
        for k in keys[1:]:
            try:
                series[k] = np.array([float(rows[i][k]) for i in order])
            except (TypeError, ValueError):
                continue
        emit_lines_svg(svg_path, xs[order], series)
    else:
        labels = [str(r[keys[0]]) for r in rows]
        value_key = next(
            (k for k in keys[1:]
             if all(isinstance(r[k], (int, float)) for r in rows)), None)
        if value_key is None:
            raise ValueError("bar plot needs at least one numeric column")
        values = np.array([float(r[value_key]) for r in rows])
        emit_bars_svg(svg_path, labels, values)
