"""CSV, JSON-lines and SVG writers.

All writers produce text with a fixed layout and no locale dependence, so
identical inputs give byte-identical files.
"""

from __future__ import annotations

import json
from typing import Sequence

import numpy as np

from .config import PhaseResult
from .jumptime import TrajectoryRecord, jump_count_histogram

__all__ = ["CSV_COLUMNS", "fmt", "phase_csv", "trajectories_jsonl", "svg_plot"]

CSV_COLUMNS = ("w", "T_re", "T_im", "n_cir", "delta_p", "delta_q", "t_final", "n_final", "ancilla_dim", "method")


def fmt(x) -> str:
    """Float with 12 significant digits; integers and strings pass through."""
    if isinstance(x, (bool, str)):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


def phase_csv(result: PhaseResult) -> str:
    s = result.settings
    lines = [",".join(CSV_COLUMNS)]
    for w, t_re, t_im in result.rows:
        vals = (w, t_re, t_im, s.n_cir, s.delta_p, s.delta_q, s.t_final, s.n_final, s.ancilla_dim, s.method)
        lines.append(",".join(fmt(v) for v in vals))
    return "\n".join(lines) + "\n"


def trajectories_jsonl(records: Sequence[TrajectoryRecord], t_final: float, meta: dict | None = None) -> str:
    """One object per trajectory, then one summary line with the ensemble histogram."""
    lines = []
    for rec in records:
        hist = {str(k): v for k, v in jump_count_histogram([rec], t_final).items()}
        lines.append(
            json.dumps(
                {
                    "seed": rec.seed,
                    "jump_events": [[float(fmt(t)), int(j)] for t, j in rec.jump_events],
                    "histogram": hist,
                },
                sort_keys=True,
            )
        )
    summary = {
        "summary": True,
        "n_traj": len(records),
        "t_final": t_final,
        "histogram": {str(k): v for k, v in jump_count_histogram(records, t_final).items()},
    }
    if meta:
        summary.update(meta)
    lines.append(json.dumps(summary, sort_keys=True))
    return "\n".join(lines) + "\n"


def svg_plot(series: Sequence[tuple[str, Sequence[float], Sequence[float]]], *, width=640, height=400) -> str:
    """Axes plus one polyline per ``(label, x, y)`` series."""
    pad = 50
    xs = np.concatenate([np.asarray(x, float) for _, x, _ in series]) if series else np.zeros(1)
    ys = np.concatenate([np.asarray(y, float) for _, _, y in series]) if series else np.zeros(1)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = min(float(ys.min()), 0.0), max(float(ys.max()), 1.0)
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 10}" text-anchor="middle">w [{x0:.3g}, {x1:.3g}]</text>',
        f'<text x="10" y="{pad - 10}">Re T [{y0:.3g}, {y1:.3g}]</text>',
    ]
    for i, (label, x, y) in enumerate(series):
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        color = colors[i % len(colors)]
        out.append(f'<polyline fill="none" stroke="{color}" points="{pts}"><title>{label}</title></polyline>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
