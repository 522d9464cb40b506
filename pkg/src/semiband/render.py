"""Minimal SVG line charts, no plotting library needed."""
from __future__ import annotations

import csv
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def line_chart(series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
               width: int = 640, height: int = 400) -> str:
    """``series`` maps a label to an (x, y) pair of arrays."""
    ml, mr, mt, mb = 70, 20, 40, 50
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = width - ml - mr, height - mt - mb

    def sx(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
           f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>']
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        yv = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{sx(xv):.1f}" y="{mt + ph + 16}" text-anchor="middle">{xv:.4g}</text>')
        out.append(f'<text x="{ml - 6}" y="{sy(yv) + 4:.1f}" text-anchor="end">{yv:.4g}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{mt + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2})">{escape(ylabel)}</text>')
    for n, (label, (x, y)) in enumerate(series.items()):
        color = COLORS[n % len(COLORS)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{ml + pw - 4}" y="{mt + 14 + 14 * n}" text-anchor="end" '
                   f'fill="{color}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _read_columns(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path} has no data rows")
    return rows


def render_csv(path, out_path=None) -> Path:
    """Chart a trace CSV (cumulative loss vs t) or a ratio scan CSV (ratio vs lambda_q0)."""
    path = Path(path)
    rows = _read_columns(path)
    cols = rows[0].keys()
    if "round_loss" in cols:
        t = np.array([int(r["t"]) for r in rows])
        y = np.cumsum([float(r["round_loss"]) for r in rows])
        svg = line_chart({path.stem: (t, y)}, "cumulative loss", "t", "loss")
    elif "ratio" in cols:
        x = np.array([float(r["lambda_q0"]) for r in rows])
        y = np.array([float(r["ratio"]) for r in rows])
        svg = line_chart({"J4/J3": (x, y)}, "derivative-integral ratio", "lambda_q0", "ratio")
    elif "regret" in cols:
        t = np.array([int(r["t"]) for r in rows])
        y = np.array([float(r["regret"]) for r in rows])
        svg = line_chart({path.stem: (t, y)}, "regret", "t", "regret")
    else:
        raise ValueError(f"{path}: no chartable columns in {list(cols)}")
    out = Path(out_path) if out_path else path.with_suffix(".svg")
    out.write_text(svg, encoding="utf-8")
    return out
