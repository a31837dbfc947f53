"""Static SVG line charts with byte-stable output."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import DomainError
from .lti import TimeSeries

WIDTH, HEIGHT = 800, 500
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 170, 40, 60
TICKS = 10
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")
DASHES = ("", "6,4", "2,3", "8,3,2,3")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _tick_label(v: float) -> str:
    return f"{v:.4g}"


def _y_range(traces: Sequence[TimeSeries]) -> tuple[float, float]:
    vals = np.concatenate([np.asarray(tr.values)[np.isfinite(tr.values)] for tr in traces])
    lo = min(0.0, float(vals.min())) if vals.size else 0.0
    hi = max(1.0, float(vals.max())) if vals.size else 1.0
    pad = 0.05 * (hi - lo)
    return lo - pad if lo < 0 else lo, hi + pad


def render_svg(traces: Sequence[TimeSeries], labels: Sequence[str], title: str = "Step response") -> str:
    if not traces:
        raise DomainError("need at least one trace to plot")
    if len(labels) != len(traces):
        raise DomainError("one label per trace is required")
    x_max = max(tr.grid.t_final for tr in traces)
    y_lo, y_hi = _y_range(traces)
    pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(t: float) -> float:
        return MARGIN_LEFT + t / x_max * pw

    def py(v: float) -> float:
        return MARGIN_TOP + (y_hi - v) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<text x="{_fmt(MARGIN_LEFT + pw / 2)}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
    ]
    for k in range(TICKS + 1):
        tx = x_max * k / TICKS
        ty = y_lo + (y_hi - y_lo) * k / TICKS
        X, Y = px(tx), py(ty)
        out.append(f'<line x1="{_fmt(X)}" y1="{MARGIN_TOP}" x2="{_fmt(X)}" y2="{MARGIN_TOP + ph}" stroke="#e5e5e5"/>')
        out.append(f'<line x1="{MARGIN_LEFT}" y1="{_fmt(Y)}" x2="{MARGIN_LEFT + pw}" y2="{_fmt(Y)}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{_fmt(X)}" y="{MARGIN_TOP + ph + 18}" text-anchor="middle">{_tick_label(tx)}</text>')
        out.append(f'<text x="{MARGIN_LEFT - 8}" y="{_fmt(Y + 4)}" text-anchor="end">{_tick_label(ty)}</text>')
    out.append(f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="#000000"/>')
    out.append(f'<text x="{_fmt(MARGIN_LEFT + pw / 2)}" y="{HEIGHT - 18}" text-anchor="middle">time (s)</text>')
    out.append(f'<text x="18" y="{_fmt(MARGIN_TOP + ph / 2)}" text-anchor="middle" '
               f'transform="rotate(-90 18 {_fmt(MARGIN_TOP + ph / 2)})">output</text>')

    for idx, (tr, label) in enumerate(zip(traces, labels)):
        color = COLORS[idx % len(COLORS)]
        dash = DASHES[(idx // len(COLORS)) % len(DASHES)]
        pts = " ".join(f"{_fmt(px(t))},{_fmt(py(min(max(v, y_lo), y_hi)))}"
                       for t, v in zip(tr.t, tr.values) if math.isfinite(v))
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash_attr} points="{pts}"/>')
        ly = MARGIN_TOP + 12 + 20 * idx
        lx = MARGIN_LEFT + pw + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 25}" y2="{ly}" stroke="{color}" stroke-width="2"{dash_attr}/>')
        out.append(f'<text x="{lx + 32}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(traces: Sequence[TimeSeries], labels: Sequence[str], out: Path | str,
             title: str = "Step response") -> Path:
    path = Path(out)
    path.write_text(render_svg(traces, labels, title), encoding="utf-8")
    return path
