"""Self-contained SVG scatter of an infeasibility/regret frontier."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

REQUIRED = ("alpha", "infeasibility", "regret")
WIDTH, HEIGHT = 640, 480
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 30, 55
PAD = 0.05


class PlotError(ValueError):
    pass


@dataclass
class Marker:
    label: str
    x: float
    y: float
    baseline: bool


def _num(s):
    return float(s) if s not in ("", None) else None


def read_frontier(path) -> list[Marker]:
    """One marker per alpha (mean over its runs) plus one per baseline method.

    Rows with an empty ``alpha`` (or a ``method`` other than ``odece``) are
    baselines.  Runs without a regret value are left out of the regret mean.
    """
    path = Path(path)
    if not path.is_file():
        raise PlotError(f"frontier CSV not found: {path}")
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        missing = [c for c in REQUIRED if c not in cols]
        if missing:
            raise PlotError(f"{path}: missing required columns {missing}")
        rows = list(reader)
    if not rows:
        raise PlotError(f"{path}: no data rows")
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        method = (r.get("method") or "").strip()
        alpha = _num(r["alpha"])
        baseline = alpha is None or (method not in ("", "odece"))
        key = (True, method or "baseline") if baseline else (False, alpha)
        groups.setdefault(key, []).append(r)
    markers = []
    for (baseline, key), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
        inf = [v for v in (_num(r["infeasibility"]) for r in rs) if v is not None]
        reg = [v for v in (_num(r["regret"]) for r in rs) if v is not None]
        if not inf or not reg:
            continue
        label = key.upper() if baseline else f"α={key:g}"
        markers.append(Marker(label, float(np.mean(inf)), float(np.mean(reg)), baseline))
    if not markers:
        raise PlotError(f"{path}: no row has both infeasibility and regret")
    return markers


def axis_limits(values) -> tuple[float, float]:
    lo, hi = float(min(values)), float(max(values))
    span = hi - lo
    pad = PAD * span if span > 0 else PAD * max(abs(lo), 1.0)
    return lo - pad, hi + pad


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_svg(markers: list[Marker]) -> str:
    xlim = axis_limits([m.x for m in markers])
    ylim = axis_limits([m.y for m in markers])
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(x):
        return LEFT + (x - xlim[0]) / (xlim[1] - xlim[0]) * pw

    def py(y):
        return TOP + ph - (y - ylim[0]) / (ylim[1] - ylim[0]) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in np.linspace(0.0, 1.0, 5):
        xv = xlim[0] + t * (xlim[1] - xlim[0])
        yv = ylim[0] + t * (ylim[1] - ylim[0])
        out.append(f'<text x="{_fmt(px(xv))}" y="{TOP + ph + 16}" text-anchor="middle">{xv:.3g}</text>')
        out.append(f'<text x="{LEFT - 6}" y="{_fmt(py(yv) + 4)}" text-anchor="end">{yv:.3g}</text>')
    out.append(
        f'<text x="{LEFT + pw / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle">infeasibility ratio</text>'
    )
    out.append(
        f'<text x="16" y="{TOP + ph / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {TOP + ph / 2:.2f})">normalized regret</text>'
    )
    for m in markers:
        cx, cy = _fmt(px(m.x)), _fmt(py(m.y))
        if m.baseline:
            out.append(
                f'<rect class="baseline" x="{_fmt(px(m.x) - 5)}" y="{_fmt(py(m.y) - 5)}" '
                f'width="10" height="10" fill="#d62728"/>'
            )
        else:
            out.append(f'<circle class="alpha" cx="{cx}" cy="{cy}" r="5" fill="#1f77b4"/>')
        out.append(f'<text x="{_fmt(px(m.x) + 8)}" y="{_fmt(py(m.y) - 8)}">{m.label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_frontier(csv_path, out_path) -> Path:
    """Render ``csv_path`` to ``out_path``; nothing is written on error."""
    svg = render_svg(read_frontier(csv_path))
    out_path = Path(out_path)
    out_path.write_text(svg, encoding="utf-8", newline="\n")
    return out_path
