"""Standalone SVG plots: sample scatters and coverage-vs-epoch curves.

Output is plain text with fixed number formatting, so identical inputs give
byte-identical files and tests can read values back out of the markup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT, MARGIN = 420, 420, 40
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    px_lo: float
    px_hi: float

    def __call__(self, v):
        return self.px_lo + (np.asarray(v, dtype=float) - self.lo) / (self.hi - self.lo) * (
            self.px_hi - self.px_lo)

    def inverse(self, px):
        return self.lo + (np.asarray(px, dtype=float) - self.px_lo) / (
            self.px_hi - self.px_lo) * (self.hi - self.lo)


def _header(title: str, width: int = WIDTH, height: int = HEIGHT) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13">{escape(title)}</text>',
    ]


def scatter_svg(samples: np.ndarray, background: np.ndarray | None = None,
                extent: float = 3.0, title: str = "") -> str:
    """Generated samples (class ``sample``) over true data (class ``data``).

    The view is the square ``[-extent, extent]^2``; points outside it are still
    emitted so the marker count always equals the number of samples.
    """
    samples = np.asarray(samples, dtype=float)
    ax = Axis(-extent, extent, MARGIN, WIDTH - MARGIN)
    ay = Axis(-extent, extent, HEIGHT - MARGIN, MARGIN)
    out = _header(title)
    out.append(f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" '
               f'height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="#999"/>')
    if background is not None:
        bg = np.asarray(background, dtype=float)
        out.append('<g fill="#bbbbbb" fill-opacity="0.5">')
        out += [f'<circle class="data" cx="{x:.2f}" cy="{y:.2f}" r="1.2"/>'
                for x, y in zip(ax(bg[:, 0]), ay(bg[:, 1]))]
        out.append("</g>")
    out.append('<g fill="#d62728" fill-opacity="0.6">')
    out += [f'<circle class="sample" cx="{x:.2f}" cy="{y:.2f}" r="1.2"/>'
            for x, y in zip(ax(samples[:, 0]), ay(samples[:, 1]))]
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


@dataclass
class Series:
    label: str
    epochs: Sequence[int]
    values: Sequence[float]
    dashed: bool = False
    color: str = PALETTE[0]


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def coverage_svg(series: Sequence[Series], title: str = "coverage W1",
                 y_label: str = "coverage_w1") -> str:
    """Line plot of a per-epoch metric; dashed series are drawn dashed.

    Each polyline carries its exact values in ``data-epochs`` and
    ``data-values``. Undefined (NaN) points are kept there but skipped in the
    drawn line.
    """
    width = 560
    finite = [v for s in series for v in s.values if math.isfinite(v)]
    epochs = [e for s in series for e in s.epochs]
    y_hi = max(finite) * 1.05 if finite and max(finite) > 0 else 1.0
    x_hi = max(max(epochs), 1) if epochs else 1
    ax = Axis(min(epochs, default=0), x_hi, MARGIN + 20, width - 150)
    ay = Axis(0.0, y_hi, HEIGHT - MARGIN, MARGIN)
    out = _header(title, width=width)
    out.append(f'<line x1="{ax.px_lo}" y1="{ay.px_lo}" x2="{ax.px_hi}" y2="{ay.px_lo}" stroke="black"/>')
    out.append(f'<line x1="{ax.px_lo}" y1="{ay.px_lo}" x2="{ax.px_lo}" y2="{ay.px_hi}" stroke="black"/>')
    for t in _ticks(0.0, y_hi):
        out.append(f'<text x="{ax.px_lo - 4}" y="{float(ay(t)) + 4:.2f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="10">{t:.2f}</text>')
    out.append(f'<text x="{(ax.px_lo + ax.px_hi) / 2:.1f}" y="{HEIGHT - 8}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="11">epoch</text>')
    out.append(f'<text x="12" y="{HEIGHT / 2:.1f}" font-family="sans-serif" font-size="11" '
               f'transform="rotate(-90 12 {HEIGHT / 2:.1f})">{escape(y_label)}</text>')
    for k, s in enumerate(series):
        pts = [(float(ax(e)), float(ay(v))) for e, v in zip(s.epochs, s.values) if math.isfinite(v)]
        dash = ' stroke-dasharray="6 4"' if s.dashed else ""
        out.append(
            f'<polyline class="series" data-label="{escape(s.label)}" '
            f'data-epochs="{" ".join(str(int(e)) for e in s.epochs)}" '
            f'data-values="{" ".join(repr(float(v)) for v in s.values)}" '
            f'fill="none" stroke="{s.color}" stroke-width="1.5"{dash} '
            f'points="{" ".join(f"{x:.3f},{y:.3f}" for x, y in pts)}"/>')
        ly = MARGIN + 14 * k
        out.append(f'<line x1="{width - 140}" y1="{ly}" x2="{width - 115}" y2="{ly}" '
                   f'stroke="{s.color}" stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{width - 110}" y="{ly + 4}" font-family="sans-serif" '
                   f'font-size="10">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
