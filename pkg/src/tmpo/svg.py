"""Tiny deterministic SVG scatter plots (no plotting dependency, identical
bytes for identical inputs)."""

from __future__ import annotations

import numpy as np

__all__ = ["scatter_svg"]

_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def scatter_svg(points: np.ndarray, labels: np.ndarray, title: str,
                extent: float = 6.0, size: int = 420,
                markers: np.ndarray | None = None) -> str:
    """Render labeled 2-D points into an SVG string.

    ``markers`` optionally adds crosses (e.g. component means).
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    half = size / 2.0
    scale = half / extent

    def sx(v: float) -> float:
        return half + v * scale

    def sy(v: float) -> float:
        return half - v * scale

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<text x="{size / 2:.1f}" y="16" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{title}</text>',
    ]
    for (x, y), lab in zip(points, labels):
        color = _PALETTE[int(lab) % len(_PALETTE)]
        parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="1.6" '
                     f'fill="{color}" fill-opacity="0.55"/>')
    if markers is not None:
        for x, y in np.asarray(markers, dtype=np.float64):
            parts.append(f'<path d="M {sx(x) - 5:.2f} {sy(y):.2f} H {sx(x) + 5:.2f} '
                         f'M {sx(x):.2f} {sy(y) - 5:.2f} V {sy(y) + 5:.2f}" '
                         f'stroke="black" stroke-width="1.4"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
