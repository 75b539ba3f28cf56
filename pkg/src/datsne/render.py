"""Static SVG rendering of an embedding with directed arrows."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .model import TemporalGraph

# Anchors of a perceptually uniform purple-to-yellow ramp (viridis).
_RAMP = np.array([
    [0x44, 0x01, 0x54], [0x48, 0x28, 0x78], [0x3e, 0x4a, 0x89], [0x31, 0x68, 0x8e],
    [0x26, 0x82, 0x8e], [0x1f, 0x9e, 0x89], [0x35, 0xb7, 0x79], [0x6d, 0xcd, 0x59],
    [0xb4, 0xde, 0x2c], [0xfd, 0xe7, 0x25],
], dtype=float)

CANVAS = 800.0
MARGIN = 0.05
NEUTRAL = "#555555"


@dataclass(frozen=True)
class RenderOptions:
    point_radius: float = 3.0
    arrow_head: float = 5.0
    color_by: str = "timestamp"  # timestamp | label | none
    arrow_color: str = "#404040"
    arrow_width: float = 0.8

    def __post_init__(self):
        if self.color_by not in ("timestamp", "label", "none"):
            raise ValueError(f"color_by must be timestamp, label or none, got {self.color_by!r}")


def ramp_color(fraction: float) -> str:
    """Hex color at ``fraction`` in [0, 1]; 0 is dark purple, 1 is yellow."""
    x = min(max(float(fraction), 0.0), 1.0) * (len(_RAMP) - 1)
    lo = int(np.floor(x))
    hi = min(lo + 1, len(_RAMP) - 1)
    rgb = _RAMP[lo] + (x - lo) * (_RAMP[hi] - _RAMP[lo])
    return "#" + "".join(f"{int(round(c)):02x}" for c in rgb)


def canvas_transform(coords: np.ndarray, size: float = CANVAS, margin: float = MARGIN) -> np.ndarray:
    """Map coords onto a square canvas, preserving aspect ratio and centering
    the bounding box; y grows upward in data and downward on screen."""
    coords = np.asarray(coords, dtype=np.float64)
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    span = float(np.max(hi - lo))
    center = np.full(2, size / 2.0)
    if span <= 0.0:
        return np.tile(center, (coords.shape[0], 1))
    usable = size * (1.0 - 2.0 * margin)
    mid = (lo + hi) / 2.0
    mapped = (coords - mid) / span * usable
    mapped[:, 1] = -mapped[:, 1]
    return mapped + center


def _point_colors(n: int, options: RenderOptions, labels: Optional[Sequence],
                  timestamps: Optional[Sequence]) -> list[str]:
    if options.color_by == "timestamp" and timestamps is not None:
        try:
            t = np.array([float(v) for v in timestamps])
        except (TypeError, ValueError):
            # Non-numeric stamps (e.g. dates) are ordered as given.
            t = np.arange(n, dtype=float)
        rng = t.max() - t.min()
        frac = (t - t.min()) / rng if rng > 0 else np.zeros(n)
        return [ramp_color(f) for f in frac]
    if options.color_by == "label" and labels is not None:
        cats = sorted(set(labels), key=str)
        pos = {c: (k / (len(cats) - 1) if len(cats) > 1 else 0.0) for k, c in enumerate(cats)}
        return [ramp_color(pos[lab]) for lab in labels]
    return [NEUTRAL] * n


def _num(v: float) -> str:
    return f"{v:.3f}"


def render_svg(coords: np.ndarray, graph: TemporalGraph, options: RenderOptions = RenderOptions(),
               labels: Optional[Sequence] = None, timestamps: Optional[Sequence] = None,
               title: Optional[str] = None) -> str:
    """SVG 1.1 document with one ``<circle>`` per point and one
    ``<g class="arrow">`` (line plus head) per edge."""
    xy = canvas_transform(coords)
    n = xy.shape[0]
    colors = _point_colors(n, options, labels, timestamps)
    r = options.point_radius
    h = options.arrow_head
    parts = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{CANVAS:g}" '
        f'height="{CANVAS:g}" viewBox="0 0 {CANVAS:g} {CANVAS:g}">',
        f'<rect width="{CANVAS:g}" height="{CANVAS:g}" fill="white"/>',
    ]
    if title:
        parts.append(f"<title>{escape(title)}</title>")

    parts.append(f'<g id="arrows" stroke="{options.arrow_color}" fill="{options.arrow_color}" '
                 f'stroke-width="{options.arrow_width:g}">')
    for a, b in graph.as_pairs():
        start, end = xy[a], xy[b]
        vec = end - start
        length = float(np.hypot(*vec))
        if length > 0:
            u = vec / length
            # Stop at the target marker's rim; heads shorter than the gap shrink.
            tip = end - u * min(r, length)
            back = tip - u * min(h, max(length - r, 0.0))
        else:
            u = np.array([1.0, 0.0])
            tip = back = end
        normal = np.array([-u[1], u[0]]) * (h / 2.0)
        left, right = back + normal, back - normal
        parts.append(
            f'<g class="arrow"><line x1="{_num(start[0])}" y1="{_num(start[1])}" '
            f'x2="{_num(back[0])}" y2="{_num(back[1])}"/>'
            f'<polygon points="{_num(tip[0])},{_num(tip[1])} {_num(left[0])},{_num(left[1])} '
            f'{_num(right[0])},{_num(right[1])}" stroke="none"/></g>')
    parts.append("</g>")

    parts.append('<g id="points" stroke="none">')
    for i in range(n):
        parts.append(f'<circle class="point" cx="{_num(xy[i, 0])}" cy="{_num(xy[i, 1])}" '
                     f'r="{r:g}" fill="{colors[i]}"/>')
    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
