"""Deterministic SVG scatter plots.

Positions are projected top-down onto the dominant plane of all plotted
points. Output is plain SVG text with fixed-precision coordinates, so a rerun
on identical inputs is byte-identical and diffable.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .validation import stack_vectors

TRAINING_COLOR = "red"
TEST_COLOR = "green"
PREDICTION_COLORS = ("blue", "purple", "cyan")

_CANVAS = 640
_MARGIN = 60


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _projection_basis(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    centroid = points.mean(axis=0)
    centered = points - centroid
    _, singular_values, axes = np.linalg.svd(centered, full_matrices=True)
    if singular_values[0] < 1e-12:
        return centroid, np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    return centroid, axes[0], axes[1]


class _Canvas:
    def __init__(self, all_points: np.ndarray):
        self.centroid, self.axis_u, self.axis_v = _projection_basis(all_points)
        local = (all_points - self.centroid) @ np.stack([self.axis_u, self.axis_v]).T
        span = max(float(np.ptp(local[:, 0])), float(np.ptp(local[:, 1])), 1e-6)
        self.scale = (_CANVAS - 2 * _MARGIN) / span
        self.min_u = float(local[:, 0].min())
        self.min_v = float(local[:, 1].min())

    def to_pixels(self, points: np.ndarray) -> np.ndarray:
        local = (points - self.centroid) @ np.stack([self.axis_u, self.axis_v]).T
        x = _MARGIN + (local[:, 0] - self.min_u) * self.scale
        y = _CANVAS - _MARGIN - (local[:, 1] - self.min_v) * self.scale
        return np.stack([x, y], axis=1)


def _svg_header(lines: list[str]) -> None:
    lines.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{_CANVAS}" '
                 f'height="{_CANVAS}" viewBox="0 0 {_CANVAS} {_CANVAS}">')
    lines.append(f'<rect x="0" y="0" width="{_CANVAS}" height="{_CANVAS}" '
                 'fill="white" stroke="black"/>')


def _scale_bar(lines: list[str], scale: float) -> None:
    bar = scale  # one meter
    x0, y0 = _MARGIN, _CANVAS - _MARGIN / 2
    lines.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x0 + bar)}" '
                 f'y2="{_fmt(y0)}" stroke="black" stroke-width="2"/>')
    lines.append(f'<text x="{_fmt(x0 + bar / 2)}" y="{_fmt(y0 - 6)}" font-size="12" '
                 'text-anchor="middle">1 m</text>')


def _legend(lines: list[str], labels: Sequence[tuple[str, str]]) -> None:
    for i, (label, color) in enumerate(labels):
        y = _MARGIN / 2 + 16 * i
        lines.append(f'<circle cx="{_fmt(_MARGIN)}" cy="{_fmt(y)}" r="4" fill="{color}"/>')
        lines.append(f'<text x="{_fmt(_MARGIN + 10)}" y="{_fmt(y + 4)}" '
                     f'font-size="12">{label}</text>')


def trajectory_svg(groups: Sequence[tuple[str, str, np.ndarray]]) -> str:
    """Scatter of labeled position groups, e.g. [(label, color, (m, 3) array)].

    Training data is conventionally red, ground-truth test data green, and
    method predictions blue/purple/cyan in slot order.
    """
    if not groups:
        raise ValueError("need at least one group")
    stacked = np.concatenate([stack_vectors(g[2], 3, g[0]) for g in groups])
    canvas = _Canvas(stacked)
    lines: list[str] = []
    _svg_header(lines)
    _legend(lines, [(label, color) for label, color, _ in groups])
    for label, color, points in groups:
        pixels = canvas.to_pixels(stack_vectors(points, 3, label))
        for x, y in pixels:
            lines.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3" fill="{color}" '
                         'fill-opacity="0.8"/>')
    _scale_bar(lines, canvas.scale)
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _heat_color(t: float) -> str:
    """Cold blue (small) to warm red (large)."""
    t = min(max(t, 0.0), 1.0)
    red = int(round(255 * t))
    blue = int(round(255 * (1.0 - t)))
    return f"rgb({red},60,{blue})"


def base_translation_svg(translations: np.ndarray, weights: np.ndarray,
                         orientation_only=None) -> str:
    """Scatter of base translations; point size and color scale with the given
    per-base weight statistic (warm colors and large points for large weights).

    `orientation_only` marks bases with a zero translation block in split
    heads; those are drawn as squares and labeled separately.
    """
    translations = stack_vectors(translations, 3, "translations")
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (translations.shape[0],):
        raise ValueError("need one weight per base translation")
    if orientation_only is None:
        orientation_only = np.zeros(translations.shape[0], dtype=bool)
    orientation_only = np.asarray(orientation_only, dtype=bool)

    canvas = _Canvas(translations)
    peak = float(np.max(np.abs(weights))) if weights.size else 0.0
    scale = peak if peak > 0.0 else 1.0
    lines: list[str] = []
    _svg_header(lines)
    legend = [("position base", _heat_color(1.0))]
    if bool(orientation_only.any()):
        legend.append(("orientation-only base", "gray"))
    _legend(lines, legend)
    pixels = canvas.to_pixels(translations)
    for i, (x, y) in enumerate(pixels):
        t = abs(float(weights[i])) / scale
        radius = 2.0 + 6.0 * t
        if orientation_only[i]:
            lines.append(f'<rect x="{_fmt(x - radius)}" y="{_fmt(y - radius)}" '
                         f'width="{_fmt(2 * radius)}" height="{_fmt(2 * radius)}" '
                         'fill="gray" fill-opacity="0.8"/>')
        else:
            lines.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(radius)}" '
                         f'fill="{_heat_color(t)}" fill-opacity="0.8"/>')
    _scale_bar(lines, canvas.scale)
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
