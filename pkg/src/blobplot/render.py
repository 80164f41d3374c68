"""Standalone SVG output: the blob plot itself and matrix heatmaps.

Documents are plain strings assembled deterministically (same input, same
bytes). Blobs are drawn fills-first so the thick outlines never hide a
smaller blob: fills sorted by area descending, then every stroke on top in
label order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .errors import ConfigError
from .geometry import BlobGeometry

# categorical palette: blue, orange, green, red, purple, brown, pink, grey,
# pear, light blue
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

# 5-stop white-to-dark-blue ramp for heatmap cells
HEAT_RAMP = (
    (0.00, (255, 255, 255)),
    (0.25, (198, 219, 239)),
    (0.50, (107, 174, 214)),
    (0.75, (33, 113, 181)),
    (1.00, (8, 48, 107)),
)

CANVAS_SIDE = 100.0  # canonical frame side length


@dataclass
class RenderConfig:
    canvas_px: int = 1000
    palette: tuple[str, ...] = PALETTE
    fill_opacity: float = 0.25
    stroke_width_frac: float = 0.008
    legend: bool = True
    heatmap_colormap: str = "blues"

    def __post_init__(self):
        if not 0.0 <= self.fill_opacity <= 1.0:
            raise ConfigError("fill_opacity must be in [0, 1]")
        if self.stroke_width_frac <= 0:
            raise ConfigError("stroke_width_frac must be > 0")
        if self.canvas_px < 16:
            raise ConfigError("canvas_px must be >= 16")
        if len(self.palette) == 0:
            raise ConfigError("palette must hold at least one color")


def color_of(config: RenderConfig, label: int) -> str:
    return config.palette[label % len(config.palette)]


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def _path_data(loops: list[np.ndarray], to_px) -> str:
    parts = []
    for loop in loops:
        if len(loop) == 0:
            continue
        px = to_px(loop)
        parts.append("M " + " L ".join(f"{_fmt(x)} {_fmt(y)}" for x, y in px) + " Z")
    return " ".join(parts)


def render_blobs(blobs: list[BlobGeometry], class_names: list[str],
                 config: RenderConfig) -> str:
    """SVG blob plot of the canonical square.

    One fill path per blob (all loops as even-odd subpaths, so holes stay
    holes) and one full-opacity stroke path per loop.
    """
    if not blobs:
        raise ValueError("nothing to render")
    side = float(config.canvas_px)
    scale = side / CANVAS_SIDE

    def to_px(pts):
        out = np.empty_like(pts)
        out[:, 0] = pts[:, 0] * scale
        out[:, 1] = (CANVAS_SIDE - pts[:, 1]) * scale  # svg y grows downward
        return out

    stroke_w = config.stroke_width_frac * side
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{config.canvas_px}" '
        f'height="{config.canvas_px}" '
        f'viewBox="0 0 {config.canvas_px} {config.canvas_px}">',
        f'<rect width="{config.canvas_px}" height="{config.canvas_px}" '
        f'fill="#ffffff"/>',
    ]
    # large blobs behind small ones
    fill_order = sorted(blobs, key=lambda b: (-b.area, b.label))
    for blob in fill_order:
        if not blob.outline:
            continue
        d = _path_data(blob.outline, to_px)
        lines.append(
            f'<path d="{d}" fill="{color_of(config, blob.label)}" '
            f'fill-opacity="{config.fill_opacity}" fill-rule="evenodd" '
            f'stroke="none"/>'
        )
    for blob in sorted(blobs, key=lambda b: b.label):
        if not blob.outline:
            warnings.warn(f"blob {blob.label} has an empty outline; skipped",
                          RuntimeWarning)
            continue
        for loop in blob.outline:
            d = _path_data([loop], to_px)
            lines.append(
                f'<path d="{d}" fill="none" '
                f'stroke="{color_of(config, blob.label)}" '
                f'stroke-width="{_fmt(stroke_w)}" stroke-linejoin="round"/>'
            )
    if config.legend:
        lines.append('<g id="legend">')
        sw = max(10.0, 0.018 * side)
        x0 = 0.02 * side
        y0 = 0.02 * side
        for k, name in enumerate(class_names):
            y = y0 + k * 1.5 * sw
            lines.append(
                f'<rect x="{_fmt(x0)}" y="{_fmt(y)}" width="{_fmt(sw)}" '
                f'height="{_fmt(sw)}" fill="{color_of(config, k)}" '
                f'fill-opacity="0.8"/>'
            )
            lines.append(
                f'<text x="{_fmt(x0 + 1.4 * sw)}" y="{_fmt(y + 0.8 * sw)}" '
                f'font-family="sans-serif" font-size="{_fmt(sw)}">'
                f'{escape(name)}</text>'
            )
        lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def ramp_color(value: float) -> tuple[int, int, int]:
    """Linear interpolation over the built-in 5-stop ramp, clipped to [0,1]."""
    v = min(1.0, max(0.0, value))
    for (p0, c0), (p1, c1) in zip(HEAT_RAMP, HEAT_RAMP[1:]):
        if v <= p1:
            t = (v - p0) / (p1 - p0)
            return tuple(round(a + t * (b - a)) for a, b in zip(c0, c1))
    return HEAT_RAMP[-1][1]


def _hex(rgb: tuple[int, int, int]) -> str:
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _luminance(rgb: tuple[int, int, int]) -> float:
    r, g, b = rgb
    return (0.299 * r + 0.587 * g + 0.114 * b) / 255.0


def render_heatmap(matrix: np.ndarray, names: list[str],
                   config: RenderConfig, title: str = "") -> str:
    """SVG grid of the matrix with 2-decimal annotations and axis labels."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("heatmap needs a square matrix")
    m = matrix.shape[0]
    if len(names) != m:
        raise ValueError(f"{len(names)} names for a {m}x{m} matrix")
    side = float(config.canvas_px)
    margin = 0.18 * side
    title_h = 0.05 * side if title else 0.0
    cell = (side - margin) / m
    font = max(6.0, min(0.35 * cell, 0.022 * side))
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{config.canvas_px}" '
        f'height="{_fmt(side + title_h)}" '
        f'viewBox="0 0 {config.canvas_px} {_fmt(side + title_h)}">',
        f'<rect width="{config.canvas_px}" height="{_fmt(side + title_h)}" '
        f'fill="#ffffff"/>',
    ]
    if title:
        lines.append(
            f'<text x="{_fmt(margin)}" y="{_fmt(0.035 * side)}" '
            f'font-family="sans-serif" font-size="{_fmt(0.025 * side)}">'
            f'{escape(title)}</text>'
        )
    for i in range(m):
        for j in range(m):
            rgb = ramp_color(matrix[i, j])
            x = margin + j * cell
            y = title_h + margin + i * cell
            lines.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(cell)}" '
                f'height="{_fmt(cell)}" fill="{_hex(rgb)}"/>'
            )
            text_fill = "#ffffff" if _luminance(rgb) < 0.5 else "#000000"
            lines.append(
                f'<text x="{_fmt(x + cell / 2)}" y="{_fmt(y + cell / 2 + font / 3)}" '
                f'text-anchor="middle" font-family="sans-serif" '
                f'font-size="{_fmt(font)}" fill="{text_fill}">'
                f'{matrix[i, j]:.2f}</text>'
            )
    label_font = min(font, 0.8 * margin / max(1, max(len(n) for n in names)))
    label_font = max(6.0, label_font * 2)
    for i, name in enumerate(names):
        y = title_h + margin + i * cell + cell / 2
        lines.append(
            f'<text x="{_fmt(margin - 0.01 * side)}" y="{_fmt(y + label_font / 3)}" '
            f'text-anchor="end" font-family="sans-serif" '
            f'font-size="{_fmt(label_font)}">{escape(name)}</text>'
        )
        x = margin + i * cell + cell / 2
        lines.append(
            f'<text x="{_fmt(x)}" y="{_fmt(title_h + margin - 0.01 * side)}" '
            f'text-anchor="end" font-family="sans-serif" '
            f'font-size="{_fmt(label_font)}" '
            f'transform="rotate(-60 {_fmt(x)} {_fmt(title_h + margin - 0.01 * side)})">'
            f'{escape(name)}</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
