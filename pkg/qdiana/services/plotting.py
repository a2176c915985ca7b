"""Standalone SVG line charts with a logarithmic y axis."""
import math
from dataclasses import dataclass
from html import escape
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

from qdiana.exceptions import InvalidInputError

PANEL_WIDTH = 420
PANEL_HEIGHT = 300
MARGIN = 56
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2")
PANELS = (
    ("k", "f_gap", "iterations", "F(x) - F*"),
    ("bits_up_cum", "f_gap", "uplink bits", "F(x) - F*"),
    ("k", "dist_sq", "iterations", "||x - x*||²"),
    ("bits_up_cum", "dist_sq", "uplink bits", "||x - x*||²"),
)


@dataclass(frozen=True)
class Series:
    label: str
    rows: List[Dict[str, float]]


def _positive_points(rows: Sequence[Dict[str, float]], x_key: str, y_key: str) -> List[Tuple[float, float]]:
    return [
        (row[x_key], math.log10(row[y_key]))
        for row in rows
        if math.isfinite(row[y_key]) and row[y_key] > 0 and math.isfinite(row[x_key])
    ]


def _panel(series: Sequence[Series], x_key: str, y_key: str, x_label: str, y_label: str, left: int, top: int) -> List[str]:
    curves = [_positive_points(item.rows, x_key, y_key) for item in series]
    points = [point for curve in curves for point in curve]
    parts = [
        f'<rect x="{left + MARGIN}" y="{top + 10}" width="{PANEL_WIDTH - MARGIN - 10}" '
        f'height="{PANEL_HEIGHT - MARGIN - 10}" fill="none" stroke="#444"/>'
    ]
    if not points:
        return parts

    x_low, x_high = min(p[0] for p in points), max(p[0] for p in points)
    y_low, y_high = math.floor(min(p[1] for p in points)), math.ceil(max(p[1] for p in points))
    x_span = (x_high - x_low) or 1.0
    y_span = (y_high - y_low) or 1.0
    width = PANEL_WIDTH - MARGIN - 10
    height = PANEL_HEIGHT - MARGIN - 10

    def place(x: float, y: float) -> Tuple[float, float]:
        return (
            left + MARGIN + (x - x_low) / x_span * width,
            top + 10 + (1.0 - (y - y_low) / y_span) * height,
        )

    step = max(1, (y_high - y_low) // 6)
    for exponent in range(y_low, y_high + 1, step):
        _, y = place(x_low, exponent)
        parts.append(f'<line x1="{left + MARGIN}" y1="{y:.2f}" x2="{left + MARGIN + width}" y2="{y:.2f}" stroke="#ddd"/>')
        parts.append(f'<text x="{left + MARGIN - 6}" y="{y + 4:.2f}" font-size="10" text-anchor="end">1e{exponent}</text>')
    parts.append(
        f'<text x="{left + MARGIN}" y="{top + PANEL_HEIGHT - 30}" font-size="10">{x_low:.4g}</text>'
        f'<text x="{left + MARGIN + width}" y="{top + PANEL_HEIGHT - 30}" font-size="10" text-anchor="end">{x_high:.4g}</text>'
        f'<text x="{left + MARGIN + width / 2:.2f}" y="{top + PANEL_HEIGHT - 12}" font-size="11" '
        f'text-anchor="middle">{escape(x_label)}</text>'
        f'<text x="{left + 14}" y="{top + 10 + height / 2:.2f}" font-size="11" text-anchor="middle" '
        f'transform="rotate(-90 {left + 14} {top + 10 + height / 2:.2f})">{escape(y_label)}</text>'
    )

    for index, curve in enumerate(curves):
        if not curve:
            continue
        coordinates = " ".join(f"{x:.2f},{y:.2f}" for x, y in (place(*point) for point in curve))
        parts.append(
            f'<polyline points="{coordinates}" fill="none" stroke="{PALETTE[index % len(PALETTE)]}" stroke-width="1.5"/>'
        )
    return parts


def render_svg(series: Sequence[Series]) -> str:
    if not series:
        raise InvalidInputError("nothing to plot")
    legend_height = 18 * len(series) + 10
    total_width = 2 * PANEL_WIDTH
    total_height = 2 * PANEL_HEIGHT + legend_height
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{total_width}" height="{total_height}" '
        f'viewBox="0 0 {total_width} {total_height}" font-family="sans-serif">',
        f'<rect width="{total_width}" height="{total_height}" fill="white"/>',
    ]
    for position, (x_key, y_key, x_label, y_label) in enumerate(PANELS):
        left = (position % 2) * PANEL_WIDTH
        top = (position // 2) * PANEL_HEIGHT
        parts.extend(_panel(series, x_key, y_key, x_label, y_label, left, top))

    for index, item in enumerate(series):
        y = 2 * PANEL_HEIGHT + 14 + 18 * index
        color = PALETTE[index % len(PALETTE)]
        parts.append(f'<line x1="{MARGIN}" y1="{y - 4}" x2="{MARGIN + 24}" y2="{y - 4}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{MARGIN + 30}" y="{y}" font-size="11">{escape(item.label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(series: Sequence[Series], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_svg(series), encoding="utf-8")
    return path
