"""
Static SVG panels: root clouds, branch points (larger, filled) and level-curve
polylines on a fixed viewBox = data extent + 10% margin. Output is byte-stable.
"""
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence, Union
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
PIXELS = 600


@dataclass
class Layer:
    points: np.ndarray
    color: str = PALETTE[0]
    kind: str = "cloud"  # cloud | branch | polyline
    label: str = ""


@dataclass
class Panel:
    title: str
    layers: list = field(default_factory=list)
    annotation: str = ""

    def add_cloud(self, points: Sequence[complex], color: str, label: str = "") -> "Panel":
        self.layers.append(Layer(np.asarray(points, dtype=complex), color, "cloud", label))
        return self

    def add_branch_points(self, points: Sequence[complex]) -> "Panel":
        self.layers.append(Layer(np.asarray(points, dtype=complex), "#000000", "branch", "branch points"))
        return self

    def add_polyline(self, points: Sequence[complex], color: str, label: str = "") -> "Panel":
        self.layers.append(Layer(np.asarray(points, dtype=complex), color, "polyline", label))
        return self


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _extent(panel: Panel) -> tuple[float, float, float, float]:
    pts = [layer.points for layer in panel.layers if layer.points.size]
    if not pts:
        return -1.0, -1.0, 1.0, 1.0
    allp = np.concatenate(pts)
    x0, x1 = float(allp.real.min()), float(allp.real.max())
    y0, y1 = float(allp.imag.min()), float(allp.imag.max())
    span = max(x1 - x0, y1 - y0)
    if span == 0:
        span = 2.0
        x0, x1, y0, y1 = x0 - 1, x1 + 1, y0 - 1, y1 + 1
    margin = 0.1 * span
    return x0 - margin, y0 - margin, x1 + margin, y1 + margin


def render(panel: Panel, timestamp: bool = False) -> str:
    x0, y0, x1, y1 = _extent(panel)
    width, height = x1 - x0, y1 - y0
    span = max(width, height)
    dot = 0.006 * span
    big = 0.018 * span
    # y is flipped so the imaginary axis points up
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{PIXELS}" height="{int(round(PIXELS * height / width))}" '
        f'viewBox="{_fmt(x0)} {_fmt(-y1)} {_fmt(width)} {_fmt(height)}">',
        f"<title>{escape(panel.title)}</title>",
    ]
    if timestamp:
        out.append(f"<metadata>{datetime.now(timezone.utc).isoformat()}</metadata>")
    out.append(f'<rect x="{_fmt(x0)}" y="{_fmt(-y1)}" width="{_fmt(width)}" height="{_fmt(height)}" fill="#ffffff"/>')
    for layer in panel.layers:
        group = f'<g fill="{layer.color}" stroke="none">' if layer.kind != "polyline" else \
            f'<g fill="none" stroke="{layer.color}" stroke-width="{_fmt(0.004 * span)}">'
        out.append(group)
        if layer.kind == "polyline":
            coords = " ".join(f"{_fmt(p.real)},{_fmt(-p.imag)}" for p in layer.points)
            out.append(f'<polyline points="{coords}"/>')
        else:
            r = big if layer.kind == "branch" else dot
            for p in layer.points:
                out.append(f'<circle cx="{_fmt(p.real)}" cy="{_fmt(-p.imag)}" r="{_fmt(r)}"/>')
        out.append("</g>")
    if panel.annotation:
        out.append(
            f'<text x="{_fmt(x0 + 0.02 * span)}" y="{_fmt(-y1 + 0.05 * span)}" font-size="{_fmt(0.035 * span)}" '
            f'fill="#333333">{escape(panel.annotation)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_panel(path: Union[str, Path], panel: Panel, timestamp: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render(panel, timestamp), encoding="utf-8")
    return path


def root_panels(
    clouds: dict,
    branch_pts: Sequence[complex],
    title: str,
) -> list:
    """One panel per family plus the union panel; `clouds` maps family → roots."""
    note = f"{len(branch_pts)} branch points"
    panels = []
    for idx, (j, pts) in enumerate(sorted(clouds.items())):
        panel = Panel(title=f"{title} family {j}", annotation=note)
        panel.add_cloud(pts, PALETTE[idx % len(PALETTE)], f"family {j}")
        panel.add_branch_points(branch_pts)
        panels.append(panel)
    union = Panel(title=f"{title} union", annotation=note)
    for idx, (j, pts) in enumerate(sorted(clouds.items())):
        union.add_cloud(pts, PALETTE[idx % len(PALETTE)], f"family {j}")
    union.add_branch_points(branch_pts)
    panels.append(union)
    return panels
