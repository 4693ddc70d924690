"""Static SVG renderings of the four visualisations.

Fixed 1000x800 canvas with layout-driven scaling; output is built from
sorted inputs with fixed float formatting, so identical payloads render to
identical bytes.
"""

from __future__ import annotations

import math
from typing import Any, Mapping

from .model import Role, WardLayout, entity_color
from .spatial import BEHAVIOR_LABELS, Behavior, hex_center

CANVAS_W = 1000
CANVAS_H = 800
MARGIN = 60

_BEHAVIOR_FILL = "#4878a8"


def _svg(body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS_W}" '
        f'height="{CANVAS_H}" viewBox="0 0 {CANVAS_W} {CANVAS_H}">'
    )
    return "\n".join([head, *body, "</svg>"]) + "\n"


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def render_priority(payload: Mapping[str, Any]) -> str:
    """Bar chart of the behaviour fractions."""
    fractions = payload["fractions"]
    bars = [(b.value, float(fractions[b.value])) for b in Behavior]
    plot_h = CANVAS_H - 2 * MARGIN - 80
    slot_w = (CANVAS_W - 2 * MARGIN) / len(bars)
    bar_w = slot_w * 0.6
    body = [
        f'<rect width="{CANVAS_W}" height="{CANVAS_H}" fill="white"/>',
        f'<text x="{MARGIN}" y="30" font-size="20" font-family="sans-serif">'
        "Team prioritisation behaviours</text>",
    ]
    base_y = MARGIN + plot_h
    for i, (name, fraction) in enumerate(bars):
        x = MARGIN + i * slot_w + (slot_w - bar_w) / 2
        h = plot_h * fraction
        y = base_y - h
        label = BEHAVIOR_LABELS[Behavior(name)]
        body.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(bar_w)}" '
            f'height="{_fmt(h)}" fill="{_BEHAVIOR_FILL}"/>'
        )
        body.append(
            f'<text x="{_fmt(x + bar_w / 2)}" y="{_fmt(y - 6)}" font-size="13" '
            f'text-anchor="middle" font-family="sans-serif">{fraction * 100:.1f}%</text>'
        )
        body.append(
            f'<text x="{_fmt(x + bar_w / 2)}" y="{_fmt(base_y + 16)}" font-size="10" '
            f'text-anchor="middle" font-family="sans-serif">{label}</text>'
        )
    body.append(
        f'<line x1="{MARGIN}" y1="{_fmt(base_y)}" x2="{CANVAS_W - MARGIN}" '
        f'y2="{_fmt(base_y)}" stroke="black"/>'
    )
    return _svg(body)


def _room_transform(layout: WardLayout):
    room_w, room_h = layout.room_mm
    scale = min(
        (CANVAS_W - 2 * MARGIN) / room_w,
        (CANVAS_H - 2 * MARGIN) / room_h,
    )

    def to_px(x_mm: float, y_mm: float) -> tuple[float, float]:
        return (MARGIN + x_mm * scale, CANVAS_H - MARGIN - y_mm * scale)

    return scale, to_px


def render_wardmap(payload: Mapping[str, Any], layout: WardLayout) -> str:
    """Hexbin cells over the ward outline; filled cells mean mostly speaking."""
    scale, to_px = _room_transform(layout)
    radius = float(payload["hex_radius_mm"])
    body = [f'<rect width="{CANVAS_W}" height="{CANVAS_H}" fill="white"/>']
    x0, y0 = to_px(0, layout.room_mm[1])
    body.append(
        f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(layout.room_mm[0] * scale)}" '
        f'height="{_fmt(layout.room_mm[1] * scale)}" fill="none" stroke="black"/>'
    )
    for bed in layout.beds:
        cx, cy = to_px(*bed.center_mm)
        body.append(
            f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(bed.radius_mm * scale)}" '
            f'fill="none" stroke="#999999" stroke-dasharray="4 3"/>'
        )
        body.append(
            f'<text x="{_fmt(cx)}" y="{_fmt(cy)}" font-size="12" text-anchor="middle" '
            f'font-family="sans-serif" fill="#777777">bed {bed.bed_id}</text>'
        )
    for cell in payload["cells"]:
        role = Role(cell["entity"])
        color = layout.color_of(role)
        cx_mm, cy_mm = hex_center(cell["q"], cell["r"], radius)
        points = []
        for k in range(6):
            angle = math.radians(60.0 * k - 30.0)
            px, py = to_px(
                cx_mm + radius * math.cos(angle), cy_mm + radius * math.sin(angle)
            )
            points.append(f"{_fmt(px)},{_fmt(py)}")
        opacity = "0.85" if cell["filled"] else "0.25"
        body.append(
            f'<polygon points="{" ".join(points)}" fill="{color}" '
            f'fill-opacity="{opacity}" stroke="{color}"/>'
        )
    return _svg(body)


def _node_ring(names: list[str]) -> dict[str, tuple[float, float]]:
    cx, cy = CANVAS_W / 2, CANVAS_H / 2
    ring = min(CANVAS_W, CANVAS_H) / 2 - MARGIN - 60
    out = {}
    for i, name in enumerate(names):
        angle = 2 * math.pi * i / len(names) - math.pi / 2
        out[name] = (cx + ring * math.cos(angle), cy + ring * math.sin(angle))
    return out


def render_sociogram(payload: Mapping[str, Any], layout: WardLayout | None = None) -> str:
    """Node-link view: node area tracks speaking time, arrows point at listeners."""
    nodes: dict[str, int] = dict(payload["nodes"])
    names = sorted(nodes)
    body = [f'<rect width="{CANVAS_W}" height="{CANVAS_H}" fill="white"/>']
    if not names:
        body.append(
            f'<text x="{CANVAS_W / 2}" y="{CANVAS_H / 2}" text-anchor="middle" '
            'font-size="18" font-family="sans-serif">no speech in window</text>'
        )
        return _svg(body)
    positions = _node_ring(names)
    max_ms = max(nodes.values()) or 1
    max_edge = max((e["ms"] for e in payload["edges"]), default=1) or 1
    body.append(
        '<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" '
        'markerWidth="7" markerHeight="7" orient="auto-start-reverse">'
        '<path d="M 0 0 L 10 5 L 0 10 z" fill="#555555"/></marker></defs>'
    )
    for edge in payload["edges"]:
        x1, y1 = positions[edge["from"]]
        x2, y2 = positions[edge["to"]]
        width = 1.0 + 7.0 * edge["ms"] / max_edge
        body.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="#555555" stroke-width="{_fmt(width)}" marker-end="url(#arrow)"/>'
        )
    for name in names:
        x, y = positions[name]
        radius = 14.0 + 26.0 * math.sqrt(nodes[name] / max_ms)
        color = (
            layout.color_of(Role(name)) if layout is not None else entity_color(Role(name))
        )
        body.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(radius)}" fill="{color}" '
            'fill-opacity="0.8" stroke="black"/>'
        )
        body.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y + radius + 16)}" font-size="14" '
            f'text-anchor="middle" font-family="sans-serif">{name} '
            f"({nodes[name] // 1000}s)</text>"
        )
    return _svg(body)


def render_network(payload: Mapping[str, Any]) -> str:
    """Code co-occurrence graph on a fixed six-node ring."""
    node_counts: dict[str, int] = dict(payload["node_counts"])
    names = sorted(node_counts)
    body = [f'<rect width="{CANVAS_W}" height="{CANVAS_H}" fill="white"/>']
    if not names:
        body.append(
            f'<text x="{CANVAS_W / 2}" y="{CANVAS_H / 2}" text-anchor="middle" '
            'font-size="18" font-family="sans-serif">no coded utterances in window</text>'
        )
        return _svg(body)
    positions = _node_ring(names)
    max_count = max(node_counts.values()) or 1
    max_edge = max((e["count"] for e in payload["edge_counts"]), default=1) or 1
    for edge in payload["edge_counts"]:
        a, b = edge["codes"]
        x1, y1 = positions[a]
        x2, y2 = positions[b]
        width = 1.0 + 9.0 * edge["count"] / max_edge
        body.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="#777777" stroke-width="{_fmt(width)}"/>'
        )
    for name in names:
        x, y = positions[name]
        radius = 16.0 + 24.0 * math.sqrt(node_counts[name] / max_count)
        body.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(radius)}" fill="#b7cfe8" '
            'stroke="black"/>'
        )
        body.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y + 4)}" font-size="12" text-anchor="middle" '
            f'font-family="sans-serif">{name.lower()} ({node_counts[name]})</text>'
        )
    return _svg(body)


def render(viz_id: str, payload: Mapping[str, Any], layout: WardLayout) -> str:
    if viz_id == "priority":
        return render_priority(payload)
    if viz_id == "wardmap":
        return render_wardmap(payload, layout)
    if viz_id == "sociogram":
        return render_sociogram(payload, layout)
    if viz_id == "network":
        return render_network(payload)
    raise ValueError(f"no renderer for {viz_id!r}")
