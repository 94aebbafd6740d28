"""Space-time diagrams of a trajectory trace, written as plain SVG."""

from __future__ import annotations

from typing import Sequence

from contact_lab.graphs import Graph, Leaf

MARGIN_LEFT = 48
MARGIN_TOP = 24
MARGIN_BOTTOM = 16
COLUMN = 10.0
HEIGHT = 480.0


def infected_intervals(trace: Sequence[tuple], t_end: float) -> list[tuple[int, float, float]]:
    """``(vertex, start, stop)`` for every infected stretch in ``trace``."""
    open_at: dict[int, float] = {}
    spans = []
    for t, kind, v, _src in trace:
        if kind in ("I", "T"):
            open_at.setdefault(v, t)
        elif kind == "R" and v in open_at:
            spans.append((v, open_at.pop(v), t))
    spans.extend((v, s, t_end) for v, s in open_at.items())
    spans.sort(key=lambda x: (x[0], x[1]))
    return spans


def render_space_time(g: Graph, trace: Sequence[tuple], t_end: float) -> str:
    """Vertices along x in id order (line first, then leaves), time downward.

    Infected stretches are red bars, recoveries black ticks, effective
    transmissions blue arrows from source to target column.
    """
    n = len(g)
    t_end = t_end if t_end > 0 else 1.0
    width = MARGIN_LEFT + COLUMN * max(n, 1) + 8
    height = MARGIN_TOP + HEIGHT + MARGIN_BOTTOM

    def x(v: int) -> float:
        return MARGIN_LEFT + COLUMN * (v + 0.5)

    def y(t: float) -> float:
        return MARGIN_TOP + HEIGHT * min(t, t_end) / t_end

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1f}" height="{height:.1f}" '
        f'viewBox="0 0 {width:.1f} {height:.1f}">',
        "<defs><marker id=\"arrow\" viewBox=\"0 0 6 6\" refX=\"6\" refY=\"3\" markerWidth=\"5\" "
        "markerHeight=\"5\" orient=\"auto\"><path d=\"M0,0 L6,3 L0,6 z\" fill=\"#1f5fbf\"/></marker></defs>",
        f'<rect x="0" y="0" width="{width:.1f}" height="{height:.1f}" fill="white"/>',
    ]
    for v in range(n):
        stroke = "#dddddd" if isinstance(g.labels[v], Leaf) else "#bbbbbb"
        out.append(f'<line x1="{x(v):.2f}" y1="{y(0):.2f}" x2="{x(v):.2f}" y2="{y(t_end):.2f}" '
                   f'stroke="{stroke}" stroke-width="0.5"/>')
    for k in range(5):
        t = t_end * k / 4
        out.append(f'<text x="4" y="{y(t) + 4:.2f}" font-size="9" font-family="monospace">{t:.3g}</text>')
    for v, s, e in infected_intervals(trace, t_end):
        out.append(f'<line x1="{x(v):.2f}" y1="{y(s):.2f}" x2="{x(v):.2f}" y2="{y(e):.2f}" '
                   f'stroke="#c62828" stroke-width="3"/>')
    for t, kind, v, src in trace:
        if t > t_end:
            break
        if kind == "R":
            out.append(f'<line x1="{x(v) - 3:.2f}" y1="{y(t):.2f}" x2="{x(v) + 3:.2f}" y2="{y(t):.2f}" '
                       f'stroke="black" stroke-width="1"/>')
        elif kind == "T" and src >= 0:
            out.append(f'<line x1="{x(src):.2f}" y1="{y(t):.2f}" x2="{x(v):.2f}" y2="{y(t):.2f}" '
                       f'stroke="#1f5fbf" stroke-width="1" marker-end="url(#arrow)"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def format_trace(trace: Sequence[tuple]) -> str:
    """Trace lines ``<time> <R|T> <vertex> [<source>]``; initial infections go in a header."""
    init = [v for t, kind, v, _ in trace if kind == "I"]
    rows = ["# init=" + ",".join(str(v) for v in init)]
    for t, kind, v, src in trace:
        if kind == "R":
            rows.append(f"{t:.17g} R {v}")
        elif kind == "T":
            rows.append(f"{t:.17g} T {v} {src}")
    return "\n".join(rows) + "\n"
