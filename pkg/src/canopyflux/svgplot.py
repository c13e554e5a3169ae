"""Hand-rolled SVG line chart for weekly transpiration.

SVG is textual and diffable, which keeps chart regression tests exact:
contiguous week runs map 1:1 to ``<polyline>`` elements (gap weeks break
the line) and every data point also gets a circle marker, so vertex counts
can be asserted against the input series.
"""

from __future__ import annotations

import math
from pathlib import Path

from .errors import EmptyInput
from .sapflow import PlotTranspirationSeries
from .weeks import week_index

WIDTH, HEIGHT = 840, 420
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 72, 24, 48, 56


def _nice_ticks(top: float, n: int = 5) -> list[float]:
    if top <= 0:
        return [0.0, 1.0]
    raw = top / n
    mag = 10 ** math.floor(math.log10(raw))
    for mult in (1, 2, 2.5, 5, 10):
        step = mult * mag
        if step >= raw:
            break
    ticks = []
    v = 0.0
    while v <= top + 1e-9:
        ticks.append(round(v, 10))
        v += step
    return ticks


def render_weekly_series(weekly: PlotTranspirationSeries) -> str:
    """SVG document for one site's weekly series (x: ISO week, y: mm/day)."""
    if not weekly.values:
        raise EmptyInput("no weekly values to plot")
    weeks = [str(w) for w, _ in weekly.values]
    values = [v for _, v in weekly.values]
    origin = weeks[0]
    xs = [week_index(w, origin) for w in weeks]
    span = max(xs[-1], 1)
    top = max(values) * 1.1 or 1.0
    ticks = _nice_ticks(top)
    top = max(top, ticks[-1])

    def px(i: int) -> float:
        return MARGIN_LEFT + (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) * i / span

    def py(v: float) -> float:
        return HEIGHT - MARGIN_BOTTOM - (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM) * v / top

    # split into contiguous runs; a missing week index is a gap
    runs: list[list[tuple[float, float]]] = [[]]
    for pos, (i, v) in enumerate(zip(xs, values)):
        if pos > 0 and i - xs[pos - 1] != 1:
            runs.append([])
        runs[-1].append((px(i), py(v)))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<title>{weekly.site_id}</title>',
        f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="16">'
        f"Weekly canopy transpiration - {weekly.site_id}</text>",
        # axes
        f'<line x1="{MARGIN_LEFT}" y1="{py(0.0):.2f}" x2="{WIDTH - MARGIN_RIGHT}" '
        f'y2="{py(0.0):.2f}" stroke="black"/>',
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" '
        f'y2="{py(0.0):.2f}" stroke="black"/>',
        f'<text x="{(WIDTH + MARGIN_LEFT - MARGIN_RIGHT) / 2:.1f}" y="{HEIGHT - 12}" '
        f'text-anchor="middle">ISO week</text>',
        f'<text x="18" y="{(HEIGHT + MARGIN_TOP - MARGIN_BOTTOM) / 2:.1f}" '
        f'text-anchor="middle" transform="rotate(-90 18 '
        f'{(HEIGHT + MARGIN_TOP - MARGIN_BOTTOM) / 2:.1f})">transpiration (mm/day)</text>',
    ]
    for tick in ticks:
        y = py(tick)
        out.append(
            f'<line x1="{MARGIN_LEFT - 4}" y1="{y:.2f}" x2="{MARGIN_LEFT}" y2="{y:.2f}" '
            f'stroke="black"/>'
        )
        out.append(
            f'<text x="{MARGIN_LEFT - 8}" y="{y + 4:.2f}" text-anchor="end">{tick:g}</text>'
        )
    label_step = max(1, len(weeks) // 8)
    for pos in range(0, len(weeks), label_step):
        x = px(xs[pos])
        out.append(
            f'<line x1="{x:.2f}" y1="{py(0.0):.2f}" x2="{x:.2f}" y2="{py(0.0) + 4:.2f}" '
            f'stroke="black"/>'
        )
        out.append(
            f'<text x="{x:.2f}" y="{py(0.0) + 18:.2f}" text-anchor="middle" font-size="10">'
            f"{weeks[pos]}</text>"
        )
    for run in runs:
        points = " ".join(f"{x:.2f},{y:.2f}" for x, y in run)
        out.append(f'<polyline fill="none" stroke="#2a6f97" stroke-width="1.5" points="{points}"/>')
    for run in runs:
        for x, y in run:
            out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="#2a6f97"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_weekly_series_svg(path: str | Path, weekly: PlotTranspirationSeries) -> None:
    Path(path).write_text(render_weekly_series(weekly))
