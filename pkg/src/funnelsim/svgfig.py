"""Minimal native SVG line charts (no plotting dependency).

Figures produced here are for eyeball inspection of runs; every numeric
claim lives in the CSV trace.  Panels stack vertically; each panel draws a
framed axis box, min/max tick labels and a set of polylines.
"""

import math

__all__ = ["Series", "Panel", "render_panels"]


class Series:
    def __init__(self, x, y, color="#1f77b4", width=1.2, dash=None, label=None):
        self.x = list(map(float, x))
        self.y = list(map(float, y))
        self.color = color
        self.width = width
        self.dash = dash
        self.label = label


class Panel:
    def __init__(self, series, title="", ylabel=""):
        self.series = series
        self.title = title
        self.ylabel = ylabel


def _finite(vals):
    return [v for v in vals if math.isfinite(v)]


def _frame(panel):
    xs = [v for s in panel.series for v in _finite(s.x)]
    ys = [v for s in panel.series for v in _finite(s.y)]
    if not xs or not ys:
        return (0.0, 1.0, 0.0, 1.0)
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 - x0 < 1e-12:
        x1 = x0 + 1.0
    pad = 0.05 * (y1 - y0) if y1 - y0 > 1e-12 else 0.5
    return (x0, x1, y0 - pad, y1 + pad)


def _fmt(v):
    return f"{v:.4g}"


def render_panels(panels, width=760, panel_height=230):
    """Render stacked panels to an SVG document string."""
    margin_l, margin_r, margin_t, margin_b = 64, 16, 28, 30
    total_h = panel_height * len(panels)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{total_h}" viewBox="0 0 {width} {total_h}" '
        f'font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{total_h}" fill="white"/>',
    ]
    for idx, panel in enumerate(panels):
        top = idx * panel_height
        x0, x1, y0, y1 = _frame(panel)
        px0, px1 = margin_l, width - margin_r
        py0, py1 = top + margin_t, top + panel_height - margin_b

        def sx(v, x0=x0, x1=x1, px0=px0, px1=px1):
            return px0 + (v - x0) / (x1 - x0) * (px1 - px0)

        def sy(v, y0=y0, y1=y1, py0=py0, py1=py1):
            return py1 - (v - y0) / (y1 - y0) * (py1 - py0)

        parts.append(
            f'<rect x="{px0}" y="{py0}" width="{px1 - px0}" '
            f'height="{py1 - py0}" fill="none" stroke="#444"/>'
        )
        if panel.title:
            parts.append(
                f'<text x="{(px0 + px1) / 2:.1f}" y="{py0 - 8:.1f}" '
                f'text-anchor="middle" font-weight="bold">{panel.title}</text>'
            )
        # min/max ticks on both axes
        parts.append(
            f'<text x="{px0 - 6:.1f}" y="{sy(y0):.1f}" text-anchor="end">'
            f"{_fmt(y0)}</text>"
        )
        parts.append(
            f'<text x="{px0 - 6:.1f}" y="{sy(y1) + 9:.1f}" text-anchor="end">'
            f"{_fmt(y1)}</text>"
        )
        parts.append(
            f'<text x="{px0:.1f}" y="{py1 + 14:.1f}" text-anchor="middle">'
            f"{_fmt(x0)}</text>"
        )
        parts.append(
            f'<text x="{px1:.1f}" y="{py1 + 14:.1f}" text-anchor="middle">'
            f"{_fmt(x1)}</text>"
        )
        if y0 < 0.0 < y1:
            zy = sy(0.0)
            parts.append(
                f'<line x1="{px0}" y1="{zy:.2f}" x2="{px1}" y2="{zy:.2f}" '
                f'stroke="#bbb" stroke-width="0.6"/>'
            )
        legend_x = px0 + 8
        for s in panel.series:
            pts = []
            for xv, yv in zip(s.x, s.y):
                if math.isfinite(xv) and math.isfinite(yv):
                    # clip grossly out-of-frame points (infinite funnel radii)
                    yv = min(max(yv, y0), y1)
                    pts.append(f"{sx(xv):.2f},{sy(yv):.2f}")
            if len(pts) < 2:
                continue
            dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
            parts.append(
                f'<polyline points="{" ".join(pts)}" fill="none" '
                f'stroke="{s.color}" stroke-width="{s.width}"{dash}/>'
            )
            if s.label:
                parts.append(
                    f'<text x="{legend_x}" y="{py0 + 14}" fill="{s.color}">'
                    f"{s.label}</text>"
                )
                legend_x += 9 * len(s.label) + 18
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
