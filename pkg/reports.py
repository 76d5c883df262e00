"""CSV tables and small SVG line charts for run outputs.

Both writers are byte-deterministic: fixed column order, '\\n' line endings and
fixed float formatting.
"""

import csv
import io
import logging
import math
from html import escape as html_escape

import settings as app_settings

COLORS = ("#0d6efd", "#dc3545", "#198754", "#fd7e14", "#6f42c1", "#20c997")
FONT = "sans-serif"
MARGIN = {"top": 40, "right": 20, "bottom": 50, "left": 60}


# --- CSV ---
def format_csv(fieldnames, rows):
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


def write_csv(path, fieldnames, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(format_csv(fieldnames, rows))
    logging.info(f"[REPORT] Wrote {len(rows)} rows to {path}")


def trace_rows(trace):
    return trace.rows()


def privacy_rows(curve):
    """One row per (MZ, j): ts, entropy_mean, anonymity_mean."""
    rows = []
    for mz in sorted(curve):
        report = curve[mz].report
        for j, ts in sorted(report.ts_curve.items()):
            rows.append({
                "mz": mz,
                "j": j,
                "ts": repr(ts),
                "entropy_mean": repr(report.mean_entropy),
                "anonymity_mean": repr(report.mean_anonymity_set),
            })
    return rows


# --- SVG ---
def _nice_ticks(lo, hi, max_ticks=6):
    if hi <= lo:
        hi = lo + 1
    raw = (hi - lo) / max(max_ticks - 1, 1)
    magnitude = 10 ** math.floor(math.log10(raw))
    step = magnitude * min((1, 2, 2.5, 5, 10), key=lambda nice: abs(nice * magnitude - raw))
    ticks, value = [], math.floor(lo / step) * step
    while value <= hi + step * 0.01:
        ticks.append(round(value, 10))
        value += step
    return ticks


def _fmt(v):
    if v == 0:
        return "0"
    if abs(v) >= 100:
        return f"{v:.0f}"
    if abs(v) >= 1:
        return f"{v:.2f}"
    return f"{v:.3g}"


def svg_line_chart(title, series, x_label="", y_label="", width=None, height=None):
    """Line chart of {name: [(x, y), ...]} as an SVG document string.

    Non-finite points are skipped.
    """
    width = width or app_settings.DEFAULT_CHART_WIDTH
    height = height or app_settings.DEFAULT_CHART_HEIGHT
    cleaned = {
        name: [(float(x), float(y)) for x, y in points if math.isfinite(x) and math.isfinite(y)]
        for name, points in series.items()
    }
    xs = [x for points in cleaned.values() for x, _ in points] or [0.0, 1.0]
    ys = [y for points in cleaned.values() for _, y in points] or [0.0, 1.0]
    x_ticks = _nice_ticks(min(xs), max(xs))
    y_ticks = _nice_ticks(min(0.0, min(ys)), max(ys))
    x_lo, x_hi = x_ticks[0], x_ticks[-1]
    y_lo, y_hi = y_ticks[0], y_ticks[-1]
    plot_w = width - MARGIN["left"] - MARGIN["right"]
    plot_h = height - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return MARGIN["left"] + plot_w * (x - x_lo) / (x_hi - x_lo)

    def py(y):
        return MARGIN["top"] + plot_h * (1 - (y - y_lo) / (y_hi - y_lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'width="{width}" height="{height}" style="font-family: {FONT}; background: #ffffff">\n',
        f"<title>{html_escape(title)}</title>\n",
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" font-size="15">{html_escape(title)}</text>\n',
    ]
    for tick in y_ticks:
        y = py(tick)
        parts.append(
            f'<line x1="{MARGIN["left"]}" y1="{y:.1f}" x2="{width - MARGIN["right"]}" y2="{y:.1f}" stroke="#e9ecef"/>\n'
            f'<text x="{MARGIN["left"] - 6}" y="{y + 4:.1f}" text-anchor="end" font-size="11">{_fmt(tick)}</text>\n'
        )
    for tick in x_ticks:
        x = px(tick)
        parts.append(
            f'<text x="{x:.1f}" y="{height - MARGIN["bottom"] + 16}" text-anchor="middle" '
            f'font-size="11">{_fmt(tick)}</text>\n'
        )
    parts.append(
        f'<text x="{MARGIN["left"] + plot_w / 2:.1f}" y="{height - 10}" text-anchor="middle" '
        f'font-size="12">{html_escape(x_label)}</text>\n'
        f'<text x="14" y="{MARGIN["top"] + plot_h / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {MARGIN["top"] + plot_h / 2:.1f})">{html_escape(y_label)}</text>\n'
    )
    for index, (name, points) in enumerate(cleaned.items()):
        color = COLORS[index % len(COLORS)]
        if points:
            path = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in points)
            parts.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>\n')
            for x, y in points:
                parts.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="3" fill="{color}"/>\n')
        legend_y = MARGIN["top"] + 14 * index
        parts.append(
            f'<text x="{width - MARGIN["right"] - 4}" y="{legend_y}" text-anchor="end" font-size="11" '
            f'fill="{color}">{html_escape(name)}</text>\n'
        )
    parts.append("</svg>\n")
    return "".join(parts)


def write_svg(path, svg):
    with open(path, "w", encoding="utf-8") as f:
        f.write(svg)
    logging.info(f"[REPORT] Wrote chart {path}")
