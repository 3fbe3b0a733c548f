"""Standalone SVG 1.1 figures: survival curves, forest plots, histograms.

Output depends only on the inputs; every coordinate is printed with a
fixed number of decimals so files are byte-reproducible.
"""

import math
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
FONT = "font-family=\"Helvetica, Arial, sans-serif\""


def _f(x):
    text = f"{x:.2f}"
    return "0.00" if text == "-0.00" else text


def nice_ticks(lo, hi, target=6):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 10))
        v += step
    return ticks


def _tick_label(v):
    return f"{v:g}"


class _Doc:
    def __init__(self, width, height, title):
        self.width, self.height = width, height
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">',
            f"<title>{escape(title)}</title>",
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        ]

    def add(self, text):
        self.parts.append(text)

    def text(self, x, y, s, anchor="start", size=12, weight=None, color="#000000"):
        w = f' font-weight="{weight}"' if weight else ""
        self.add(f'<text x="{_f(x)}" y="{_f(y)}" text-anchor="{anchor}" font-size="{size}" {FONT}'
                 f' fill="{color}"{w}>{escape(str(s))}</text>')

    def line(self, x1, y1, x2, y2, color="#000000", width=1, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.add(f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
                 f'stroke="{color}" stroke-width="{width}"{d}/>')

    def render(self):
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def km_figure(curves, follow_up=None, title="Kaplan-Meier survival", time_label="Months",
              p_value=None, width=720, height=520):
    """Step curves with confidence bands, a legend and a numbers-at-risk table.

    `follow_up` maps each curve label to its observed times; the risk table
    counts subjects with time >= each axis tick. Without it the table is
    left out.
    """
    doc = _Doc(width, height, title)
    left, right, top = 80, width - 30, 50
    n_rows = max(len(curves), 1)
    table_h = 24 + 18 * n_rows
    bottom = height - 60 - table_h
    t_max = max((c.last_time for c in curves.values()), default=1.0)
    xticks = nice_ticks(0.0, t_max)
    x_hi = max(xticks[-1], t_max)

    def px(t):
        return left + (right - left) * t / x_hi

    def py(s):
        return bottom - (bottom - top) * s

    doc.text(width / 2, 28, title, anchor="middle", size=16, weight="bold")
    for s in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0):
        doc.line(left, py(s), right, py(s), color="#e0e0e0")
        doc.text(left - 8, py(s) + 4, f"{s:.1f}", anchor="end", size=11)
    for t in xticks:
        doc.line(px(t), bottom, px(t), bottom + 5)
        doc.text(px(t), bottom + 18, _tick_label(t), anchor="middle", size=11)
    doc.line(left, bottom, right, bottom)
    doc.line(left, top, left, bottom)
    doc.text(width / 2, bottom + 36, time_label, anchor="middle", size=12)
    doc.add(f'<text x="20" y="{_f((top + bottom) / 2)}" text-anchor="middle" font-size="12" {FONT} '
            f'transform="rotate(-90 20 {_f((top + bottom) / 2)})">Survival probability</text>')

    for k, (label, c) in enumerate(curves.items()):
        color = PALETTE[k % len(PALETTE)]
        times = [0.0] + [float(t) for t in c.event_times] + [c.last_time]
        surv = [1.0] + [float(s) for s in c.survival]
        lo = [1.0] + [float(v) for v in c.ci_lower]
        hi = [1.0] + [float(v) for v in c.ci_upper]
        upper_pts, lower_pts = [], []
        for j in range(len(surv)):
            t0, t1 = times[j], times[j + 1]
            upper_pts += [(px(t0), py(hi[j])), (px(t1), py(hi[j]))]
            lower_pts += [(px(t0), py(lo[j])), (px(t1), py(lo[j]))]
        band = " ".join(f"{_f(x)},{_f(y)}" for x, y in upper_pts + lower_pts[::-1])
        doc.add(f'<polygon class="band" points="{band}" fill="{color}" fill-opacity="0.15" stroke="none"/>')
        d = [f"M{_f(px(0.0))},{_f(py(1.0))}"]
        for j in range(1, len(surv)):
            d.append(f"H{_f(px(times[j]))}V{_f(py(surv[j]))}")
        d.append(f"H{_f(px(c.last_time))}")
        doc.add(f'<path class="curve" d="{"".join(d)}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = top + 10 + 18 * k
        doc.line(right - 170, ly, right - 150, ly, color=color, width=2)
        doc.text(right - 145, ly + 4, label, size=11)
    if p_value is not None:
        ptxt = "log-rank p < 0.0001" if p_value < 1e-4 else f"log-rank p = {p_value:.4f}"
        doc.text(left + 10, bottom - 12, ptxt, size=11)

    if follow_up is not None:
        ty = bottom + 60
        doc.text(left - 70, ty, "At risk", size=11, weight="bold")
        for k, label in enumerate(curves):
            times = np.sort(np.asarray(follow_up[label], dtype=float))
            row_y = ty + 18 * (k + 1)
            doc.text(left - 70, row_y, str(label)[:12], size=10, color=PALETTE[k % len(PALETTE)])
            for t in xticks:
                n_at_risk = len(times) - int(np.searchsorted(times, t, side="left"))
                doc.text(px(t), row_y, str(n_at_risk), anchor="middle", size=10)
    return doc.render()


def forest_plot(rows, title="Hazard ratios", width=720, row_height=34):
    """Forest plot on a log-scaled hazard-ratio axis with a reference line at 1.

    `rows` is a sequence of ``(label, hr, lower, upper)``.
    """
    rows = list(rows)
    height = 110 + row_height * max(len(rows), 1)
    doc = _Doc(width, height, title)
    left, right, top = 200, width - 130, 50
    bottom = top + row_height * max(len(rows), 1)
    vals = [v for r in rows for v in r[1:4] if v > 0 and math.isfinite(v)] + [1.0]
    lo_v, hi_v = min(vals) / 1.15, max(vals) * 1.15
    llo, lhi = math.log(lo_v), math.log(hi_v)

    def px(v):
        v = min(max(v, lo_v), hi_v)
        return left + (right - left) * (math.log(v) - llo) / (lhi - llo)

    doc.text(width / 2, 28, title, anchor="middle", size=16, weight="bold")
    doc.line(left, bottom, right, bottom)
    for t in _log_ticks(lo_v, hi_v):
        doc.line(px(t), bottom, px(t), bottom + 5)
        doc.text(px(t), bottom + 18, f"{t:g}", anchor="middle", size=11)
    doc.text((left + right) / 2, bottom + 38, "Hazard ratio (log scale)", anchor="middle", size=12)
    doc.line(px(1.0), top - 10, px(1.0), bottom, color="#888888", dash="4,3")
    doc.text(right + 10, top - 14, "HR (95% CI)", size=11, weight="bold")
    for i, (label, hr, lo, hi) in enumerate(rows):
        y = top + row_height * (i + 0.5)
        doc.add('<g class="estimate">')
        doc.text(left - 10, y + 4, label, anchor="end", size=12)
        doc.line(px(lo), y, px(hi), y, width=1.5)
        doc.line(px(lo), y - 5, px(lo), y + 5, width=1.5)
        doc.line(px(hi), y - 5, px(hi), y + 5, width=1.5)
        doc.add(f'<rect x="{_f(px(hr) - 5)}" y="{_f(y - 5)}" width="10" height="10" fill="{PALETTE[0]}"/>')
        doc.text(right + 10, y + 4, f"{hr:.3f} ({lo:.3f}-{hi:.3f})", size=11)
        doc.add("</g>")
    return doc.render()


def _log_ticks(lo, hi):
    cands = []
    for e in range(math.floor(math.log10(lo)) - 1, math.ceil(math.log10(hi)) + 1):
        for m in (1, 2, 5):
            v = m * 10.0 ** e
            if lo <= v <= hi:
                cands.append(float(f"{v:.12g}"))
    if len(cands) < 3:
        cands = sorted(set(cands + [float(f"{v:.3g}") for v in np.geomspace(lo, hi, 5)]))
    return cands


def histogram_figure(edges, counts, title="Distribution of log odds of survival",
                     x_label="Log odds of survival", width=640, height=420):
    doc = _Doc(width, height, title)
    left, right, top, bottom = 70, width - 30, 50, height - 60
    edges = [float(e) for e in edges]
    counts = [int(c) for c in counts]
    x_lo, x_hi = edges[0], edges[-1]
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    y_hi = max(max(counts, default=1), 1)
    yticks = nice_ticks(0.0, y_hi, target=5)
    y_top = max(yticks[-1], y_hi)

    def px(v):
        return left + (right - left) * (v - x_lo) / (x_hi - x_lo)

    def py(c):
        return bottom - (bottom - top) * c / y_top

    doc.text(width / 2, 28, title, anchor="middle", size=16, weight="bold")
    for c in yticks:
        doc.line(left, py(c), right, py(c), color="#e0e0e0")
        doc.text(left - 8, py(c) + 4, _tick_label(c), anchor="end", size=11)
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        doc.add(f'<rect class="bar" x="{_f(px(lo))}" y="{_f(py(c))}" width="{_f(px(hi) - px(lo))}" '
                f'height="{_f(py(0) - py(c))}" fill="{PALETTE[0]}" stroke="#ffffff" stroke-width="0.5"/>')
    doc.line(left, bottom, right, bottom)
    doc.line(left, top, left, bottom)
    for t in nice_ticks(x_lo, x_hi):
        if x_lo <= t <= x_hi:
            doc.line(px(t), bottom, px(t), bottom + 5)
            doc.text(px(t), bottom + 18, _tick_label(t), anchor="middle", size=11)
    doc.text(width / 2, bottom + 38, x_label, anchor="middle", size=12)
    doc.add(f'<text x="20" y="{_f((top + bottom) / 2)}" text-anchor="middle" font-size="12" {FONT} '
            f'transform="rotate(-90 20 {_f((top + bottom) / 2)})">Count</text>')
    return doc.render()

