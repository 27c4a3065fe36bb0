"""Structured output: CSV tables, JSON reports and static SVG log-log plots."""

from __future__ import annotations

import csv
import io
import json
import math
import os

import numpy as np

from .sweep import SweepRow

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def rows_to_csv(rows):
    """CSV text with a fixed header and 17-significant-digit floats."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = SweepRow.columns()
    w.writerow(cols)
    for r in rows:
        d = r.as_dict() if hasattr(r, "as_dict") else r
        w.writerow([_fmt(d[c]) for c in cols])
    return buf.getvalue()


def records_to_csv(records):
    """CSV text for flat dicts sharing the keys of the first record."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = list(records[0]) if records else []
    w.writerow(cols)
    for r in records:
        w.writerow([_fmt(r[c]) if isinstance(r[c], (int, float, np.number)) else r[c]
                    for c in cols])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


def report_json(config, payload):
    """JSON text echoing the config source verbatim next to the results."""
    doc = {"config_source": config.source, "config": config.raw}
    doc.update(payload)
    return json.dumps(_jsonable(doc), indent=2, sort_keys=False) + "\n"


def svg_loglog(rows, series, width=480, height=360):
    """Static log-log plot with one polyline per ``(xcol, ycol)`` series."""
    get = lambda r, c: r[c] if isinstance(r, dict) else getattr(r, c)
    pad = 50
    data = []
    for xc, yc in series:
        pts = [(float(get(r, xc)), abs(float(get(r, yc)))) for r in rows]
        pts = [(x, y) for x, y in pts if x > 0 and y > 0 and math.isfinite(x * y)]
        data.append(sorted(pts))
    allx = [math.log10(x) for d in data for x, _ in d] or [0.0, 1.0]
    ally = [math.log10(y) for d in data for _, y in d] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    sx = lambda v: pad + (math.log10(v) - x0) / (x1 - x0) * (width - 2 * pad)
    sy = lambda v: height - pad - (math.log10(v) - y0) / (y1 - y0) * (height - 2 * pad)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" '
           f'height="{height - 2 * pad}" fill="none" stroke="black"/>']
    for i, ((xc, yc), pts) in enumerate(zip(series, data)):
        col = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{col}" points="{coords}">'
                   f'<title>{yc} vs {xc}</title></polyline>')
        out.append(f'<text x="{pad + 5}" y="{pad + 15 * (i + 1)}" fill="{col}" '
                   f'font-size="12">{yc} vs {xc}</text>')
    out.append(f'<text x="{width / 2}" y="{height - 10}" font-size="12" '
               f'text-anchor="middle">log10 x: [{x0:.2f}, {x1:.2f}]</text>')
    out.append(f'<text x="10" y="{pad - 10}" font-size="12">'
               f'log10 y: [{y0:.2f}, {y1:.2f}]</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_text(path, text):
    """Write UTF-8 text, creating parent directories; ``OSError`` propagates."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def emit(rows, fmt, out_dir, config=None, payload=None, plots=(), stem="sweep"):
    """Write the requested outputs and return their paths."""
    paths = []
    if fmt in ("csv", "both"):
        p = os.path.join(out_dir, f"{stem}.csv")
        write_text(p, rows_to_csv(rows))
        paths.append(p)
    if fmt in ("json", "both") and config is not None:
        p = os.path.join(out_dir, f"{stem}.json")
        body = dict(payload or {})
        body.setdefault("rows", [r.as_dict() if hasattr(r, "as_dict") else r for r in rows])
        write_text(p, report_json(config, body))
        paths.append(p)
    if plots and rows:
        series = [tuple(s.split(":")) for s in plots]
        p = os.path.join(out_dir, f"{stem}.svg")
        write_text(p, svg_loglog(rows, series))
        paths.append(p)
    return paths
