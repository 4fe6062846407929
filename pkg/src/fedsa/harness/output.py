"""Trace CSVs, summary JSON and SVG error plots."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ..algorithms import RunTrace
from ..errors import EmptyInput, InvalidInput

TRACE_HEADER = ("round", "d_t", "max_drift", "theta_norm")
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
           "#7f7f7f", "#bcbd22", "#17becf")


def _fmt(x: float) -> str:
    return "%.17g" % x


def _write_rows(columns: dict[str, np.ndarray], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = len(columns["d_t"])
    lines = [",".join(TRACE_HEADER)]
    for t in range(n):
        lines.append(",".join([str(t)] + [_fmt(float(columns[k][t])) for k in TRACE_HEADER[1:]]))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def write_trace_csv(trace: RunTrace, path) -> Path:
    if len(trace.d) == 0:
        raise EmptyInput("trace has no rounds")
    return _write_rows({"d_t": trace.d, "max_drift": trace.max_drift,
                        "theta_norm": trace.theta_norm}, path)


def mean_columns(traces) -> dict[str, np.ndarray]:
    """Across-seed averages, summed in the order the traces are given."""
    traces = list(traces)
    if not traces:
        raise EmptyInput("no traces to average")
    if len({len(t.d) for t in traces}) != 1:
        raise InvalidInput("traces have different lengths")
    out = {}
    for key, attr in (("d_t", "d"), ("max_drift", "max_drift"), ("theta_norm", "theta_norm")):
        total = np.zeros(len(traces[0].d))
        for t in traces:
            total = total + getattr(t, attr)
        out[key] = total / len(traces)
    return out


def write_mean_trace_csv(traces, path) -> Path:
    return _write_rows(mean_columns(traces), path)


def read_trace_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or tuple(lines[0].split(",")) != TRACE_HEADER:
        raise InvalidInput(f"{path}: not a trace CSV")
    rows = [line.split(",") for line in lines[1:] if line]
    cols = {name: np.array([float(r[j]) for r in rows]) for j, name in enumerate(TRACE_HEADER)}
    cols["round"] = cols["round"].astype(int)
    return cols


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def emit_plot_svg(csv_paths, path, width: int = 800, height: int = 500) -> Path:
    """Log-scale ``d_t`` against round, one polyline per CSV, legend from file stems.

    Zero entries are drawn at the smallest positive value present in any trace.
    """
    csv_paths = [Path(p) for p in csv_paths]
    if not csv_paths:
        raise EmptyInput("no traces to plot")
    series = [(p.stem, read_trace_csv(p)) for p in csv_paths]
    positive = [v for _, s in series for v in s["d_t"] if v > 0 and math.isfinite(v)]
    floor = min(positive) if positive else 1e-300
    logs = [(name, s["round"], np.log10(np.maximum(s["d_t"], floor))) for name, s in series]
    y_lo = math.floor(min(float(y.min()) for _, _, y in logs))
    y_hi = math.ceil(max(float(y.max()) for _, _, y in logs))
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1, y_hi + 1
    x_hi = max(int(r.max()) for _, r, _ in logs) or 1
    left, right, top, bottom = 70, 170, 20, 50
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + pw * x / x_hi

    def sy(y):
        return top + ph * (y_hi - y) / (y_hi - y_lo)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
             f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="white" stroke="black"/>']
    step = max(1, (y_hi - y_lo) // 10)
    for e in range(y_lo, y_hi + 1, step):
        y = sy(e)
        parts.append(f'<line x1="{left}" y1="{y:.2f}" x2="{left + pw}" y2="{y:.2f}" stroke="#ddd"/>')
        parts.append(f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end">1e{e}</text>')
    for k in range(5):
        x = x_hi * k / 4
        parts.append(f'<text x="{sx(x):.2f}" y="{top + ph + 18}" text-anchor="middle">{x:g}</text>')
    parts.append(f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">round</text>')
    parts.append(f'<text x="16" y="{top + ph / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {top + ph / 2})">d_t (log10)</text>')
    for j, (name, rounds, y) in enumerate(logs):
        color = PALETTE[j % len(PALETTE)]
        pts = " ".join(f"{sx(float(r)):.2f},{sy(float(v)):.2f}" for r, v in zip(rounds, y))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 14 + 18 * j
        parts.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        label = name.replace("&", "&amp;").replace("<", "&lt;")
        parts.append(f'<text x="{left + pw + 34}" y="{ly}">{label}</text>')
    parts.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n")
    return path
