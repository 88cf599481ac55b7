"""Trace persistence and plots.

Traces are stored as CSV with header ``lambda,x_1,...,x_n,J0,J1,grad_norm,
min_eig`` and floats in shortest round-trip form (``repr``), so reading a
file back reproduces every value exactly. Plots are plain SVG documents
built from the CSV files, never from in-memory traces.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .integrate import TraceRecord

PALETTE = ("#1f5fa8", "#c4452b", "#2e8b57", "#8a5fb0", "#b8860b", "#4a4a4a")


def format_float(v: float) -> str:
    return repr(float(v))


def csv_header(n: int) -> list[str]:
    return ["lambda", *(f"x_{i}" for i in range(1, n + 1)),
            "J0", "J1", "grad_norm", "min_eig"]


def write_trace_csv(path, records: Sequence[TraceRecord]) -> None:
    if not records:
        raise ValueError("no records to write")
    n = records[0].x.size
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(n))
        for r in records:
            w.writerow([format_float(r.lam), *(format_float(v) for v in r.x),
                        format_float(r.J0), format_float(r.J1),
                        format_float(r.grad_norm), format_float(r.min_eigenvalue)])


@dataclass(frozen=True)
class TraceTable:
    lambdas: np.ndarray
    points: np.ndarray
    J0: np.ndarray
    J1: np.ndarray
    grad_norm: np.ndarray
    min_eig: np.ndarray

    def records(self) -> list[TraceRecord]:
        return [TraceRecord(float(self.lambdas[i]), self.points[i].copy(),
                            float(self.J0[i]), float(self.J1[i]),
                            float(self.grad_norm[i]), float(self.min_eig[i]))
                for i in range(self.lambdas.size)]


def read_trace_csv(path) -> TraceTable:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n = len(header) - 5
    if n < 1 or header != csv_header(n):
        raise ValueError(f"{path}: not a trace CSV")
    data = np.array([[float(v) for v in row] for row in body], dtype=float).reshape(-1, n + 5)
    return TraceTable(data[:, 0], data[:, 1:n + 1], data[:, n + 1], data[:, n + 2],
                      data[:, n + 3], data[:, n + 4])


# -- SVG ----------------------------------------------------------------------

def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    """Round tick positions; the first is <= lo and the last >= hi."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi <= lo:
        pad = abs(lo) * 0.05 or 1.0
        lo, hi = lo - pad, hi + pad
    raw = (hi - lo) / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.floor(lo / step + 1e-9)
    stop = math.ceil(hi / step - 1e-9)
    return [k * step for k in range(start, stop + 1)]


def _label(v: float) -> str:
    if v == 0:
        return "0"
    if 1e-3 <= abs(v) < 1e4:
        return f"{v:.6g}"
    return f"{v:.2e}"


@dataclass(frozen=True)
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    markers: bool = True


class _Panel:
    """One set of linear axes inside an SVG canvas."""

    def __init__(self, left, top, width, height, xs, ys):
        self.left, self.top, self.width, self.height = left, top, width, height
        xs = np.concatenate([np.asarray(v, dtype=float) for v in xs]) if xs else np.zeros(1)
        ys = np.concatenate([np.asarray(v, dtype=float) for v in ys]) if ys else np.zeros(1)
        xs, ys = xs[np.isfinite(xs)], ys[np.isfinite(ys)]
        self.xticks = nice_ticks(*self._extent(xs))
        self.yticks = nice_ticks(*self._extent(ys))
        self.x0, self.x1 = self._range(xs, self.xticks)
        self.y0, self.y1 = self._range(ys, self.yticks)

    @staticmethod
    def _extent(v):
        return (float(v.min()), float(v.max())) if v.size else (0.0, 1.0)

    @staticmethod
    def _range(v, ticks):
        lo = min([*ticks, float(v.min())]) if v.size else 0.0
        hi = max([*ticks, float(v.max())]) if v.size else 1.0
        if hi == lo:
            hi = lo + 1.0
        return lo, hi

    def px(self, x):
        return self.left + (x - self.x0) / (self.x1 - self.x0) * self.width

    def py(self, y):
        return self.top + self.height - (y - self.y0) / (self.y1 - self.y0) * self.height

    def axes(self, xlabel, ylabel, title) -> list[str]:
        l, t, w, h = self.left, self.top, self.width, self.height
        out = [f'<rect x="{l:.1f}" y="{t:.1f}" width="{w:.1f}" height="{h:.1f}" '
               'fill="none" stroke="#333" stroke-width="1"/>']
        for v in self.xticks:
            x = self.px(v)
            out.append(f'<line x1="{x:.1f}" y1="{t + h:.1f}" x2="{x:.1f}" y2="{t + h + 5:.1f}" '
                       'stroke="#333"/>')
            out.append(f'<line x1="{x:.1f}" y1="{t:.1f}" x2="{x:.1f}" y2="{t + h:.1f}" '
                       'stroke="#ddd" stroke-width="0.5"/>')
            out.append(f'<text x="{x:.1f}" y="{t + h + 18:.1f}" text-anchor="middle">'
                       f'{_label(v)}</text>')
        for v in self.yticks:
            y = self.py(v)
            out.append(f'<line x1="{l - 5:.1f}" y1="{y:.1f}" x2="{l:.1f}" y2="{y:.1f}" '
                       'stroke="#333"/>')
            out.append(f'<line x1="{l:.1f}" y1="{y:.1f}" x2="{l + w:.1f}" y2="{y:.1f}" '
                       'stroke="#ddd" stroke-width="0.5"/>')
            out.append(f'<text x="{l - 8:.1f}" y="{y + 4:.1f}" text-anchor="end">'
                       f'{_label(v)}</text>')
        out.append(f'<text x="{l + w / 2:.1f}" y="{t + h + 38:.1f}" text-anchor="middle">'
                   f'{escape(xlabel)}</text>')
        out.append(f'<text transform="translate({l - 62:.1f},{t + h / 2:.1f}) rotate(-90)" '
                   f'text-anchor="middle">{escape(ylabel)}</text>')
        out.append(f'<text x="{l + w / 2:.1f}" y="{t - 10:.1f}" text-anchor="middle" '
                   f'font-weight="bold">{escape(title)}</text>')
        return out

    def series(self, s: Series, color: str) -> list[str]:
        ok = np.isfinite(s.x) & np.isfinite(s.y)
        pts = [(self.px(a), self.py(b)) for a, b in zip(s.x[ok], s.y[ok])]
        if not pts:
            return []
        path = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
        out = [f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>']
        if s.markers:
            out += [f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="{color}"/>'
                    for x, y in pts]
        return out

    def legend(self, series: Sequence[Series]) -> list[str]:
        out = []
        for i, s in enumerate(series):
            y = self.top + 14 + 16 * i
            x = self.left + self.width - 150
            color = PALETTE[i % len(PALETTE)]
            out.append(f'<line x1="{x:.1f}" y1="{y - 4:.1f}" x2="{x + 18:.1f}" y2="{y - 4:.1f}" '
                       f'stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{x + 24:.1f}" y="{y:.1f}">{escape(s.label)}</text>')
        return out


def _document(width, height, body: Iterable[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">\n'
            f'<rect width="{width}" height="{height}" fill="white"/>\n')
    return head + "\n".join(body) + "\n</svg>\n"


def line_chart(series: Sequence[Series], xlabel: str, ylabel: str, title: str,
               width: int = 640, height: int = 440) -> str:
    panel = _Panel(80, 40, width - 110, height - 100,
                   [s.x for s in series], [s.y for s in series])
    body = panel.axes(xlabel, ylabel, title)
    for i, s in enumerate(series):
        body += panel.series(s, PALETTE[i % len(PALETTE)])
    if len(series) > 1:
        body += panel.legend(series)
    return _document(width, height, body)


def svg_front(csv_paths: Sequence, out_path, labels: Sequence[str] | None = None) -> None:
    """(J0, J1) front of every trace CSV in one chart."""
    series = []
    for i, p in enumerate(csv_paths):
        t = read_trace_csv(p)
        label = labels[i] if labels else Path(p).stem
        series.append(Series(label, t.J0, t.J1, markers=(i == 0)))
    Path(out_path).write_text(line_chart(series, "J0", "J1", "Pareto front"),
                              encoding="utf-8")


def svg_diagnostics(csv_path, out_path, width: int = 640, height: int = 760) -> None:
    """Gradient norm and smallest Hessian eigenvalue against the weight."""
    t = read_trace_csv(csv_path)
    ph = (height - 160) / 2
    top = _Panel(90, 40, width - 120, ph, [t.lambdas], [t.grad_norm])
    bottom = _Panel(90, 40 + ph + 80, width - 120, ph, [t.lambdas], [t.min_eig])
    body = top.axes("lambda", "|grad J_lambda|", "First-order optimality")
    body += top.series(Series("grad", t.lambdas, t.grad_norm), PALETTE[0])
    body += bottom.axes("lambda", "min eigenvalue", "Second-order optimality")
    body += bottom.series(Series("eig", t.lambdas, t.min_eig), PALETTE[1])
    Path(out_path).write_text(_document(width, height, body), encoding="utf-8")
