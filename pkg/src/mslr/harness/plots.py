"""Plot artifacts from experiment CSVs.

:func:`emit_plots` writes two files next to a prefix: ``<prefix>.gp`` (a
self-contained gnuplot script with the data inlined) and ``<prefix>.svg``
(rendered by the small SVG writer below, so no plotting library is needed).
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

from ..errors import SchemaMismatch

__all__ = ["PLOT_KINDS", "SvgCanvas", "emit_plots"]

PLOT_KINDS = ("phase", "chi2", "roc", "recovery")
_REQUIRED = {
    "phase": ("k", "value", "status"),
    "chi2": ("n", "D", "chi2", "status"),
    "roc": ("fpr", "tpr", "n_used", "status"),
    "recovery": ("n_used", "metric", "value", "status"),
}
_PALETTE = ("#1b6ca8", "#d1495b", "#66a182", "#edae49", "#6a4c93", "#2e4057", "#8d96a3")

WIDTH, HEIGHT = 640, 480
LEFT, RIGHT, TOP, BOTTOM = 80, 140, 40, 60


class SvgCanvas:
    """Append-only SVG document with the few primitives the charts need."""

    def __init__(self, width: int = WIDTH, height: int = HEIGHT) -> None:
        self.width, self.height = width, height
        self._items: list[str] = []

    def rect(self, x, y, w, h, fill, stroke="none") -> None:
        self._items.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" fill="{fill}" stroke="{stroke}"/>'
        )

    def line(self, x1, y1, x2, y2, stroke="#000", width=1.0) -> None:
        self._items.append(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" stroke="{stroke}" stroke-width="{width}"/>'
        )

    def polyline(self, points, stroke="#000", width=1.5) -> None:
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
        self._items.append(f'<polyline points="{pts}" fill="none" stroke="{stroke}" stroke-width="{width}"/>')

    def circle(self, x, y, r, fill) -> None:
        self._items.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r}" fill="{fill}"/>')

    def text(self, x, y, s, size=12, anchor="middle", rotate=None) -> None:
        transform = f' transform="rotate({rotate} {x:.2f} {y:.2f})"' if rotate is not None else ""
        self._items.append(
            f'<text x="{x:.2f}" y="{y:.2f}" font-family="sans-serif" font-size="{size}" '
            f'text-anchor="{anchor}"{transform}>{escape(str(s))}</text>'
        )

    def render(self) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">'
        )
        body = "\n".join(self._items)
        return f'<?xml version="1.0" encoding="UTF-8"?>\n{head}\n<rect width="100%" height="100%" fill="white"/>\n{body}\n</svg>\n'


class _Axes:
    """Maps data coordinates into the plot rectangle, optionally log10 in y."""

    def __init__(self, canvas: SvgCanvas, xlim, ylim, log_y: bool = False) -> None:
        self.c = canvas
        self.log_y = log_y
        self.x0, self.x1 = _pad_range(*xlim)
        y0, y1 = ylim
        if log_y:
            y0, y1 = math.log10(y0), math.log10(y1)
        self.y0, self.y1 = _pad_range(y0, y1)
        self.px0, self.px1 = LEFT, canvas.width - RIGHT
        self.py0, self.py1 = canvas.height - BOTTOM, TOP

    def sx(self, x: float) -> float:
        return self.px0 + (x - self.x0) / (self.x1 - self.x0) * (self.px1 - self.px0)

    def sy(self, y: float) -> float:
        if self.log_y:
            y = math.log10(y)
        return self.py0 + (y - self.y0) / (self.y1 - self.y0) * (self.py1 - self.py0)

    def frame(self, xlabel: str, ylabel: str, title: str) -> None:
        c = self.c
        c.rect(self.px0, self.py1, self.px1 - self.px0, self.py0 - self.py1, "none", "#000")
        for i in range(5):
            fx = self.x0 + (self.x1 - self.x0) * i / 4
            fy = self.y0 + (self.y1 - self.y0) * i / 4
            px = self.px0 + (self.px1 - self.px0) * i / 4
            py = self.py0 + (self.py1 - self.py0) * i / 4
            c.line(px, self.py0, px, self.py0 + 5)
            c.text(px, self.py0 + 18, f"{fx:.3g}", size=10)
            c.line(self.px0 - 5, py, self.px0, py)
            label = f"1e{fy:.2g}" if self.log_y else f"{fy:.3g}"
            c.text(self.px0 - 8, py + 4, label, size=10, anchor="end")
        c.text((self.px0 + self.px1) / 2, c.height - 15, xlabel)
        c.text(20, (self.py0 + self.py1) / 2, ylabel, rotate=-90)
        c.text((self.px0 + self.px1) / 2, 22, title, size=14)


def _pad_range(lo: float, hi: float) -> tuple[float, float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return 0.0, 1.0
    if hi == lo:
        return lo - 0.5, hi + 0.5
    return lo, hi


def _read_rows(path) -> tuple[list[str], list[dict]]:
    text = Path(path).read_text()
    if not text.strip():
        return [], []
    reader = csv.DictReader(text.splitlines())
    return list(reader.fieldnames or []), list(reader)


def _ok(rows: list[dict]) -> list[dict]:
    return [r for r in rows if r.get("status") == "ok"]


def _color(value: float) -> str:
    """White-to-blue ramp for values in [0, 1]."""
    v = min(1.0, max(0.0, value))
    r = int(round(255 - v * (255 - 27)))
    g = int(round(255 - v * (255 - 108)))
    b = int(round(255 - v * (255 - 168)))
    return f"#{r:02x}{g:02x}{b:02x}"


def _series_plot(canvas, series: dict, xlabel, ylabel, title, log_y=False):
    """Line chart; ``series`` maps a label to a sorted list of (x, y)."""
    pts = [pt for s in series.values() for pt in s]
    if log_y:
        pts = [(x, y) for x, y in pts if y > 0]
    if pts:
        xs, ys = [p[0] for p in pts], [p[1] for p in pts]
        axes = _Axes(canvas, (min(xs), max(xs)), (min(ys), max(ys)), log_y)
    else:
        axes = _Axes(canvas, (0.0, 1.0), (1.0, 10.0) if log_y else (0.0, 1.0), log_y)
    axes.frame(xlabel, ylabel, title)
    for i, (label, s) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        s = [(x, y) for x, y in s if y > 0] if log_y else s
        if not s:
            continue
        mapped = [(axes.sx(x), axes.sy(y)) for x, y in s]
        canvas.polyline(mapped, stroke=color)
        for x, y in mapped:
            canvas.circle(x, y, 2.5, color)
        ly = TOP + 16 * i + 10
        canvas.line(canvas.width - RIGHT + 10, ly, canvas.width - RIGHT + 30, ly, stroke=color, width=2)
        canvas.text(canvas.width - RIGHT + 35, ly + 4, label, size=10, anchor="start")


def _gnuplot_series(series: dict, xlabel, ylabel, title, log_y=False) -> str:
    lines = [f'set title "{title}"', f'set xlabel "{xlabel}"', f'set ylabel "{ylabel}"']
    if log_y:
        lines.append("set logscale y")
    plots = []
    for i, (label, s) in enumerate(series.items()):
        lines.append(f"$s{i} << EOD")
        lines.extend(f"{x!r} {y!r}" for x, y in s)
        lines.append("EOD")
        plots.append(f'$s{i} using 1:2 with linespoints title "{label}"')
    lines.append("plot " + ", \\\n     ".join(plots) if plots else "plot [0:1] [0:1] NaN notitle")
    return "\n".join(lines) + "\n"


def _phase(rows):
    x_key = "n_mult" if rows and "n_mult" in rows[0] else "n_used"
    cells: dict[tuple[float, float], float] = {}
    for r in _ok(rows):
        key = (float(r[x_key]), float(r["k"]))
        cells.setdefault(key, float(r["value"]))
    return x_key, cells


def _draw_phase(canvas, x_key, cells):
    xs = sorted({x for x, _ in cells})
    ys = sorted({y for _, y in cells})
    px0, px1 = LEFT, canvas.width - RIGHT
    py0, py1 = canvas.height - BOTTOM, TOP
    canvas.rect(px0, py1, px1 - px0, py0 - py1, "none", "#000")
    canvas.text((px0 + px1) / 2, canvas.height - 15, x_key)
    canvas.text(20, (py0 + py1) / 2, "k", rotate=-90)
    canvas.text((px0 + px1) / 2, 22, "success rate", size=14)
    if not cells:
        return
    w = (px1 - px0) / len(xs)
    h = (py0 - py1) / len(ys)
    for (x, y), v in sorted(cells.items()):
        i, j = xs.index(x), ys.index(y)
        canvas.rect(px0 + i * w, py0 - (j + 1) * h, w, h, _color(v), "#888")
        canvas.text(px0 + (i + 0.5) * w, py0 - (j + 0.5) * h + 4, f"{v:.2f}", size=10)
    for i, x in enumerate(xs):
        canvas.text(px0 + (i + 0.5) * w, py0 + 18, f"{x:g}", size=10)
    for j, y in enumerate(ys):
        canvas.text(px0 - 8, py0 - (j + 0.5) * h + 4, f"{y:g}", size=10, anchor="end")


def _gnuplot_phase(x_key, cells) -> str:
    lines = ['set title "success rate"', f'set xlabel "{x_key}"', 'set ylabel "k"',
             "set cbrange [0:1]", "$grid << EOD"]
    lines.extend(f"{x!r} {y!r} {v!r}" for (x, y), v in sorted(cells.items()))
    lines.append("EOD")
    lines.append("plot $grid using 1:2:3 with image notitle" if cells else "plot [0:1] [0:1] NaN notitle")
    return "\n".join(lines) + "\n"


def emit_plots(csv_path, kind: str, out_prefix) -> tuple[Path, Path]:
    """Write ``<out_prefix>.gp`` and ``<out_prefix>.svg`` for a CSV of the given kind."""
    if kind not in PLOT_KINDS:
        raise SchemaMismatch(f"plot kind must be one of {PLOT_KINDS}, got {kind!r}")
    header, rows = _read_rows(csv_path)
    if header:
        missing = [c for c in _REQUIRED[kind] if c not in header]
        if kind == "phase" and "n_mult" not in header and "n_used" not in header:
            missing.append("n_mult|n_used")
        if missing:
            raise SchemaMismatch(f"{kind} plot needs columns {missing}")
    canvas = SvgCanvas()
    if kind == "phase":
        x_key, cells = _phase(rows)
        _draw_phase(canvas, x_key, cells)
        script = _gnuplot_phase(x_key, cells)
    else:
        series: dict[str, list] = {}
        if kind == "chi2":
            for r in _ok(rows):
                series.setdefault(f"D={r['D']}", []).append((float(r["n"]), float(r["chi2"])))
            labels = ("n", "chi2", "low-degree chi-square", True)
        elif kind == "roc":
            for r in _ok(rows):
                series.setdefault(f"n={r['n_used']}", []).append((float(r["fpr"]), float(r["tpr"])))
            labels = ("false positive rate", "true positive rate", "ROC", False)
        else:
            for r in _ok(rows):
                if r["metric"] == "rho_mean":
                    series.setdefault(r.get("pipeline", "rho"), []).append((float(r["n_used"]), float(r["value"])))
            labels = ("n", "mean rho", "recovery error", False)
        series = {k: sorted(v) for k, v in series.items()}
        _series_plot(canvas, series, *labels)
        script = _gnuplot_series(series, *labels)
    prefix = Path(out_prefix)
    gp_path, svg_path = prefix.with_name(prefix.name + ".gp"), prefix.with_name(prefix.name + ".svg")
    gp_path.write_text(f'set terminal svg size {WIDTH},{HEIGHT}\nset output "{svg_path.name}"\n' + script)
    svg_path.write_text(canvas.render())
    return gp_path, svg_path
