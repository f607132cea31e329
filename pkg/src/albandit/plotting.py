"""Dependency-free SVG rendering of regret curves and refinement traces."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .harness import read_regret_csv, read_snapshot_csv

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 160, 30, 50


def color_for(index: int) -> str:
    return PALETTE[index % len(PALETTE)]


def _num(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** np.floor(np.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = np.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(float(round(v / step) * step))
        v += step
    return ticks


class _Canvas:
    def __init__(self, title: str, xlabel: str, ylabel: str, xr: tuple[float, float], yr: tuple[float, float]):
        self.x0, self.x1 = xr if xr[1] > xr[0] else (xr[0], xr[0] + 1.0)
        self.y0, self.y1 = yr if yr[1] > yr[0] else (yr[0], yr[0] + 1.0)
        self.parts: list[str] = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2:.0f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        ]
        self._axes(xlabel, ylabel)

    def px(self, x) -> np.ndarray:
        w = WIDTH - LEFT - RIGHT
        return LEFT + (np.asarray(x, dtype=float) - self.x0) / (self.x1 - self.x0) * w

    def py(self, y) -> np.ndarray:
        h = HEIGHT - TOP - BOTTOM
        return HEIGHT - BOTTOM - (np.asarray(y, dtype=float) - self.y0) / (self.y1 - self.y0) * h

    def _axes(self, xlabel: str, ylabel: str) -> None:
        xb, yb = HEIGHT - BOTTOM, LEFT
        p = self.parts
        p.append('<g class="axes" stroke="black" stroke-width="1">')
        p.append(f'<line x1="{LEFT}" y1="{xb}" x2="{WIDTH - RIGHT}" y2="{xb}"/>')
        p.append(f'<line x1="{yb}" y1="{TOP}" x2="{yb}" y2="{xb}"/>')
        p.append("</g>")
        for t in _nice_ticks(self.x0, self.x1):
            x = _num(float(self.px(t)))
            p.append(f'<line x1="{x}" y1="{xb}" x2="{x}" y2="{xb + 5}" stroke="black"/>')
            p.append(f'<text x="{x}" y="{xb + 18}" text-anchor="middle" font-size="11">{t:g}</text>')
        for t in _nice_ticks(self.y0, self.y1):
            y = _num(float(self.py(t)))
            p.append(f'<line x1="{yb - 5}" y1="{y}" x2="{yb}" y2="{y}" stroke="black"/>')
            p.append(f'<text x="{yb - 8}" y="{y}" text-anchor="end" dominant-baseline="middle" '
                     f'font-size="11">{t:g}</text>')
        p.append(f'<text x="{(LEFT + WIDTH - RIGHT) / 2:.0f}" y="{HEIGHT - 12}" text-anchor="middle" '
                 f'font-size="12">{escape(xlabel)}</text>')
        p.append(f'<text x="16" y="{(TOP + HEIGHT - BOTTOM) / 2:.0f}" text-anchor="middle" font-size="12" '
                 f'transform="rotate(-90 16 {(TOP + HEIGHT - BOTTOM) / 2:.0f})">{escape(ylabel)}</text>')

    def legend(self, names: list[str]) -> None:
        p = self.parts
        p.append('<g class="legend">')
        for i, name in enumerate(names):
            y = TOP + 10 + 20 * i
            x = WIDTH - RIGHT + 15
            p.append(f'<line x1="{x}" y1="{y}" x2="{x + 20}" y2="{y}" stroke="{color_for(i)}" stroke-width="2"/>')
            p.append(f'<text x="{x + 26}" y="{y}" dominant-baseline="middle" font-size="12">{escape(name)}</text>')
        p.append("</g>")

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _points(xs: np.ndarray, ys: np.ndarray) -> str:
    return " ".join(f"{_num(x)},{_num(y)}" for x, y in zip(xs.tolist(), ys.tolist()))


def _thin(n: int, limit: int = 800) -> np.ndarray:
    """Indices of at most ``limit`` evenly spaced rounds, always keeping the last."""
    if n <= limit:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, limit).round().astype(int))


def regret_svg(series: dict[tuple[str, int], np.ndarray], title: str = "Cumulative regret") -> str:
    """Mean curve with a shaded one-standard-deviation band per algorithm."""
    algs = sorted({alg for alg, _ in series})
    stats = {}
    for alg in algs:
        curves = [series[k] for k in sorted(series) if k[0] == alg]
        length = min(len(c) for c in curves)
        M = np.vstack([c[:length] for c in curves])
        std = M.std(axis=0, ddof=1) if M.shape[0] > 1 else np.zeros(length)
        stats[alg] = (M.mean(axis=0), std)
    n_max = max((len(m) for m, _ in stats.values()), default=0)
    y_hi = max((float((m + s).max()) for m, s in stats.values() if len(m)), default=1.0)
    y_lo = min((float((m - s).min()) for m, s in stats.values() if len(m)), default=0.0)
    canvas = _Canvas(title, "round", "cumulative regret", (1.0, float(max(n_max, 2))), (min(0.0, y_lo), y_hi))
    for i, alg in enumerate(algs):
        mean, std = stats[alg]
        if not len(mean):
            continue
        idx = _thin(len(mean))
        xs = canvas.px(idx + 1)
        upper, lower = canvas.py((mean + std)[idx]), canvas.py((mean - std)[idx])
        band = _points(np.concatenate([xs, xs[::-1]]), np.concatenate([upper, lower[::-1]]))
        c = color_for(i)
        canvas.parts.append(f'<polygon class="band" points="{band}" fill="{c}" fill-opacity="0.2" stroke="none"/>')
        canvas.parts.append(
            f'<polyline class="mean" data-algorithm="{escape(alg)}" data-last-y="{mean[-1]:.10g}" '
            f'points="{_points(xs, canvas.py(mean[idx]))}" fill="none" stroke="{c}" stroke-width="2"/>')
    canvas.legend(algs)
    return canvas.render()


def snapshot_svg(rows, title: str = "Refinement per epoch") -> str:
    """Step plot of the trial-mean snapshot value (b, support size or ladder level)."""
    grouped: dict[tuple[str, str], dict[int, list[float]]] = {}
    for epoch, alg, _trial, kind, value in rows:
        v = float(len(value)) if kind == "support" else float(value)
        grouped.setdefault((alg, kind), {}).setdefault(epoch, []).append(v)
    keys = sorted(grouped)
    lines = {k: sorted((e, float(np.mean(vs))) for e, vs in grouped[k].items()) for k in keys}
    epochs = [e for pts in lines.values() for e, _ in pts]
    values = [v for pts in lines.values() for _, v in pts]
    kinds = sorted({kind for _, kind in keys})
    ylabel = {"b": "norm bound b", "support": "support size", "ladder": "ladder level"}
    canvas = _Canvas(title, "epoch", " / ".join(ylabel[k] for k in kinds) or "value",
                     (float(min(epochs, default=0)), float(max(epochs, default=1)) + 1.0),
                     (min(0.0, min(values, default=0.0)), max(values, default=1.0) * 1.05 or 1.0))
    names = []
    for i, key in enumerate(keys):
        pts = lines[key]
        xs, ys = [], []
        for j, (e, v) in enumerate(pts):
            end = pts[j + 1][0] if j + 1 < len(pts) else e + 1
            xs += [e, end]
            ys += [v, v]
        name = f"{key[0]} ({key[1]})" if len(kinds) > 1 else key[0]
        names.append(name)
        canvas.parts.append(
            f'<polyline class="step" data-algorithm="{escape(key[0])}" data-last-y="{ys[-1]:.10g}" '
            f'points="{_points(canvas.px(xs), canvas.py(ys))}" fill="none" stroke="{color_for(i)}" stroke-width="2"/>')
    canvas.legend(names)
    return canvas.render()


def plot_file(csv_path, out_svg, kind: str = "regret") -> Path:
    """Render ``csv_path`` (regret or snapshot schema) into ``out_svg``."""
    if kind == "regret":
        svg = regret_svg(read_regret_csv(csv_path))
    elif kind == "snapshot":
        svg = snapshot_svg(read_snapshot_csv(csv_path))
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    out = Path(out_svg)
    out.write_text(svg)
    return out
