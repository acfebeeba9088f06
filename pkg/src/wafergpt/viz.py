"""File exports for inspection: probability heatmaps, attention maps, loss histograms, ROC plots.

Every export is a CSV grid (header row + header column, 9 significant
digits) plus a static SVG 1.1 document. Output bytes depend only on the
inputs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .data import FLOAT_FMT

_W, _H, _PAD = 640, 360, 40


def _fmt(v: float) -> str:
    return FLOAT_FMT.format(float(v))


def write_grid_csv(path, grid, row_labels: Sequence[str], col_labels: Sequence[str],
                   corner: str = "") -> None:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.shape != (len(row_labels), len(col_labels)):
        raise ValueError("grid shape does not match labels")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join([corner] + list(col_labels)) + "\n")
        for lab, row in zip(row_labels, grid):
            fh.write(",".join([lab] + [_fmt(v) for v in row]) + "\n")


def read_grid_csv(path):
    """Returns ``(grid, row_labels, col_labels)``."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    cols = rows[0][1:]
    labels = [r[0] for r in rows[1:]]
    grid = np.array([[float(v) for v in r[1:]] for r in rows[1:]]).reshape(len(labels), len(cols))
    return grid, labels, cols


class _Svg:
    def __init__(self, width=_W, height=_H, title=""):
        self.width, self.height = width, height
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">',
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        ]
        if title:
            self.text(width / 2, 16, title, anchor="middle", size=13)

    def rect(self, x, y, w, h, fill, opacity=None, stroke=None):
        extra = "" if opacity is None else f' fill-opacity="{opacity:.3f}"'
        extra += "" if stroke is None else f' stroke="{stroke}"'
        self.parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" fill="{fill}"{extra}/>')

    def line(self, x1, y1, x2, y2, stroke="#000000", width=1.0, dash=None):
        d = "" if dash is None else f' stroke-dasharray="{dash}"'
        self.parts.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
                          f'stroke="{stroke}" stroke-width="{width:.2f}"{d}/>')

    def polyline(self, xs, ys, stroke, width=1.5):
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
        self.parts.append(f'<polyline points="{pts}" fill="none" stroke="{stroke}" stroke-width="{width:.2f}"/>')

    def text(self, x, y, s, anchor="start", size=11, fill="#000000"):
        s = str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        self.parts.append(f'<text x="{x:.2f}" y="{y:.2f}" font-family="sans-serif" font-size="{size}" '
                          f'text-anchor="{anchor}" fill="{fill}">{s}</text>')

    def save(self, path):
        Path(path).write_text("\n".join(self.parts + ["</svg>"]) + "\n", encoding="utf-8")


@dataclass
class HeatmapExport:
    grid: np.ndarray          # (r, T-1): column j is the predicted distribution of position j+1
    row_labels: list
    col_labels: list
    overlay_x: np.ndarray     # positions 1..T-1
    overlay: np.ndarray       # raw values at those positions
    csv_path: Path
    svg_path: Path


def export_probability_heatmap(probs, raw, path_prefix) -> HeatmapExport:
    """Predicted next-value distribution per step with the actual trace overlaid.

    ``probs`` is ``(T-1, r)`` softmax output for inputs at positions
    ``0..T-2``; ``raw`` is the normalized length-``T`` wafer. The grid's
    columns are labeled by the predicted position (``t1..t{T-1}``) and the
    overlay is ``raw[1:]`` on the same axis, i.e. one step right of the input.
    """
    probs = np.asarray(probs, dtype=np.float64)
    raw = np.asarray(raw, dtype=np.float64)
    L, r = probs.shape
    if raw.shape != (L + 1,):
        raise ValueError(f"raw sequence must have length {L + 1}")
    if not np.all(np.isfinite(probs)):
        raise ValueError("probabilities must be finite")
    prefix = Path(path_prefix)
    grid = probs.T
    rows = [f"c{c}" for c in range(r)]
    cols = [f"t{t}" for t in range(1, L + 1)]
    csv_path, svg_path = prefix.with_suffix(".csv"), prefix.with_suffix(".svg")
    write_grid_csv(csv_path, grid, rows, cols, corner="class")

    svg = _Svg(title="predicted next-value distribution (shifted right by one step)")
    x0, y0, pw, ph = _PAD, 28, _W - 2 * _PAD, _H - 28 - _PAD
    cw, ch = pw / (L + 1), ph / r
    peak = grid.max() or 1.0
    for c in range(r):
        for j in range(L):
            v = grid[c, j] / peak
            if v > 1e-3:
                svg.rect(x0 + (j + 1) * cw, y0 + (r - 1 - c) * ch, cw, ch, "#1f4e9e", opacity=v)
    xs = x0 + (np.arange(1, L + 1) + 0.5) * cw
    ys = y0 + (1.0 - raw[1:]) * ph
    svg.polyline(xs, ys, "#d62728")
    svg.rect(x0, y0, pw, ph, "none", stroke="#444444")
    svg.text(x0, _H - 12, "position 0 (input only)")
    svg.text(x0 + pw, _H - 12, f"position {L}", anchor="end")
    svg.save(svg_path)
    return HeatmapExport(grid, rows, cols, np.arange(1, L + 1), raw[1:].copy(), csv_path, svg_path)


def export_attention_maps(attentions, out_dir) -> list:
    """One CSV per (layer, head) plus a mosaic SVG. ``attentions`` is ``(layers, heads, L, L)``."""
    att = np.asarray(attentions, dtype=np.float64)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_layers, n_heads, L, _ = att.shape
    labels = [f"t{t}" for t in range(L)]
    paths = []
    for li in range(n_layers):
        for hi in range(n_heads):
            p = out_dir / f"attention_L{li}_H{hi}.csv"
            write_grid_csv(p, att[li, hi], labels, labels, corner="query/key")
            paths.append(p)

    cell = 80
    svg = _Svg(width=max(1, n_heads) * (cell + 10) + 10, height=max(1, n_layers) * (cell + 22) + 30,
               title="attention weights per layer (rows) and head (columns)")
    step = max(1, L // 40)  # downsample large maps for the picture only
    for li in range(n_layers):
        for hi in range(n_heads):
            ox, oy = 10 + hi * (cell + 10), 30 + li * (cell + 22)
            sub = att[li, hi, ::step, ::step]
            n = sub.shape[0]
            px = cell / n
            peak = sub.max() or 1.0
            for a in range(n):
                for b in range(a + 1):
                    v = sub[a, b] / peak
                    if v > 1e-3:
                        svg.rect(ox + b * px, oy + a * px, px, px, "#1f4e9e", opacity=v)
            svg.rect(ox, oy, cell, cell, "none", stroke="#888888")
            svg.text(ox, oy + cell + 12, f"L{li} H{hi}", size=9)
    mosaic = out_dir / "attention.svg"
    svg.save(mosaic)
    paths.append(mosaic)
    return paths


def export_loss_histogram(train_totals, test_totals, test_labels, tau: float, path_prefix,
                          n_bins: int = 40, fault_kinds: Optional[Sequence[Optional[str]]] = None) -> dict:
    """Binned sequence-loss histogram with the threshold marked.

    Columns: training, test normal, test abnormal, and one column per fault
    kind when ``fault_kinds`` (aligned with the test scores) is given.
    Returns ``{"csv", "svg", "edges", "counts", "tau_x"}``.
    """
    train_totals = np.asarray(train_totals, dtype=np.float64)
    test_totals = np.asarray(test_totals, dtype=np.float64)
    labels = list(test_labels)
    everything = np.r_[train_totals, test_totals, tau]
    lo, hi = float(everything.min()), float(everything.max())
    if hi == lo:
        hi = lo + 1.0
    groups = {"train": train_totals,
              "test_normal": test_totals[[lab == "normal" for lab in labels]],
              "test_abnormal": test_totals[[lab == "abnormal" for lab in labels]]}
    if fault_kinds is not None:
        kinds = sorted({k for k in fault_kinds if k})
        for k in kinds:
            groups[k] = test_totals[[fk == k for fk in fault_kinds]]
    edges = np.linspace(lo, hi, n_bins + 1)
    counts = {name: np.histogram(v, bins=edges)[0] for name, v in groups.items()}
    prefix = Path(path_prefix)
    csv_path, svg_path = prefix.with_suffix(".csv"), prefix.with_suffix(".svg")
    rows = [f"{_fmt(edges[i])}:{_fmt(edges[i + 1])}" for i in range(n_bins)]
    write_grid_csv(csv_path, np.stack([counts[n] for n in groups], axis=1), rows, list(groups), corner="bin")

    svg = _Svg(title="sequence loss distribution")
    x0, y0, pw, ph = _PAD, 28, _W - 2 * _PAD, _H - 28 - _PAD
    colors = {"train": "#7f7f7f", "test_normal": "#1f77b4", "test_abnormal": "#d62728"}
    palette = ["#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#bcbd22", "#17becf", "#d62728"]
    shown = [n for n in groups if n != "test_abnormal"] if fault_kinds is not None else list(groups)
    top = max(max(int(counts[n].max()) for n in shown), 1)
    bw = pw / n_bins
    for gi, name in enumerate(shown):
        color = colors.get(name, palette[(gi - 2) % len(palette)])
        for i, c in enumerate(counts[name]):
            if c:
                h = ph * np.sqrt(c / top)  # sqrt scale so single faults stay visible
                svg.rect(x0 + i * bw, y0 + ph - h, bw, h, color, opacity=0.55)
        svg.text(x0 + pw - 4, y0 + 14 + 13 * gi, name, anchor="end", fill=color)
    tau_x = x0 + (tau - lo) / (hi - lo) * pw
    svg.line(tau_x, y0, tau_x, y0 + ph, stroke="#000000", width=1.5, dash="4,3")
    svg.text(tau_x + 3, y0 + 10, f"tau={tau:.3f}")
    svg.rect(x0, y0, pw, ph, "none", stroke="#444444")
    svg.text(x0, _H - 12, _fmt(lo))
    svg.text(x0 + pw, _H - 12, _fmt(hi), anchor="end")
    svg.save(svg_path)
    return {"csv": csv_path, "svg": svg_path, "edges": edges, "counts": counts, "tau_x": (tau - lo) / (hi - lo)}


def export_roc(curve, auc_value: float, path_prefix, label: str = "model") -> dict:
    """ROC points CSV and SVG plot."""
    prefix = Path(path_prefix)
    csv_path, svg_path = prefix.with_suffix(".csv"), prefix.with_suffix(".svg")
    from .metrics import write_roc_csv

    write_roc_csv(curve, csv_path)
    svg = _Svg(width=_H + 40, height=_H + 20, title="ROC")
    x0, y0, side = _PAD, 28, _H - 40
    svg.rect(x0, y0, side, side, "none", stroke="#444444")
    svg.line(x0, y0 + side, x0 + side, y0, stroke="#bbbbbb", dash="3,3")
    svg.polyline(x0 + curve.fpr * side, y0 + (1 - curve.tpr) * side, "#1f4e9e", width=2.0)
    svg.text(x0 + side - 4, y0 + side - 8, f"{label} (AUC = {auc_value:.4f})", anchor="end")
    svg.text(x0 + side / 2, y0 + side + 16, "false positive rate", anchor="middle")
    svg.save(svg_path)
    return {"csv": csv_path, "svg": svg_path}
