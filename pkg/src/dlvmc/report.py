"""Comparison tables and line charts over finished run directories."""
from __future__ import annotations

import csv
import json
import logging
import math
from pathlib import Path
from xml.sax.saxutils import escape

log = logging.getLogger(__name__)

TABLE_COLUMNS = ("run", "name", "energy_mean", "energy_stderr", "variance", "n_samples",
                 "autocorrelation_time", "final_step")
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
            "#7f7f7f", "#bcbd22", "#17becf")


def read_log(path):
    """``(steps, energies)`` from a training ``log.csv``."""
    steps, energies = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "energy_mean" not in reader.fieldnames:
            raise ValueError(f"{path}: missing energy_mean column")
        for row in reader:
            steps.append(int(row["step"]))
            energies.append(float(row["energy_mean"]))
    return steps, energies


def collect(run_dirs):
    """One record per readable run directory, sorted by directory name.

    Unreadable or incomplete directories are skipped with a warning.
    """
    records = []
    for d in sorted((Path(p) for p in run_dirs), key=lambda p: p.name):
        rec = {"run": d.name, "dir": d, "curve": None}
        try:
            energy = json.loads((d / "energy.json").read_text())
            rec.update(name=energy.get("name", d.name), energy_mean=energy["mean"],
                       energy_stderr=energy["stderr"], variance=energy["variance"],
                       n_samples=energy["n_samples"],
                       autocorrelation_time=energy["autocorrelation_time"])
        except (OSError, ValueError, KeyError) as exc:
            log.warning("%s: no usable energy.json (%s)", d, exc)
            rec.update(name=d.name, energy_mean=None, energy_stderr=None, variance=None,
                       n_samples=None, autocorrelation_time=None)
        try:
            rec["curve"] = read_log(d / "log.csv")
            rec["final_step"] = rec["curve"][0][-1] if rec["curve"][0] else None
        except (OSError, ValueError, KeyError) as exc:
            log.warning("%s: no usable log.csv (%s)", d, exc)
            rec["final_step"] = None
        if rec["energy_mean"] is None and rec["curve"] is None:
            continue
        records.append(rec)
    return records


def _cell(v):
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def write_table(records, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TABLE_COLUMNS)
        for rec in records:
            w.writerow([_cell(rec.get(c)) for c in TABLE_COLUMNS])


def write_curve(curve, path):
    steps, energies = curve
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("step", "energy_mean"))
        for s, e in zip(steps, energies):
            w.writerow((s, repr(e)))


def svg_chart(curves, width=640, height=400, title="energy vs. step"):
    """Self-contained SVG 1.1 line chart, one ``<polyline>`` per ``(label, steps, energies)``."""
    pts = [(s, e) for _, steps, es in curves for s, e in zip(steps, es) if math.isfinite(e)]
    margin = 50
    if pts:
        x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
        y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    else:
        x0 = x1 = y0 = y1 = 0.0
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def sx(x):
        return margin + (x - x0) / (x1 - x0) * (width - 2 * margin)

    def sy(y):
        return height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin)

    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f"<title>{escape(title)}</title>",
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{margin}" y="{height - 15}" font-size="11">step {x0:g} .. {x1:g}</text>',
        f'<text x="5" y="{margin - 10}" font-size="11">E [Ha] {y0:.6g} .. {y1:.6g}</text>',
    ]
    for i, (label, steps, es) in enumerate(curves):
        coords = " ".join(f"{sx(s):.2f},{sy(e):.2f}" for s, e in zip(steps, es) if math.isfinite(e))
        color = _PALETTE[i % len(_PALETTE)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{coords}">'
                   f"<title>{escape(label)}</title></polyline>")
        out.append(f'<text x="{width - margin - 150}" y="{margin + 14 * i}" font-size="11" '
                   f'fill="{color}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def report(run_dirs, out_dir):
    """Write ``summary.csv``, ``curves/<run>.csv`` and ``energy.svg``; returns the records."""
    out_dir = Path(out_dir)
    (out_dir / "curves").mkdir(parents=True, exist_ok=True)
    records = collect(run_dirs)
    write_table(records, out_dir / "summary.csv")
    curves = []
    for rec in records:
        if rec["curve"] is not None:
            write_curve(rec["curve"], out_dir / "curves" / f"{rec['run']}.csv")
            curves.append((rec["run"], *rec["curve"]))
    (out_dir / "energy.svg").write_text(svg_chart(curves), encoding="utf-8")
    return records
