"""Flat-file emitters: CSV tables, JSON summaries, self-contained SVG plots.

Every file carries the config hash and master seed. CSV rows carry them as
ordinary trailing columns so the files stay plain RFC-4180 tables; floats are
written with shortest-round-trip repr so re-parsing reproduces the in-memory
values exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = ["write_csv", "read_csv", "write_json", "write_svg", "emit_outputs"]

_SVG_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _parse_cell(text: str):
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def write_csv(
    path: str | Path,
    header: Sequence[str],
    rows: Iterable[Sequence],
    provenance: dict | None = None,
) -> Path:
    """RFC-4180 CSV with a header row; provenance appended as extra columns."""
    path = Path(path)
    prov_keys = sorted(provenance) if provenance else []
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        writer.writerow(list(header) + prov_keys)
        prov_cells = [_cell(provenance[k]) for k in prov_keys] if provenance else []
        for row in rows:
            writer.writerow([_cell(v) for v in row] + prov_cells)
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[list]]:
    """Parse a CSV written by :func:`write_csv` back into typed cells."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[_parse_cell(c) for c in row] for row in reader]
    return header, rows


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(path: str | Path, doc: dict) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _axis_transform(values: np.ndarray, log: bool) -> np.ndarray:
    return np.log10(values) if log else values


def write_svg(
    path: str | Path,
    series: dict[str, tuple[Sequence[float], Sequence[float]]],
    title: str,
    provenance: dict | None = None,
    log_x: bool = False,
    log_y: bool = False,
    width: int = 640,
    height: int = 480,
) -> Path:
    """Minimal line plot: one polyline per series, legend, corner ticks."""
    path = Path(path)
    margin = 60.0
    xs_all = np.concatenate([np.asarray(x, dtype=float) for x, _ in series.values()])
    ys_all = np.concatenate([np.asarray(y, dtype=float) for _, y in series.values()])
    tx_all = _axis_transform(xs_all, log_x)
    ty_all = _axis_transform(ys_all, log_y)
    x_lo, x_hi = float(tx_all.min()), float(tx_all.max())
    y_lo, y_hi = float(ty_all.min()), float(ty_all.max())
    x_span = (x_hi - x_lo) or 1.0
    y_span = (y_hi - y_lo) or 1.0

    def to_px(x: float, y: float) -> tuple[float, float]:
        px = margin + (x - x_lo) / x_span * (width - 2 * margin)
        py = height - margin - (y - y_lo) / y_span * (height - 2 * margin)
        return px, py

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<desc>{json.dumps(_jsonable(provenance or {}), sort_keys=True)}</desc>",
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="24" text-anchor="middle" font-size="16">{title}</text>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" '
        f'stroke="black"/>',
    ]
    for i, (name, (xs, ys)) in enumerate(series.items()):
        tx = _axis_transform(np.asarray(xs, dtype=float), log_x)
        tyv = _axis_transform(np.asarray(ys, dtype=float), log_y)
        pts = " ".join(
            f"{px:.2f},{py:.2f}" for px, py in (to_px(a, b) for a, b in zip(tx, tyv))
        )
        color = _SVG_PALETTE[i % len(_SVG_PALETTE)]
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>'
        )
        parts.append(
            f'<text x="{width - margin + 4}" y="{margin + 16 * i}" font-size="12" '
            f'fill="{color}">{name}</text>'
        )
    for corner, anchor in (((x_lo, y_lo), "start"), ((x_hi, y_lo), "end")):
        px, py = to_px(*corner)
        label = f"{10 ** corner[0]:.4g}" if log_x else f"{corner[0]:.4g}"
        parts.append(
            f'<text x="{px}" y="{height - margin + 18}" text-anchor="{anchor}" '
            f'font-size="11">{label}</text>'
        )
    for yv in (y_lo, y_hi):
        px, py = to_px(x_lo, yv)
        label = f"{10 ** yv:.4g}" if log_y else f"{yv:.4g}"
        parts.append(
            f'<text x="{margin - 6}" y="{py + 4}" text-anchor="end" font-size="11">'
            f"{label}</text>"
        )
    parts.append("</svg>")
    path.write_text("\n".join(parts), encoding="utf-8")
    return path


def emit_outputs(
    out_dir: str | Path,
    basename: str,
    header: Sequence[str],
    rows: Iterable[Sequence],
    summary: dict,
    provenance: dict,
    formats: Sequence[str] = ("csv", "json"),
    svg_series: dict | None = None,
    svg_title: str = "",
    svg_log_log: bool = False,
) -> list[Path]:
    """Write the selected flat-file outputs for one command run."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if "csv" in formats:
        written.append(write_csv(out_dir / f"{basename}.csv", header, rows, provenance))
    if "json" in formats:
        doc = {"summary": summary, "provenance": provenance}
        written.append(write_json(out_dir / f"{basename}.json", doc))
    if "svg" in formats and svg_series:
        written.append(
            write_svg(
                out_dir / f"{basename}.svg",
                svg_series,
                svg_title or basename,
                provenance,
                log_x=svg_log_log,
                log_y=svg_log_log,
            )
        )
    return written
