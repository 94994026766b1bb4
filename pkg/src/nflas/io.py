"""Heatmap (CSV / plain PGM) and table writers.

CSV heatmaps: the first row holds the x coordinates after a ``y/x`` corner
cell, every following row starts with its y coordinate, rows run in
ascending y.  Numbers are written as ``%.9e`` so a write/read round trip is
exact to about 1e-10 relative.

PGM heatmaps: plain ``P2``, maxval 65535, values min-max scaled and rounded;
a constant field maps to all zeros.  Row 0 of the image is ``y_max``.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .beamforming import GainField
from .geometry import Region2D

NUMBER_FORMAT = "%.9e"
PGM_MAXVAL = 65535
_PGM_PER_LINE = 11


def _num(v: float) -> str:
    return NUMBER_FORMAT % v


def emit_heatmap(field: GainField, path, format: str | None = None) -> Path:
    """Write ``field`` as CSV or PGM; the format defaults to the file suffix."""
    path = Path(path)
    fmt = format or path.suffix.lstrip(".").lower()
    if fmt == "csv":
        lines = [",".join(["y/x"] + [_num(x) for x in field.region.xs])]
        for y, row in zip(field.region.ys, field.values):
            lines.append(",".join([_num(y)] + [_num(v) for v in row]))
        path.write_text("\n".join(lines) + "\n", encoding="ascii")
    elif fmt == "pgm":
        v = field.values
        lo, hi = v.min(), v.max()
        if hi > lo:
            pix = np.rint((v - lo) / (hi - lo) * PGM_MAXVAL).astype(np.int64)
        else:
            pix = np.zeros(v.shape, dtype=np.int64)
        ny, nx = pix.shape
        lines = ["P2", f"{nx} {ny}", str(PGM_MAXVAL)]
        for row in pix[::-1]:
            for i in range(0, nx, _PGM_PER_LINE):
                lines.append(" ".join(str(p) for p in row[i:i + _PGM_PER_LINE]))
        path.write_text("\n".join(lines) + "\n", encoding="ascii")
    else:
        raise ValueError(f"unknown heatmap format {fmt!r}; use 'csv' or 'pgm'")
    return path


def read_heatmap_csv(path) -> GainField:
    """Inverse of the CSV branch of :func:`emit_heatmap`."""
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 3 or rows[0][0] != "y/x":
        raise ValueError(f"{path}: not a heatmap CSV")
    xs = np.array([float(x) for x in rows[0][1:]])
    ys = np.array([float(r[0]) for r in rows[1:]])
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    region = Region2D(xs[0], xs[-1], ys[0], ys[-1], len(xs), len(ys))
    return GainField(region, values)


def read_pgm(path) -> np.ndarray:
    """Pixel matrix of a plain PGM, row 0 first (top of the image)."""
    tokens = Path(path).read_text(encoding="ascii").split()
    if tokens[0] != "P2":
        raise ValueError(f"{path}: not a plain PGM")
    nx, ny = int(tokens[1]), int(tokens[2])
    return np.array([int(t) for t in tokens[4:]], dtype=np.int64).reshape(ny, nx)


def write_table(path, header, rows) -> Path:
    """CSV table; floats as ``%.9e``, everything else via ``str``."""
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        cells = [_num(v) if isinstance(v, (float, np.floating)) else str(v) for v in row]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
