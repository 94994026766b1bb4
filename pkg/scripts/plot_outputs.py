"""Quick-look plots of CLI outputs (needs matplotlib; not part of the package).

    python scripts/plot_outputs.py out/beam_squint_128 out/dmimo_peb_sweep ...

Every ``*.csv`` heatmap becomes a PNG next to it; ``peb.csv``,
``track.csv`` and ``focal_curve.csv`` get line plots.
"""
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from nflas.io import read_heatmap_csv, read_table  # noqa: E402


def heatmap(path: Path):
    f = read_heatmap_csv(path)
    r = f.region
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(f.values, origin="lower", extent=(r.x_min, r.x_max, r.y_min, r.y_max), aspect="equal")
    fig.colorbar(im, ax=ax)
    ax.set(xlabel="x [m]", ylabel="y [m]", title=path.stem)
    fig.savefig(path.with_suffix(".png"), dpi=120, bbox_inches="tight")
    plt.close(fig)


def columns(path: Path):
    header, rows = read_table(path)
    return {h: [r[i] for r in rows] for i, h in enumerate(header)}


def peb(path: Path):
    c = columns(path)
    fig, ax = plt.subplots()
    for key in sorted(set(zip(c["m"], c["mode"]))):
        sel = [i for i, k in enumerate(zip(c["m"], c["mode"])) if k == key]
        ax.loglog([float(c["bandwidth_hz"][i]) / 1e6 for i in sel], [float(c["peb_m"][i]) for i in sel],
                  "o-" if key[1] == "coherent" else "s--", label=f"M={key[0]} {key[1]}")
    ax.set(xlabel="bandwidth [MHz]", ylabel="PEB [m]")
    ax.legend()
    fig.savefig(path.with_suffix(".png"), dpi=120, bbox_inches="tight")
    plt.close(fig)


def track(path: Path):
    c = columns(path)
    fig, ax = plt.subplots()
    ax.semilogy(np.array(c["index"], int), np.array(c["error_m"], float), ".-")
    ax.set(xlabel="trajectory index", ylabel="position error [m]")
    fig.savefig(path.with_suffix(".png"), dpi=120, bbox_inches="tight")
    plt.close(fig)


def focal(path: Path):
    c = columns(path)
    fig, ax = plt.subplots()
    ax.plot(np.array(c["x_m"], float), np.array(c["y_m"], float), "o-")
    ax.set(xlabel="x [m]", ylabel="y [m]", title="focal points across subcarriers", aspect="equal")
    fig.savefig(path.with_suffix(".png"), dpi=120, bbox_inches="tight")
    plt.close(fig)


SPECIAL = {"peb.csv": peb, "track.csv": track, "focal_curve.csv": focal}

for d in map(Path, sys.argv[1:]):
    for p in sorted(d.glob("*.csv")):
        if p.name in SPECIAL:
            SPECIAL[p.name](p)
        elif p.read_text().startswith("y/x"):
            heatmap(p)
