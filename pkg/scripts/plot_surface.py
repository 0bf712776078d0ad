#!/usr/bin/env python3
"""Render a phase-space grid CSV (re, im, value) as a heatmap.

Usage: plot_surface.py <csv> <out.png>

Negative regions are the payload: whenever the field dips below zero a
diverging colormap with symmetric limits around 0 is used, so negativity
shows up as the blue band.  All-positive fields render with a sequential
map instead.  Exits 2 on malformed or non-rectangular input.
"""

import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def read_grid_csv(path):
    metadata = {}
    header = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if ":" in line:
                    key, _, value = line.lstrip("#").partition(":")
                    metadata[key.strip()] = value.strip()
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                continue
            rows.append([float(v) for v in line.split(",")])
    if header is None or not rows:
        raise ValueError(f"{path}: no data rows")
    if header[:3] != ["re", "im", "p_omega"]:
        raise ValueError(f"{path}: expected columns re,im,p_omega, got {header}")
    data = np.asarray(rows)
    if data.shape[1] != 3:
        raise ValueError(f"{path}: expected 3 columns")
    re_vals = np.unique(data[:, 0])
    im_vals = np.unique(data[:, 1])
    if len(re_vals) * len(im_vals) != data.shape[0]:
        raise ValueError(f"{path}: grid is not rectangular")
    field = np.full((len(im_vals), len(re_vals)), np.nan)
    ri = np.searchsorted(re_vals, data[:, 0])
    ii = np.searchsorted(im_vals, data[:, 1])
    field[ii, ri] = data[:, 2]
    if np.any(np.isnan(field)):
        raise ValueError(f"{path}: grid is not rectangular")
    return re_vals, im_vals, field, metadata


def main(argv):
    if len(argv) != 3:
        sys.stderr.write(__doc__)
        return 2
    csv_path, out_path = argv[1], argv[2]
    try:
        re_vals, im_vals, field, metadata = read_grid_csv(csv_path)
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    fig, ax = plt.subplots(figsize=(6.4, 5.4))
    fmin, fmax = float(field.min()), float(field.max())
    if fmin < 0.0:
        bound = max(abs(fmin), abs(fmax))
        mesh = ax.pcolormesh(
            re_vals, im_vals, field, cmap="RdBu_r", vmin=-bound, vmax=bound,
            shading="nearest",
        )
    else:
        mesh = ax.pcolormesh(re_vals, im_vals, field, cmap="viridis", shading="nearest")
    fig.colorbar(mesh, ax=ax, label="P")
    ax.set_xlabel("Re alpha")
    ax.set_ylabel("Im alpha")
    ax.set_aspect("equal")
    title = metadata.get("mode", "")
    if title:
        ax.set_title(f"{title} (min {fmin:.3g}, max {fmax:.3g})")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
