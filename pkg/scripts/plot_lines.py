#!/usr/bin/env python3
"""Overlay the value columns of a time-series CSV as lines.

Usage: plot_lines.py <csv> <out.png>

The CSV is expected to carry `# key: value` metadata lines followed by a
header row; the first column is the time axis and every further column
becomes one labelled curve.  Exits 2 on malformed input.
"""

import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def read_series_csv(path):
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
    data = np.asarray(rows)
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    return header, data, metadata


def main(argv):
    if len(argv) != 3:
        sys.stderr.write(__doc__)
        return 2
    csv_path, out_path = argv[1], argv[2]
    try:
        header, data, metadata = read_series_csv(csv_path)
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    if len(header) < 2:
        sys.stderr.write(f"error: {csv_path}: need a time column plus a value column\n")
        return 2
    fig, ax = plt.subplots(figsize=(7, 4.2))
    t = data[:, 0]
    for j in range(1, data.shape[1]):
        ax.plot(t, data[:, j], lw=1.2, label=header[j])
    ax.set_xlabel(header[0])
    ax.set_ylabel("population")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="best", fontsize=9)
    title = metadata.get("mode", "")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
