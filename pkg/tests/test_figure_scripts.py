"""Secondary-component checks: the figure scripts consume run artifacts.

These tests exercise scripts/plot_lines.py and scripts/plot_surface.py as
subprocesses through their documented interfaces only; the primary suite
does not depend on them.
"""

import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

from ionjc.cli import parse_config, preset, run

SCRIPTS = Path(__file__).resolve().parent.parent / "scripts"
PLOT_LINES = SCRIPTS / "plot_lines.py"
PLOT_SURFACE = SCRIPTS / "plot_surface.py"
SHARED_CACHE = Path(tempfile.gettempdir()) / "ionjc-test-element-cache"


def run_script(script, *args):
    return subprocess.run(
        [sys.executable, str(script), *map(str, args)],
        capture_output=True,
        text=True,
    )


@pytest.fixture(scope="module")
def lines_csv(tmp_path_factory):
    out = tmp_path_factory.mktemp("lines")
    text = """
mode = compare-ordering
k = 2
eta = 0.2
r = 0.01
electronic = 1
alpha0_abs = 1.5
t_end = 30.0
n_points = 120
"""
    run(parse_config(text), out_dir=out)
    return out / "compare-ordering.csv"


@pytest.fixture(scope="module")
def surface_csvs(tmp_path_factory):
    # small analogue of the published nonclassicality run: dispersive regime
    # with fast differential light shifts, negativity present at t = 6
    out = tmp_path_factory.mktemp("surface")
    text = """
mode = pfunction
k = 2
eta = 0.3
delta_phi = 0.0
delta_omega_tilde = 6.0
electronic = 2
alpha0_abs = 1.5
beta0_abs = 6.0
snapshots = 0.0,6.0
w = 1.7
quadrature_order = 128
grid_re_min = -3.0
grid_re_max = 3.0
grid_n_re = 41
grid_im_min = -3.0
grid_im_max = 3.0
grid_n_im = 41
"""
    run(parse_config(text), out_dir=out)
    return out / "pfunction_t0.csv", out / "pfunction_t6.csv"


def read_grid_values(path):
    rows = [
        line for line in path.read_text().splitlines()
        if line and not line.startswith("#")
    ]
    return np.array([[float(v) for v in line.split(",")] for line in rows[1:]])


class TestPlotLines:
    def test_two_curve_figure(self, lines_csv, tmp_path):
        out_png = tmp_path / "fig2.png"
        result = run_script(PLOT_LINES, lines_csv, out_png)
        assert result.returncode == 0, result.stderr
        assert out_png.stat().st_size > 0

    def test_fig2_preset_output_renders(self, tmp_path):
        run(preset("fig2"), out_dir=tmp_path)
        out_png = tmp_path / "fig2.png"
        result = run_script(PLOT_LINES, tmp_path / "compare-ordering.csv", out_png)
        assert result.returncode == 0, result.stderr
        assert out_png.stat().st_size > 0

    def test_missing_value_column_exits_2(self, tmp_path):
        bad = tmp_path / "one_column.csv"
        bad.write_text("# mode: x\ntau\n0.0\n1.0\n")
        result = run_script(PLOT_LINES, bad, tmp_path / "o.png")
        assert result.returncode == 2

    def test_empty_csv_errors(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        result = run_script(PLOT_LINES, empty, tmp_path / "o.png")
        assert result.returncode == 2


def count_blue_pixels(png_path):
    from PIL import Image

    img = np.asarray(Image.open(png_path).convert("RGB"), dtype=int)
    return int(np.sum((img[:, :, 2] - img[:, :, 0]) > 40))


class TestPlotSurface:
    def test_negative_region_is_rendered(self, surface_csvs, tmp_path):
        _, csv_t6 = surface_csvs
        data = read_grid_values(csv_t6)
        assert data[:, 2].min() < 0.0  # precondition: negativity present
        out_png = tmp_path / "t6.png"
        result = run_script(PLOT_SURFACE, csv_t6, out_png)
        assert result.returncode == 0, result.stderr
        assert count_blue_pixels(out_png) > 50

    def test_fig4_preset_t13_negative_region(self, tmp_path):
        # full published parameter set; the element table is shared with the
        # acceptance suite through the session cache
        run(preset("fig4"), out_dir=tmp_path, cache_dir=SHARED_CACHE)
        csv_t13 = tmp_path / "pfunction_t13.csv"
        assert read_grid_values(csv_t13)[:, 2].min() < 0.0
        out_png = tmp_path / "t13.png"
        result = run_script(PLOT_SURFACE, csv_t13, out_png)
        assert result.returncode == 0, result.stderr
        assert count_blue_pixels(out_png) > 50

    def test_all_positive_grid_has_no_negative_band(self, surface_csvs, tmp_path):
        csv_t0, _ = surface_csvs
        data = read_grid_values(csv_t0)
        assert data[:, 2].min() >= -1e-12
        out_png = tmp_path / "t0.png"
        result = run_script(PLOT_SURFACE, csv_t0, out_png)
        assert result.returncode == 0, result.stderr
        assert out_png.stat().st_size > 0

    def test_non_rectangular_grid_exits_2(self, tmp_path):
        bad = tmp_path / "ragged.csv"
        bad.write_text(
            "re,im,p_omega\n0.0,0.0,1.0\n1.0,0.0,1.0\n0.0,1.0,1.0\n"
        )
        result = run_script(PLOT_SURFACE, bad, tmp_path / "o.png")
        assert result.returncode == 2

    def test_mismatched_row_errors(self, tmp_path):
        bad = tmp_path / "badcols.csv"
        bad.write_text("re,im,p_omega\n0.0,0.0\n")
        result = run_script(PLOT_SURFACE, bad, tmp_path / "o.png")
        assert result.returncode == 2
