import json
import math

import numpy as np
import pytest

from ionjc.cli import (
    GridSpec,
    RunConfig,
    TimeSeries,
    main,
    parse_config,
    preset,
    run,
    serialize_config,
)
from ionjc.errors import ParseError, UnknownPreset, ValidationError

MINIMAL_QUANTIZED = """
mode = sigma22-quantized
k = 2
eta = 0.2
delta_omega_tilde = 1.0
electronic = 1
alpha0_abs = 1.2
beta0_abs = 3.0
t_end = 2.0
n_points = 20
"""


class TestParse:
    def test_minimal_quantized_config(self):
        config = parse_config(MINIMAL_QUANTIZED)
        assert config.mode == "sigma22-quantized"
        assert config.n_points == 20
        assert config.tail_epsilon == 1e-12  # default filled

    def test_unknown_key_is_hard_error_with_line(self):
        text = MINIMAL_QUANTIZED + "bogus_key = 1\n"
        with pytest.raises(ParseError) as err:
            parse_config(text)
        assert "bogus_key" in str(err.value)
        assert str(len(MINIMAL_QUANTIZED.splitlines()) + 1) in str(err.value)

    def test_negative_k_names_field(self):
        with pytest.raises(ValidationError) as err:
            parse_config(MINIMAL_QUANTIZED.replace("k = 2", "k = -1"))
        assert err.value.field == "k"

    def test_duplicate_key(self):
        with pytest.raises(ParseError):
            parse_config(MINIMAL_QUANTIZED + "k = 3\n")

    def test_missing_equals(self):
        with pytest.raises(ParseError):
            parse_config("mode sigma22-quantized\n")

    def test_comments_and_blank_lines(self):
        text = "# full-line comment\n\n" + MINIMAL_QUANTIZED + "   # trailing\n"
        assert parse_config(text).mode == "sigma22-quantized"

    def test_empty_time_grid_rejected(self):
        with pytest.raises(ValidationError) as err:
            parse_config(MINIMAL_QUANTIZED.replace("n_points = 20", "n_points = 1"))
        assert err.value.field == "n_points"

    def test_electronic_level_is_explicit(self):
        text = MINIMAL_QUANTIZED.replace("electronic = 1\n", "")
        with pytest.raises(ValidationError) as err:
            parse_config(text)
        assert err.value.field == "electronic"

    def test_pfunction_requires_excited_start(self):
        config = preset("fig4")
        text = serialize_config(config).replace("electronic = 2", "electronic = 1")
        with pytest.raises(ValidationError) as err:
            parse_config(text)
        assert err.value.field == "electronic"

    def test_fig4_preset_text_accepted(self):
        config = parse_config(serialize_config(preset("fig4")))
        assert config.alpha0_abs == pytest.approx(math.sqrt(5.0))
        assert config.k == 3
        assert config.delta_phi == pytest.approx(math.pi / 2.0)
        assert config.nu_tilde == 5000.0
        assert config.beta0_abs == 40.0
        assert config.delta_omega_tilde == 8.0
        assert config.w == 1.7


class TestRoundTrip:
    @pytest.mark.parametrize("name", ["fig2", "fig3-weak", "fig3-strong", "fig4"])
    def test_preset_round_trip(self, name):
        config = preset(name)
        assert parse_config(serialize_config(config)) == config

    def test_custom_round_trip(self):
        config = parse_config(MINIMAL_QUANTIZED)
        assert parse_config(serialize_config(config)) == config


class TestPresets:
    def test_published_values(self):
        assert preset("fig2").k == 2
        assert preset("fig2").r == 0.005
        assert preset("fig2").alpha0_abs == pytest.approx(math.sqrt(12.0))
        assert preset("fig3-strong").delta_omega_tilde == 20.0
        assert preset("fig3-strong").beta0_abs_list == (100.0,)
        assert preset("fig3-weak").delta_omega_tilde == 4.0
        assert preset("fig4").w == 1.7
        assert preset("fig4").snapshots == (4.0, 13.0, 50.0)

    def test_unknown_preset(self):
        with pytest.raises(UnknownPreset):
            preset("fig9")


class TestTimeSeries:
    def test_strictly_increasing_required(self):
        with pytest.raises(ValueError):
            TimeSeries(
                columns=["t", "v"],
                rows=np.array([[0.0, 1.0], [0.0, 2.0]]),
                metadata={},
            )


class TestRun:
    def test_quantized_run_writes_csv_and_sidecar(self, tmp_path):
        config = parse_config(MINIMAL_QUANTIZED)
        written = run(config, out_dir=tmp_path)
        csv_path = tmp_path / "sigma22-quantized.csv"
        json_path = tmp_path / "sigma22-quantized.json"
        assert csv_path in written and json_path in written
        lines = csv_path.read_text().splitlines()
        meta_lines = [ln for ln in lines if ln.startswith("#")]
        assert any("mode:" in ln for ln in meta_lines)
        header = [ln for ln in lines if not ln.startswith("#")][0]
        assert header == "t,sigma22"
        sidecar = json.loads(json_path.read_text())
        assert "truncation" in sidecar and "motion_tail_mass" in sidecar["truncation"]

    def test_deterministic_byte_identical(self, tmp_path):
        config = parse_config(MINIMAL_QUANTIZED)
        run(config, out_dir=tmp_path / "a")
        run(config, out_dir=tmp_path / "b")
        first = (tmp_path / "a" / "sigma22-quantized.csv").read_bytes()
        second = (tmp_path / "b" / "sigma22-quantized.csv").read_bytes()
        assert first == second

    def test_compare_ordering_artifacts(self, tmp_path):
        text = """
mode = compare-ordering
k = 2
eta = 0.2
r = 0.01
electronic = 1
alpha0_abs = 1.2
t_end = 10.0
n_points = 30
"""
        run(parse_config(text), out_dir=tmp_path)
        lines = (tmp_path / "compare-ordering.csv").read_text().splitlines()
        header = [ln for ln in lines if not ln.startswith("#")][0]
        assert header == "tau,sigma22_numeric,sigma22_noordering"
        sidecar = json.loads((tmp_path / "compare-ordering.json").read_text())
        assert "divergence" in sidecar
        assert "sup_distance" in sidecar["divergence"]

    def test_compare_pump_artifacts(self, tmp_path):
        text = """
mode = compare-pump
k = 2
eta = 0.2
r = 0.1
electronic = 1
alpha0_abs = 1.2
beta0_abs_list = 3.0,6.0
t_end = 5.0
n_points = 25
"""
        run(parse_config(text), out_dir=tmp_path)
        lines = (tmp_path / "compare-pump.csv").read_text().splitlines()
        header = [ln for ln in lines if not ln.startswith("#")][0]
        assert header.split(",") == [
            "tau",
            "sigma22_classical",
            "sigma22_quantized_beta3",
            "sigma22_quantized_beta6",
        ]
        sidecar = json.loads((tmp_path / "compare-pump.json").read_text())
        assert set(sidecar["sup_distances"]) == {"3", "6"}

    def test_pfunction_run_one_csv_per_snapshot(self, tmp_path):
        text = """
mode = pfunction
k = 1
eta = 0.25
delta_phi = 0.6
delta_omega_tilde = 1.0
electronic = 2
alpha0_abs = 1.0
beta0_abs = 2.0
snapshots = 0.5,1.5
w = 1.2
quadrature_order = 64
grid_re_min = -2.0
grid_re_max = 2.0
grid_n_re = 9
grid_im_min = -2.0
grid_im_max = 2.0
grid_n_im = 9
"""
        run(parse_config(text), out_dir=tmp_path)
        for t in ("0.5", "1.5"):
            path = tmp_path / f"pfunction_t{t}.csv"
            assert path.exists()
            header = [
                ln for ln in path.read_text().splitlines() if not ln.startswith("#")
            ][0]
            assert header == "re,im,p_omega"
        sidecar = json.loads((tmp_path / "pfunction.json").read_text())
        assert set(sidecar["snapshots"]) == {"0.5", "1.5"}
        assert (tmp_path / "element_cache").exists()

    def test_classical_noordering_run(self, tmp_path):
        text = """
mode = sigma22-classical-noordering
k = 2
eta = 0.2
r = 0.01
electronic = 1
alpha0_abs = 1.0
t_end = 5.0
n_points = 11
"""
        run(parse_config(text), out_dir=tmp_path)
        assert (tmp_path / "sigma22-classical-noordering.csv").exists()


class TestMainExitCodes:
    def test_ok(self, tmp_path):
        config_path = tmp_path / "run.cfg"
        config_path.write_text(MINIMAL_QUANTIZED)
        assert main(["run", "--config", str(config_path), "--out", str(tmp_path / "out")]) == 0

    def test_config_error_is_2(self, tmp_path):
        config_path = tmp_path / "bad.cfg"
        config_path.write_text("mode = sigma22-quantized\nk = -1\neta = 0.2\n")
        assert main(["validate", "--config", str(config_path)]) == 2

    def test_missing_file_is_2(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == 2

    def test_numerical_failure_is_3(self, tmp_path, capsys):
        config_path = tmp_path / "fail.cfg"
        config_path.write_text(
            MINIMAL_QUANTIZED.replace("alpha0_abs = 1.2", "alpha0_abs = 3.0")
            + "n_max_motion = 2\n"
        )
        code = main(["run", "--config", str(config_path), "--out", str(tmp_path)])
        assert code == 3
        payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert payload["error"] == "TruncationTooSmall"

    def test_preset_emission_parses(self, capsys):
        assert main(["preset", "--name", "fig2", "--emit-config"]) == 0
        text = capsys.readouterr().out
        assert parse_config(text) == preset("fig2")

    def test_unknown_preset_is_2(self):
        assert main(["preset", "--name", "fig9", "--emit-config"]) == 2
