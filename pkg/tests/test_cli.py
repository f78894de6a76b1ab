"""Command-line interface: dispatch, spec files, manifests, exit codes."""

import csv
import json
import os

import numpy as np
import pytest

from leakydimer.cli import main, read_spec_file, SpecFileError


def run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestFixedPointsCommand:
    def test_table_with_sink(self, capsys):
        code, out, _ = run_cli(
            ["fixed-points", "--g", "2", "--gamma", "0.5", "--v", "1", "--epsilon", "0"],
            capsys,
        )
        assert code == 0
        assert "sink" in out and "saddle" in out and "source" in out and "center" in out
        assert "-0.437237" in out
        assert out.count("\n") >= 5  # header + 4 records + region line

    def test_csv_output(self, tmp_path, capsys):
        code, out, _ = run_cli(
            ["fixed-points", "--g", "2", "--gamma", "0.5", "--out", str(tmp_path)],
            capsys,
        )
        assert code == 0
        with open(tmp_path / "fixed-points.csv", newline="") as handle:
            rows = list(csv.reader(handle))
        assert len(rows) == 5
        assert rows[0][:5] == ["sx", "sy", "sz", "class", "index"]


class TestValidationExits:
    def test_off_sphere_initial_state_exits_1(self, tmp_path, capsys):
        code, _, err = run_cli(
            ["mf-evolve", "--sx", "0.2", "--sy", "0", "--sz", "0",
             "--out", str(tmp_path)],
            capsys,
        )
        assert code == 1
        assert "sphere" in err

    def test_unknown_flag_exits_1(self, capsys):
        code, _, _ = run_cli(["mf-evolve", "--does-not-exist", "1"], capsys)
        assert code == 1

    def test_bad_gamma_exits_1(self, tmp_path, capsys):
        code, _, err = run_cli(
            ["mp-evolve", "--gamma", "-2", "--out", str(tmp_path)], capsys
        )
        assert code == 1
        assert "gamma" in err

    def test_numerical_failure_exits_2(self, tmp_path, capsys):
        code, _, err = run_cli(
            ["mp-evolve", "--gamma", "0.5", "--t-max", "50", "--max-steps", "10",
             "--out", str(tmp_path)],
            capsys,
        )
        assert code == 2
        assert "numerical failure" in err

    def test_help_exits_0(self, capsys):
        code, out, _ = run_cli(["mp-evolve", "--help"], capsys)
        assert code == 0
        assert "--n-particles" in out


class TestSpecFiles:
    def test_spec_file_roundtrip_and_flag_override(self, tmp_path, capsys):
        spec = tmp_path / "run.spec"
        spec.write_text(
            "# comparison of the two engines\n"
            "g = 0.4\n"
            "gamma = 0.1\n"
            "v = 1\n"
            "n-particles = 4\n"
            "t-max = 2.0\n"
            "samples = 21\n"
        )
        out_dir = tmp_path / "out"
        code, _, _ = run_cli(
            ["compare", "--spec", str(spec), "--g", "0.6", "--out", str(out_dir),
             "--id", "demo"],
            capsys,
        )
        assert code == 0
        manifest = json.load(open(out_dir / "demo.manifest.json"))
        assert manifest["options"]["g"] == 0.6  # flag wins over file
        assert manifest["options"]["gamma"] == 0.1
        assert manifest["options"]["n_particles"] == 4

    def test_unknown_key_is_an_error_with_location(self, tmp_path):
        spec = tmp_path / "bad.spec"
        spec.write_text("g = 1\nwidth = 7\n")
        with pytest.raises(SpecFileError) as info:
            read_spec_file(str(spec), {"g", "gamma"})
        assert "width" in str(info.value)
        assert ":2:" in str(info.value)

    def test_malformed_line_is_an_error_with_location(self, tmp_path):
        spec = tmp_path / "bad.spec"
        spec.write_text("g 1\n")
        with pytest.raises(SpecFileError) as info:
            read_spec_file(str(spec), {"g"})
        assert ":1:" in str(info.value)

    def test_cli_reports_spec_errors_as_exit_1(self, tmp_path, capsys):
        spec = tmp_path / "bad.spec"
        spec.write_text("unknown-key = 3\n")
        code, _, err = run_cli(["compare", "--spec", str(spec)], capsys)
        assert code == 1
        assert "unknown-key" in err


class TestReproducibility:
    def test_fixed_step_rerun_is_byte_identical(self, tmp_path, capsys):
        argv = ["compare", "--g", "0.4", "--gamma", "0.1", "--n-particles", "4",
                "--t-max", "2", "--samples", "11", "--fixed-step", "0.002",
                "--id", "rep"]
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        assert run_cli(argv + ["--out", str(a_dir)], capsys)[0] == 0
        assert run_cli(argv + ["--out", str(b_dir)], capsys)[0] == 0
        assert (a_dir / "rep.csv").read_bytes() == (b_dir / "rep.csv").read_bytes()
        assert (a_dir / "rep.manifest.json").read_bytes() == (
            b_dir / "rep.manifest.json"
        ).read_bytes()

    def test_manifest_roundtrip_reproduces_run(self, tmp_path, capsys):
        out_a = tmp_path / "a"
        argv = ["compare", "--g", "0.3", "--gamma", "0.2", "--n-particles", "3",
                "--t-max", "1.5", "--samples", "7", "--fixed-step", "0.001",
                "--id", "orig"]
        assert run_cli(argv + ["--out", str(out_a)], capsys)[0] == 0
        manifest = json.load(open(out_a / "orig.manifest.json"))
        # rebuild the invocation from the recorded command + options
        opts = manifest["options"]
        out_b = tmp_path / "b"
        rebuilt = [
            manifest["command"],
            "--g", str(opts["g"]), "--gamma", str(opts["gamma"]),
            "--epsilon", str(opts["epsilon"]), "--v", str(opts["v"]),
            "--n-particles", str(opts["n_particles"]),
            "--x1", opts["x1"] if isinstance(opts["x1"], str) else str(complex(*opts["x1"])),
            "--x2", opts["x2"] if isinstance(opts["x2"], str) else str(complex(*opts["x2"])),
            "--t-max", str(opts["t_max"]), "--samples", str(opts["n_samples"]),
            "--rtol", str(opts["rtol"]), "--atol", str(opts["atol"]),
            "--fixed-step", str(opts["fixed_step"]),
            "--id", opts["experiment_id"], "--out", str(out_b),
        ]
        assert run_cli(rebuilt, capsys)[0] == 0
        assert (out_a / "orig.csv").read_bytes() == (out_b / "orig.csv").read_bytes()


class TestScanAndBatch:
    def test_region_scan_csv_schema(self, tmp_path, capsys):
        code, _, _ = run_cli(
            ["region-scan", "--v", "1", "--g-min", "0", "--g-max", "2",
             "--g-steps", "9", "--gamma-min", "0", "--gamma-max", "2",
             "--gamma-steps", "9", "--out", str(tmp_path), "--id", "scan"],
            capsys,
        )
        assert code == 0
        with open(tmp_path / "scan.csv", newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["g", "gamma", "region", "n_fixed_points", "n_center",
                           "n_saddle", "n_sink", "n_source", "marginal", "exceptional"]
        assert len(rows) == 1 + 81
        manifest = json.load(open(tmp_path / "scan.manifest.json"))
        assert manifest["diagnostics"]["exceptional_points"] == [[0.0, 1.0]]

    def test_region_scan_jobs_parity(self, tmp_path, capsys):
        argv = ["region-scan", "--v", "1", "--g-min", "0", "--g-max", "1.5",
                "--g-steps", "7", "--gamma-min", "0", "--gamma-max", "1.5",
                "--gamma-steps", "7", "--id", "scan"]
        one, two = tmp_path / "serial", tmp_path / "parallel"
        assert run_cli(argv + ["--out", str(one), "--jobs", "1"], capsys)[0] == 0
        assert run_cli(argv + ["--out", str(two), "--jobs", "2"], capsys)[0] == 0
        assert (one / "scan.csv").read_bytes() == (two / "scan.csv").read_bytes()

    def test_batched_compare_over_spec_files(self, tmp_path, capsys):
        specs = []
        for i, g in enumerate((0.2, 0.5)):
            spec = tmp_path / f"job{i}.spec"
            spec.write_text(f"g = {g}\ngamma = 0.1\nn-particles = 3\n"
                            "t-max = 1\nsamples = 6\n")
            specs.append(str(spec))
        out_dir = tmp_path / "batch"
        code, out, _ = run_cli(
            ["compare", "--specs", *specs, "--jobs", "2", "--out", str(out_dir)],
            capsys,
        )
        assert code == 0
        assert (out_dir / "job0.csv").exists() and (out_dir / "job1.csv").exists()
        assert (out_dir / "job0.manifest.json").exists()
        m0 = json.load(open(out_dir / "job0.manifest.json"))
        m1 = json.load(open(out_dir / "job1.manifest.json"))
        assert m0["options"]["g"] == 0.2 and m1["options"]["g"] == 0.5


class TestFigurePresets:
    def test_figure3_bottom(self, tmp_path, capsys):
        code, out, _ = run_cli(
            ["figure", "3", "--panel", "bottom", "--out", str(tmp_path)], capsys
        )
        assert code == 0
        csv_path = tmp_path / "figure3-bottom-macroscopic.csv"
        assert csv_path.exists()
        manifest = json.load(open(tmp_path / "figure3.manifest.json"))
        diag = manifest["diagnostics"]["figure3-bottom-macroscopic"]
        assert "sink_sz" in diag
        assert diag["final_sz_mp_sink_distance"] < 0.05
        with open(csv_path, newline="") as handle:
            header = next(csv.reader(handle))
        assert header[0] == "t" and "survival_mp" in header

    def test_figure1_single_panel(self, tmp_path, capsys):
        code, _, _ = run_cli(
            ["figure", "1", "--panel", "top-left", "--out", str(tmp_path)], capsys
        )
        assert code == 0
        assert (tmp_path / "figure1-top-left.csv").exists()

    def test_figure2_emits_both_conventions(self, tmp_path, capsys):
        code, _, _ = run_cli(
            ["figure", "2", "--convention", "both", "--out", str(tmp_path)], capsys
        )
        assert code == 0
        assert (tmp_path / "figure2-macroscopic.csv").exists()
        assert (tmp_path / "figure2-microscopic.csv").exists()
        manifest = json.load(open(tmp_path / "figure2.manifest.json"))
        assert set(manifest["diagnostics"]) == {
            "figure2-macroscopic", "figure2-microscopic"
        }
        for diag in manifest["diagnostics"].values():
            assert diag["survival_nonincreasing_mp"] is True

    def test_figure_bad_number_exits_1(self, tmp_path, capsys):
        code, _, _ = run_cli(["figure", "7", "--out", str(tmp_path)], capsys)
        assert code == 1

    def test_one_manifest_per_run_directory(self, tmp_path, capsys):
        code, _, _ = run_cli(
            ["figure", "3", "--panel", "top", "--out", str(tmp_path)], capsys
        )
        assert code == 0
        manifests = [p for p in os.listdir(tmp_path) if p.endswith("manifest.json")]
        assert len(manifests) == 1
