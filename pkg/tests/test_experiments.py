"""Experiment drivers: comparisons, diagnostics, CSV/manifest output."""

import csv
import json
import math
import os

import numpy as np
import pytest

from leakydimer import ModelParams
from leakydimer import experiments as xp
from leakydimer.meanfield import BlochState


def small_spec(**overrides):
    defaults = dict(
        experiment_id="unit",
        params=ModelParams(epsilon=0.0, v=1.0, g=0.2, gamma=0.05),
        n_particles=6,
        x1=0.0,
        x2=1.0,
        t_max=6.0,
        n_samples=121,
    )
    defaults.update(overrides)
    return xp.ExperimentSpec(**defaults)


class TestComparisonSeries:
    def test_deviations_are_recomputable(self):
        series = xp.run_comparison(small_spec())
        want = np.abs(series.survival_mp - series.survival_mf) / np.maximum(
            np.abs(series.survival_mf), 1e-12
        )
        assert np.array_equal(series.rel_dev_survival, want)

    def test_population_split_identity(self):
        series = xp.run_comparison(small_spec())
        assert np.allclose(series.pop1_mp + series.pop2_mp, series.survival_mp, rtol=1e-12)
        assert np.allclose(series.pop1_mf + series.pop2_mf, series.survival_mf, rtol=1e-12)

    def test_time_grid_is_exactly_the_requested_grid(self):
        spec = small_spec(t_max=3.0, n_samples=31)
        series = xp.run_comparison(spec)
        assert np.array_equal(series.t, np.linspace(0.0, 3.0, 31))

    def test_zero_decay_means_zero_survival_deviation(self):
        spec = small_spec(params=ModelParams(epsilon=0.0, v=1.0, g=0.3, gamma=0.0))
        series = xp.run_comparison(spec)
        assert np.allclose(series.survival_mp, 1.0, atol=1e-8)
        assert np.allclose(series.survival_mf, 1.0, atol=1e-12)

    def test_interaction_free_runs_agree_to_solver_tolerance(self):
        spec = small_spec(
            params=ModelParams(epsilon=0.0, v=1.0, g=0.0, gamma=0.3),
            rtol=1e-10, atol=1e-13,
        )
        series = xp.run_comparison(spec)
        assert np.max(np.abs(series.sz_mp - series.sz_mf)) < 1e-7


class TestDiagnostics:
    def test_period_of_pure_cosine(self):
        t = np.linspace(0.0, 20.0, 2001)
        x = 0.4 * np.cos(1.7 * t) + 0.1
        period = xp.estimate_period(t, x, max_crossings=10)
        assert period == pytest.approx(2 * math.pi / 1.7, rel=1e-4)

    def test_amplitude_envelope_of_damped_cosine(self):
        t = np.linspace(0.0, 30.0, 3001)
        x = np.exp(-0.1 * t) * np.cos(2.0 * t)
        env = xp.amplitude_envelope(x)
        assert len(env) >= 8
        assert all(env[i] > env[i + 1] for i in range(8))

    def test_half_life_linear_interpolation(self):
        t = np.linspace(0.0, 10.0, 1001)
        s = np.exp(-0.3 * t)
        assert xp.half_life(t, s) == pytest.approx(math.log(2) / 0.3, rel=1e-4)

    def test_half_life_marker_when_not_reached(self):
        t = np.linspace(0.0, 1.0, 11)
        assert xp.half_life(t, np.exp(-0.01 * t)) is None

    def test_identical_series_give_zero_deviations(self):
        series = xp.run_comparison(small_spec())
        series.survival_mp = series.survival_mf.copy()
        series.sz_mp = series.sz_mf.copy()
        metrics = xp.deviation_metrics(series)
        assert metrics.max_rel_dev_survival == 0.0
        assert metrics.half_life_mismatch in (None, 0.0)

    def test_half_life_mismatch_tiny_without_interaction(self):
        spec = small_spec(
            params=ModelParams(epsilon=0.0, v=1.0, g=0.0, gamma=0.4),
            t_max=8.0, n_samples=1601, rtol=1e-10, atol=1e-13,
        )
        series = xp.run_comparison(spec)
        metrics = xp.deviation_metrics(series)
        assert metrics.half_life_mismatch is not None
        assert metrics.half_life_mismatch < 1e-3


class TestNamedExperiments:
    def test_survival_staircase_requires_south_pole(self):
        with pytest.raises(ValueError):
            xp.run_survival_staircase(small_spec(x1=1.0, x2=0.0))

    def test_population_imbalance_requires_north_pole(self):
        with pytest.raises(ValueError):
            xp.run_population_imbalance(small_spec())

    def test_staircase_diagnostics_shape(self):
        spec = xp.figure2_spec("macroscopic", n_samples=501, t_max=6.0)
        series = xp.run_survival_staircase(spec)
        diag = series.diagnostics
        assert diag["survival_nonincreasing_mp"] is True
        assert diag["staircase_steps_mp"] >= 1
        assert len(diag["windowed_max_rel_dev_survival"]) == 5

    def test_convention_resolution(self):
        assert xp.resolve_convention(0.1, "macroscopic", 20) == pytest.approx(0.1)
        assert xp.resolve_convention(0.1, "microscopic", 20) == pytest.approx(2.0)
        with pytest.raises(ValueError):
            xp.resolve_convention(0.1, "canonical", 20)
        macro = xp.figure2_spec("macroscopic")
        micro = xp.figure2_spec("microscopic")
        assert macro.params.g == pytest.approx(0.1)
        assert micro.params.g == pytest.approx(2.0)

    def test_phase_portrait_bundle(self):
        params = ModelParams(epsilon=0.0, v=1.0, g=2.0, gamma=0.75)
        seeds = xp.portrait_seed_grid(2, 3)
        bundle = xp.run_phase_portrait(params, seeds, t_max=5.0, n_samples=101)
        assert len(bundle.trajectories) == 6
        for traj in bundle.trajectories:
            assert traj.max_sphere_defect < 1e-9
        kinds = sorted(rec.kind for rec in bundle.fixed_point_records)
        assert kinds == ["center", "saddle", "sink", "source"]

    def test_rabi_case_trajectories_are_circles(self):
        params = ModelParams(epsilon=0.0, v=1.0, g=0.0, gamma=0.0)
        bundle = xp.run_phase_portrait(
            params, [BlochState(0, 0, 0.5)], t_max=float(np.pi), n_samples=101
        )
        traj = bundle.trajectories[0]
        # distance from the rotation axis stays constant on a circle
        radius = np.sqrt(traj.sy**2 + traj.sz**2)
        assert np.max(np.abs(radius - 0.5)) < 1e-8
        assert np.max(np.abs(traj.sx)) < 1e-8

    def test_damped_selftrapping_flow_relaxes_to_the_sink(self):
        # In the four-point regime most seeds spiral into the
        # lower-hemisphere sink; seeds inside the center island keep
        # orbiting the coexisting center instead.
        params = ModelParams(epsilon=0.0, v=1.0, g=2.0, gamma=0.75)
        sink = next(r for r in xp.run_phase_portrait(
            params, [], t_max=1.0, n_samples=2).fixed_point_records if r.kind == "sink")
        assert sink.s[2] < 0
        bundle = xp.run_phase_portrait(
            params, xp.portrait_seed_grid(3, 4), t_max=60.0, n_samples=121
        )
        dists = [
            math.hypot(t.sx[-1] - sink.s[0], t.sy[-1] - sink.s[1], t.sz[-1] - sink.s[2])
            for t in bundle.trajectories
        ]
        converged = [d for d in dists if d < 1e-3]
        assert len(converged) >= 8

    def test_figure2_half_life_captured_by_mean_field(self):
        series = xp.run_survival_staircase(xp.figure2_spec("macroscopic", n_samples=1001))
        mismatch = series.diagnostics["metrics"]["half_life_mismatch"]
        assert mismatch is not None
        assert mismatch < 0.02


class TestOutputs:
    def test_csv_columns_and_roundtrip(self, tmp_path):
        series = xp.run_comparison(small_spec())
        path = tmp_path / "run.csv"
        xp.write_comparison_csv(series, str(path))
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == xp.COMPARE_COLUMNS
        assert len(rows) == 1 + series.t.shape[0]
        # shortest-roundtrip floats reproduce the arrays exactly
        got = np.array([float(r[0]) for r in rows[1:]])
        assert np.array_equal(got, series.t)
        got_surv = np.array([float(r[1]) for r in rows[1:]])
        assert np.array_equal(got_surv, series.survival_mp)

    def test_manifest_contents(self, tmp_path):
        path = tmp_path / "m.json"
        xp.write_manifest(
            str(path), command="compare", options={"g": 1.0},
            outputs=["a.csv"], diagnostics={"note": 1},
        )
        manifest = xp.load_manifest(str(path))
        assert manifest["library"] == "leakydimer"
        assert manifest["command"] == "compare"
        assert manifest["options"] == {"g": 1.0}
        assert manifest["outputs"] == ["a.csv"]
        assert "version" in manifest and "backend" in manifest

    def test_fixed_step_outputs_are_byte_identical(self, tmp_path):
        spec = small_spec(fixed_step=2e-3, n_samples=41)
        paths = []
        for name in ("one.csv", "two.csv"):
            series = xp.run_comparison(spec)
            path = tmp_path / name
            xp.write_comparison_csv(series, str(path))
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_default_output_dir_env(self, monkeypatch):
        monkeypatch.setenv("LEAKYDIMER_OUT", "/tmp/somewhere")
        assert xp.default_output_dir() == "/tmp/somewhere"
        monkeypatch.delenv("LEAKYDIMER_OUT")
        assert xp.default_output_dir() == "./out"
