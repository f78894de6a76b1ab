"""Scripted experiments: figure-style datasets and engine comparisons.

Each run produces a ComparisonSeries (many-particle vs. mean-field
observables on a shared time grid, with recomputable relative deviations)
plus diagnostics: decay-rate staircase analysis, oscillation periods from
interpolated zero crossings, amplitude envelopes from consecutive extrema,
half-life times.  Writers emit one CSV per run and one JSON manifest
recording the full spec, solver settings and library version; identical
specs with the fixed-step integrator reproduce byte-identical files.

Interaction-strength conventions: the figure presets are parametrised by
a quoted interaction value c whose normalisation is ambiguous.  Under the
'macroscopic' convention (the default) the quoted value is the
macroscopic g directly; under 'microscopic' it is the per-particle
coupling, i.e. g = N * c.  Presets can emit both readings.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__ as _version
from . import fock
from .backend import BACKEND
from .meanfield import BlochState, SpinorState, bloch_from_spinor, integrate_bloch
from .params import DEFAULT_ATOL, DEFAULT_RTOL, ModelParams

CONVENTIONS = ("macroscopic", "microscopic")
DEVIATION_FLOOR = 1e-12

COMPARE_COLUMNS = [
    "t",
    "survival_mp",
    "survival_mf",
    "log_survival_mp",
    "log_survival_mf",
    "pop1_mp",
    "pop2_mp",
    "pop1_mf",
    "pop2_mf",
    "sx_mp",
    "sy_mp",
    "sz_mp",
    "sx_mf",
    "sy_mf",
    "sz_mf",
    "rel_dev_survival",
    "rel_dev_pop1",
    "rel_dev_pop2",
    "rel_dev_sx",
    "rel_dev_sy",
    "rel_dev_sz",
]


def relative_deviation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """|a - b| / max(|b|, floor) elementwise, with mean-field as reference."""
    return np.abs(a - b) / np.maximum(np.abs(b), DEVIATION_FLOOR)


def resolve_convention(quoted_value: float, convention: str, n_particles: int) -> float:
    """Macroscopic interaction g implied by a quoted value under a convention."""
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
    if convention == "macroscopic":
        return float(quoted_value)
    return float(quoted_value) * n_particles


@dataclass
class ExperimentSpec:
    """Fully resolved description of one comparison run."""

    experiment_id: str
    params: ModelParams
    n_particles: int
    x1: complex
    x2: complex
    t_max: float
    n_samples: int
    convention: str = "macroscopic"
    quoted_interaction: float | None = None
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    fixed_step: float | None = None

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.t_max <= 0.0:
            raise ValueError("t_max must be positive")
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}")
        s0 = self.initial_bloch()
        if s0.sphere_defect > 1e-9:
            raise ValueError("initial coherent state maps off the Bloch sphere")

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_samples)

    def initial_bloch(self) -> BlochState:
        return bloch_from_spinor(SpinorState(self.x1, self.x2))

    def as_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "epsilon": self.params.epsilon,
            "v": self.params.v,
            "g": self.params.g,
            "gamma": self.params.gamma,
            "n_particles": self.n_particles,
            "x1": [self.x1.real, self.x1.imag],
            "x2": [self.x2.real, self.x2.imag],
            "t_max": self.t_max,
            "n_samples": self.n_samples,
            "convention": self.convention,
            "quoted_interaction": self.quoted_interaction,
            "rtol": self.rtol,
            "atol": self.atol,
            "fixed_step": self.fixed_step,
        }


@dataclass
class ComparisonSeries:
    """Aligned many-particle and mean-field series with deviations."""

    spec: ExperimentSpec
    t: np.ndarray
    survival_mp: np.ndarray
    survival_mf: np.ndarray
    log_survival_mp: np.ndarray
    log_survival_mf: np.ndarray
    pop1_mp: np.ndarray
    pop2_mp: np.ndarray
    pop1_mf: np.ndarray
    pop2_mf: np.ndarray
    sx_mp: np.ndarray
    sy_mp: np.ndarray
    sz_mp: np.ndarray
    sx_mf: np.ndarray
    sy_mf: np.ndarray
    sz_mf: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def rel_dev_survival(self) -> np.ndarray:
        return relative_deviation(self.survival_mp, self.survival_mf)

    @property
    def rel_dev_pop1(self) -> np.ndarray:
        return relative_deviation(self.pop1_mp, self.pop1_mf)

    @property
    def rel_dev_pop2(self) -> np.ndarray:
        return relative_deviation(self.pop2_mp, self.pop2_mf)

    @property
    def rel_dev_sx(self) -> np.ndarray:
        return relative_deviation(self.sx_mp, self.sx_mf)

    @property
    def rel_dev_sy(self) -> np.ndarray:
        return relative_deviation(self.sy_mp, self.sy_mf)

    @property
    def rel_dev_sz(self) -> np.ndarray:
        return relative_deviation(self.sz_mp, self.sz_mf)

    def rows(self):
        cols = [getattr(self, name) if name != "t" else self.t for name in COMPARE_COLUMNS]
        for i in range(self.t.shape[0]):
            yield [float(col[i]) for col in cols]


def run_comparison(spec: ExperimentSpec) -> ComparisonSeries:
    """Generic many-particle vs. mean-field comparison for one spec.

    The many-particle engine uses the per-particle interaction g/N; the
    mean-field survival is the per-particle norm to the N-th power,
    evaluated in log space.  Populations follow pop_j = (1/2 +- sz) * S
    on both sides, so pop1 + pop2 recovers the survival exactly.
    """
    n = spec.n_particles
    times = spec.times()
    ham = fock.build_hamiltonian(spec.params, n)
    state0 = fock.coherent_state(spec.x1, spec.x2, n)
    # Compare probabilities relative to the initial survival so that
    # non-normalised coherent parameters do not offset the two engines.
    traj = fock.evolve(
        state0, ham, times,
        rtol=spec.rtol, atol=spec.atol, fixed_step=spec.fixed_step,
    )
    log_survival_mp = traj.log_survival - traj.log_survival[0]
    records = traj.observable_records()
    sx_mp = np.array([r.sx for r in records])
    sy_mp = np.array([r.sy for r in records])
    sz_mp = np.array([r.sz for r in records])
    survival_mp = np.exp(log_survival_mp)

    s0 = spec.initial_bloch()
    mf = integrate_bloch(
        BlochState(s0.sx, s0.sy, s0.sz, 1.0), spec.params, times,
        rtol=spec.rtol, atol=spec.atol, fixed_step=spec.fixed_step,
    )
    log_survival_mf = mf.log_survival(n)
    survival_mf = np.exp(log_survival_mf)

    return ComparisonSeries(
        spec=spec,
        t=times,
        survival_mp=survival_mp,
        survival_mf=survival_mf,
        log_survival_mp=log_survival_mp,
        log_survival_mf=log_survival_mf,
        pop1_mp=(0.5 + sz_mp) * survival_mp,
        pop2_mp=(0.5 - sz_mp) * survival_mp,
        pop1_mf=(0.5 + mf.sz) * survival_mf,
        pop2_mf=(0.5 - mf.sz) * survival_mf,
        sx_mp=sx_mp,
        sy_mp=sy_mp,
        sz_mp=sz_mp,
        sx_mf=mf.sx,
        sy_mf=mf.sy,
        sz_mf=mf.sz,
    )


# ---------------------------------------------------------------------------
# Series diagnostics
# ---------------------------------------------------------------------------


def zero_crossings(t: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Linearly interpolated crossings of x through its series mean."""
    xm = x - np.mean(x)
    out = []
    for i in range(len(t) - 1):
        if (xm[i] < 0.0) != (xm[i + 1] < 0.0):
            frac = xm[i] / (xm[i] - xm[i + 1])
            out.append(t[i] + frac * (t[i + 1] - t[i]))
    return np.array(out)


def estimate_period(t: np.ndarray, x: np.ndarray, *, max_crossings: int | None = None) -> float:
    """Oscillation period from interpolated mean crossings.

    Same-direction crossings are exactly one period apart even when the
    oscillation rides on an offset, so the estimate averages the stride-2
    crossing differences.  Limiting the crossing count keeps decayed tails
    (where noise produces spurious crossings) out of the estimate.
    """
    cross = zero_crossings(t, x)
    if max_crossings is not None:
        cross = cross[:max_crossings]
    if len(cross) < 3:
        if len(cross) == 2:
            return 2.0 * float(cross[1] - cross[0])
        return math.nan
    return float(np.mean(cross[2:] - cross[:-2]))


def local_extrema(x: np.ndarray) -> list[int]:
    """Indices of strict local extrema (sign change of the difference)."""
    out = []
    for i in range(1, len(x) - 1):
        if (x[i] - x[i - 1]) * (x[i + 1] - x[i]) < 0.0:
            out.append(i)
    return out


def amplitude_envelope(x: np.ndarray) -> np.ndarray:
    """Peak-to-trough amplitudes between consecutive extrema."""
    ext = local_extrema(x)
    return np.array([abs(x[ext[k + 1]] - x[ext[k]]) for k in range(len(ext) - 1)])


def decay_rate_series(t: np.ndarray, log_survival: np.ndarray) -> np.ndarray:
    """Instantaneous decay rate -d(log survival)/dt on the sample grid."""
    return -np.gradient(log_survival, t)


def count_staircase_steps(t: np.ndarray, log_survival: np.ndarray) -> tuple[int, float]:
    """Staircase steps = peaks of the decay rate; also their mean spacing.

    Each fast-decay episode (site 1 strongly populated) is one peak of the
    instantaneous rate, i.e. one step of the survival staircase.
    """
    rate = decay_rate_series(t, log_survival)
    mean = float(np.mean(rate))
    peaks = [
        i
        for i in range(1, len(t) - 1)
        if rate[i] > rate[i - 1] and rate[i] >= rate[i + 1] and rate[i] > mean
    ]
    if len(peaks) < 2:
        return len(peaks), math.nan
    spacing = float(np.mean(np.diff(t[peaks])))
    return len(peaks), spacing


def half_life(t: np.ndarray, survival: np.ndarray) -> float | None:
    """First time the survival drops below 1/2 (linear interpolation).

    Returns None when the grid never reaches 1/2 (explicit marker).
    """
    s0 = survival[0]
    target = 0.5 * s0
    below = np.nonzero(survival < target)[0]
    if len(below) == 0:
        return None
    j = int(below[0])
    if j == 0:
        return float(t[0])
    frac = (survival[j - 1] - target) / (survival[j - 1] - survival[j])
    return float(t[j - 1] + frac * (t[j] - t[j - 1]))


def windowed_maxima(t: np.ndarray, x: np.ndarray, n_windows: int) -> np.ndarray:
    """Max of x over n_windows equal time windows."""
    edges = np.linspace(t[0], t[-1], n_windows + 1)
    out = np.empty(n_windows)
    for k in range(n_windows):
        mask = (t >= edges[k]) & (t <= edges[k + 1])
        out[k] = float(np.max(x[mask]))
    return out


@dataclass
class DeviationSummary:
    """Comparison metrics between the two engines."""

    max_rel_dev_survival: float
    mean_rel_dev_survival: float
    max_rel_dev_sz: float
    half_life_mp: float | None
    half_life_mf: float | None
    half_life_mismatch: float | None
    period_mp: float
    period_mf: float
    period_mismatch: float

    def as_dict(self) -> dict:
        return {
            "max_rel_dev_survival": self.max_rel_dev_survival,
            "mean_rel_dev_survival": self.mean_rel_dev_survival,
            "max_rel_dev_sz": self.max_rel_dev_sz,
            "half_life_mp": self.half_life_mp,
            "half_life_mf": self.half_life_mf,
            "half_life_mismatch": self.half_life_mismatch,
            "period_mp": self.period_mp,
            "period_mf": self.period_mf,
            "period_mismatch": self.period_mismatch,
        }


def deviation_metrics(series: ComparisonSeries, *, period_crossings: int = 10) -> DeviationSummary:
    """Half-life times, period estimates and deviation extrema for a run."""
    hl_mp = half_life(series.t, series.survival_mp)
    hl_mf = half_life(series.t, series.survival_mf)
    mismatch = None
    if hl_mp is not None and hl_mf is not None and hl_mf > 0.0:
        mismatch = abs(hl_mp - hl_mf) / hl_mf
    p_mp = estimate_period(series.t, series.sz_mp, max_crossings=period_crossings)
    p_mf = estimate_period(series.t, series.sz_mf, max_crossings=period_crossings)
    p_mismatch = math.nan
    if math.isfinite(p_mp) and math.isfinite(p_mf) and p_mf > 0.0:
        p_mismatch = abs(p_mp - p_mf) / p_mf
    return DeviationSummary(
        max_rel_dev_survival=float(np.max(series.rel_dev_survival)),
        mean_rel_dev_survival=float(np.mean(series.rel_dev_survival)),
        max_rel_dev_sz=float(np.max(series.rel_dev_sz)),
        half_life_mp=hl_mp,
        half_life_mf=hl_mf,
        half_life_mismatch=mismatch,
        period_mp=p_mp,
        period_mf=p_mf,
        period_mismatch=p_mismatch,
    )


# ---------------------------------------------------------------------------
# Named experiments
# ---------------------------------------------------------------------------


def run_survival_staircase(spec: ExperimentSpec) -> ComparisonSeries:
    """Survival decay from a coherent state at the south pole.

    Emits the comparison series plus staircase diagnostics: number of
    decay-rate peaks (staircase steps), their mean spacing, and windowed
    maxima of the relative survival deviation.
    """
    s0 = spec.initial_bloch()
    if abs(s0.sz + 0.5) > 1e-9:
        raise ValueError("survival staircase runs start at the south pole (sz = -1/2)")
    series = run_comparison(spec)
    steps, spacing = count_staircase_steps(series.t, series.log_survival_mp)
    series.diagnostics.update(
        {
            "staircase_steps_mp": steps,
            "staircase_step_spacing_mp": spacing,
            "survival_nonincreasing_mp": bool(
                np.all(np.diff(series.survival_mp) <= 1e-12)
            ),
            "windowed_max_rel_dev_survival": windowed_maxima(
                series.t, series.rel_dev_survival, 5
            ).tolist(),
            "metrics": deviation_metrics(series).as_dict(),
        }
    )
    return series


def run_population_imbalance(spec: ExperimentSpec) -> ComparisonSeries:
    """Population imbalance sz(t) from a coherent state at the north pole.

    Diagnostics: oscillation periods of both engines (zero-crossing
    based), the many-particle amplitude envelope, and, when the
    parameters put a sink on the sphere, the distance of the final
    many-particle sz to the mean-field sink.
    """
    s0 = spec.initial_bloch()
    if abs(s0.sz - 0.5) > 1e-9:
        raise ValueError("population imbalance runs start at the north pole (sz = +1/2)")
    series = run_comparison(spec)
    metrics = deviation_metrics(series)
    envelope = amplitude_envelope(series.sz_mp)
    diag = {
        "metrics": metrics.as_dict(),
        "amplitude_envelope_mp": envelope.tolist(),
    }
    p = spec.params
    gg = p.g**2 + p.gamma**2
    if p.epsilon == 0.0 and p.gamma > 0.0 and gg > p.v**2:
        sink_sz = -math.sqrt(gg - p.v**2) / (2.0 * math.sqrt(gg))
        diag["sink_sz"] = sink_sz
        diag["final_sz_mp"] = float(series.sz_mp[-1])
        diag["final_sz_mf"] = float(series.sz_mf[-1])
        diag["final_sz_mp_sink_distance"] = abs(float(series.sz_mp[-1]) - sink_sz)
    series.diagnostics.update(diag)
    return series


@dataclass
class PortraitBundle:
    """Trajectory bundle for one phase portrait plus fixed-point overlay."""

    params: ModelParams
    t: np.ndarray
    trajectories: list
    fixed_point_records: list


def run_phase_portrait(
    params: ModelParams,
    seeds,
    *,
    t_max: float = 20.0,
    n_samples: int = 801,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> PortraitBundle:
    """Integrate a bundle of Bloch seeds and attach the fixed-point overlay."""
    from . import fixedpoints
    import warnings as _warnings

    times = np.linspace(0.0, t_max, n_samples)
    trajectories = []
    for seed in seeds:
        s0 = seed if isinstance(seed, BlochState) else BlochState(*seed)
        trajectories.append(integrate_bloch(s0, params, times, rtol=rtol, atol=atol))
    with _warnings.catch_warnings():
        _warnings.simplefilter("ignore", fixedpoints.MarginalParameterWarning)
        records = fixedpoints.fixed_points(params)
    return PortraitBundle(
        params=params, t=times, trajectories=trajectories, fixed_point_records=records
    )


def portrait_seed_grid(n_lat: int = 4, n_lon: int = 6) -> list[BlochState]:
    """Regular latitude/longitude seed grid on the radius-1/2 sphere."""
    seeds = []
    for i in range(1, n_lat + 1):
        theta = math.pi * i / (n_lat + 1)
        for j in range(n_lon):
            phi = 2.0 * math.pi * j / n_lon
            seeds.append(
                BlochState(
                    0.5 * math.sin(theta) * math.cos(phi),
                    0.5 * math.sin(theta) * math.sin(phi),
                    0.5 * math.cos(theta),
                )
            )
    return seeds


# ---------------------------------------------------------------------------
# Figure presets
# ---------------------------------------------------------------------------


def figure2_spec(convention: str = "macroscopic", *, n_samples: int = 2001, **overrides) -> ExperimentSpec:
    """Survival staircase preset: quoted c = 0.1, gamma = 0.01, N = 20."""
    n = int(overrides.pop("n_particles", 20))
    quoted_c = float(overrides.pop("quoted_interaction", 0.1))
    g = resolve_convention(quoted_c, convention, n)
    return ExperimentSpec(
        experiment_id=f"figure2-{convention}",
        params=ModelParams(epsilon=0.0, v=1.0, g=g, gamma=overrides.pop("gamma", 0.01)),
        n_particles=n,
        x1=0.0,
        x2=1.0,
        t_max=float(overrides.pop("t_max", 10.0)),
        n_samples=n_samples,
        convention=convention,
        quoted_interaction=quoted_c,
        **overrides,
    )


def figure3_spec(panel: str, convention: str = "macroscopic", *, n_samples: int = 4001, **overrides) -> ExperimentSpec:
    """Population imbalance presets: top (c=0.5, gamma=0.1), bottom (c=2, gamma=0.5)."""
    if panel not in ("top", "bottom"):
        raise ValueError("figure 3 panel must be 'top' or 'bottom'")
    quoted_c, gamma = (0.5, 0.1) if panel == "top" else (2.0, 0.5)
    n = int(overrides.pop("n_particles", 20))
    g = resolve_convention(quoted_c, convention, n)
    return ExperimentSpec(
        experiment_id=f"figure3-{panel}-{convention}",
        params=ModelParams(epsilon=0.0, v=1.0, g=g, gamma=gamma),
        n_particles=n,
        x1=1.0,
        x2=0.0,
        t_max=float(overrides.pop("t_max", 40.0)),
        n_samples=n_samples,
        convention=convention,
        quoted_interaction=quoted_c,
        **overrides,
    )


def figure1_panels() -> dict[str, ModelParams]:
    """Phase-portrait parameter sets: (g, gamma) in {0, 2} x {0, 0.75}."""
    return {
        "top-left": ModelParams(epsilon=0.0, v=1.0, g=0.0, gamma=0.0),
        "top-right": ModelParams(epsilon=0.0, v=1.0, g=2.0, gamma=0.0),
        "bottom-left": ModelParams(epsilon=0.0, v=1.0, g=0.0, gamma=0.75),
        "bottom-right": ModelParams(epsilon=0.0, v=1.0, g=2.0, gamma=0.75),
    }


# ---------------------------------------------------------------------------
# CSV / manifest output
# ---------------------------------------------------------------------------


def _format_value(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_comparison_csv(series: ComparisonSeries, path: str) -> None:
    """One row per sample time, deterministic shortest-roundtrip floats."""
    with io.open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(COMPARE_COLUMNS)
        for row in series.rows():
            writer.writerow([_format_value(x) for x in row])


def write_trajectory_csv(path: str, columns: list[str], arrays: list[np.ndarray]) -> None:
    with io.open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for i in range(arrays[0].shape[0]):
            writer.writerow([_format_value(float(a[i])) for a in arrays])


def write_manifest(path: str, *, command: str, options: dict, outputs: list[str], diagnostics: dict | None = None) -> None:
    """Deterministic JSON manifest: spec, solver settings, library version.

    Re-running the recorded command with the recorded options reproduces
    the run (byte-identical with the fixed-step integrator).
    """
    manifest = {
        "library": "leakydimer",
        "version": _version,
        "backend": BACKEND,
        "command": command,
        "options": options,
        "outputs": sorted(outputs),
    }
    if diagnostics:
        manifest["diagnostics"] = diagnostics
    with io.open(path, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True, allow_nan=True)
        handle.write("\n")


def load_manifest(path: str) -> dict:
    with io.open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def default_output_dir() -> str:
    return os.environ.get("LEAKYDIMER_OUT", "./out")
