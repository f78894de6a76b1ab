"""Command-line front end: parse run specs, dispatch engines, write datasets.

Subcommands: mp-evolve, mf-evolve, gpe-evolve, compare, fixed-points,
region-scan, phase-portrait, figure.  Every dataset-producing run writes
one CSV (or a small set of CSVs for bundles) plus exactly one JSON
manifest that records the resolved options; re-running the recorded
command from the manifest reproduces the run, byte-identically when the
fixed-step integrator is selected.

Run specs may live in flat key=value files mirroring the long flag names
(``--t-max 40`` <-> ``t-max = 40``); explicit flags override file values,
and unknown keys in a spec file are errors.  The default output directory
comes from the LEAKYDIMER_OUT environment variable (fallback ./out).

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from multiprocessing import Pool

import numpy as np

from . import fixedpoints as fp
from . import experiments as xp
from . import fock
from .meanfield import BlochState, SpinorState, bloch_from_spinor, integrate_bloch, integrate_gpe
from .params import DEFAULT_ATOL, DEFAULT_RTOL, IntegrationError, ModelParams

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


class SpecFileError(ValueError):
    """Malformed or unknown content in a run-spec file."""


class _Parser(argparse.ArgumentParser):
    """argparse with validation failures mapped to exit code 1."""

    def error(self, message):
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _parse_complex(text: str) -> complex:
    try:
        return complex(str(text).replace(" ", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def read_spec_file(path: str, known_keys: set[str]) -> dict[str, str]:
    """Flat key=value spec file; '#' starts a comment; keys mirror flags."""
    values: dict[str, str] = {}
    with io.open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SpecFileError(
                    f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}"
                )
            key, _, value = line.partition("=")
            key = key.strip().lower().replace("_", "-")
            value = value.strip()
            if not key:
                raise SpecFileError(f"{path}:{lineno}: empty key")
            if key not in known_keys:
                raise SpecFileError(f"{path}:{lineno}: unknown key {key!r}")
            if key in values:
                raise SpecFileError(f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = value
    return values


def _merge_spec(args: argparse.Namespace, parser: _Parser, schema: dict[str, callable]) -> None:
    """Fill argparse defaults from the spec file; explicit flags win."""
    if not getattr(args, "spec", None):
        return
    try:
        file_values = read_spec_file(args.spec, set(schema))
    except OSError as exc:
        parser.error(f"cannot read spec file: {exc}")
        return
    for key, text in file_values.items():
        attr = key.replace("-", "_")
        if getattr(args, attr) is None:
            converter = schema[key]
            try:
                setattr(args, attr, converter(text))
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise SpecFileError(f"{args.spec}: key {key!r}: {exc}") from None


def _apply_defaults(args: argparse.Namespace, defaults: dict[str, object]) -> None:
    for attr, value in defaults.items():
        if getattr(args, attr) is None:
            setattr(args, attr, value)


def _out_dir(args) -> str:
    out = args.out if args.out is not None else xp.default_output_dir()
    os.makedirs(out, exist_ok=True)
    return out


def _model_params(args) -> ModelParams:
    return ModelParams(epsilon=args.epsilon, v=args.v, g=args.g, gamma=args.gamma)


def _solver_kwargs(args) -> dict:
    return {
        "rtol": args.rtol,
        "atol": args.atol,
        "fixed_step": args.fixed_step,
    }


def _times(args) -> np.ndarray:
    return np.linspace(0.0, args.t_max, args.samples)


def _add_param_flags(sub: _Parser) -> None:
    sub.add_argument("--epsilon", type=float, default=None, help="onsite asymmetry")
    sub.add_argument("--v", type=float, default=None, help="inter-site coupling")
    sub.add_argument("--g", type=float, default=None, help="macroscopic interaction strength")
    sub.add_argument("--gamma", type=float, default=None, help="decay rate of site 1 (>= 0)")


def _add_solver_flags(sub: _Parser) -> None:
    sub.add_argument("--rtol", type=float, default=None, help="relative tolerance")
    sub.add_argument("--atol", type=float, default=None, help="absolute tolerance")
    sub.add_argument(
        "--fixed-step",
        type=float,
        default=None,
        help="use the fixed-step RK4 integrator with this max step",
    )
    sub.add_argument("--max-steps", type=int, default=None, help="integration step budget")


def _add_grid_flags(sub: _Parser) -> None:
    sub.add_argument("--t-max", type=float, default=None, help="final time")
    sub.add_argument("--samples", type=_positive_int, default=None, help="number of samples")


def _add_common_flags(sub: _Parser) -> None:
    sub.add_argument("--spec", type=str, default=None, help="key=value run-spec file")
    sub.add_argument("--out", type=str, default=None, help="output directory")
    sub.add_argument("--id", type=str, default=None, help="run identifier (file stem)")


PARAM_SCHEMA = {
    "epsilon": float,
    "v": float,
    "g": float,
    "gamma": float,
}
SOLVER_SCHEMA = {
    "rtol": float,
    "atol": float,
    "fixed-step": float,
    "max-steps": int,
}
GRID_SCHEMA = {"t-max": float, "samples": int}

PARAM_DEFAULTS = {"epsilon": 0.0, "v": 1.0, "g": 0.0, "gamma": 0.0}
SOLVER_DEFAULTS = {"rtol": DEFAULT_RTOL, "atol": DEFAULT_ATOL, "fixed_step": None, "max_steps": None}


def _solver_options(args) -> dict:
    opts = {"rtol": args.rtol, "atol": args.atol}
    if args.fixed_step is not None:
        opts["fixed-step"] = args.fixed_step
    if getattr(args, "max_steps", None) is not None:
        opts["max-steps"] = args.max_steps
    return opts


def _evolve_kwargs(args) -> dict:
    kwargs = {"rtol": args.rtol, "atol": args.atol, "fixed_step": args.fixed_step}
    if getattr(args, "max_steps", None) is not None:
        kwargs["max_steps"] = args.max_steps
    return kwargs


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------


def _cmd_mp_evolve(args, parser) -> int:
    schema = {**PARAM_SCHEMA, **SOLVER_SCHEMA, **GRID_SCHEMA,
              "n-particles": int, "x1": _parse_complex, "x2": _parse_complex}
    _merge_spec(args, parser, schema)
    _apply_defaults(args, {**PARAM_DEFAULTS, **SOLVER_DEFAULTS,
                           "t_max": 10.0, "samples": 401,
                           "n_particles": 20, "x1": 0j, "x2": 1 + 0j,
                           "id": "mp-evolve"})
    params = _model_params(args)
    state = fock.coherent_state(args.x1, args.x2, args.n_particles)
    ham = fock.build_hamiltonian(params, args.n_particles)
    traj = fock.evolve(state, ham, _times(args), **_evolve_kwargs(args))
    records = traj.observable_records()
    out = _out_dir(args)
    csv_path = os.path.join(out, f"{args.id}.csv")
    xp.write_trajectory_csv(
        csv_path,
        ["t", "sx", "sy", "sz", "survival", "log_survival", "pop1", "pop2"],
        [
            traj.times,
            np.array([r.sx for r in records]),
            np.array([r.sy for r in records]),
            np.array([r.sz for r in records]),
            np.array([r.survival for r in records]),
            traj.log_survival,
            np.array([r.pop1 for r in records]),
            np.array([r.pop2 for r in records]),
        ],
    )
    options = {
        **params.as_dict(),
        "n-particles": args.n_particles,
        "x1": str(args.x1), "x2": str(args.x2),
        "t-max": args.t_max, "samples": args.samples,
        **_solver_options(args), "id": args.id,
    }
    xp.write_manifest(os.path.join(out, f"{args.id}.manifest.json"),
                      command="mp-evolve", options=options, outputs=[os.path.basename(csv_path)])
    print(csv_path)
    return EXIT_OK


def _cmd_mf_evolve(args, parser) -> int:
    schema = {**PARAM_SCHEMA, **SOLVER_SCHEMA, **GRID_SCHEMA,
              "sx": float, "sy": float, "sz": float, "n0": float}
    _merge_spec(args, parser, schema)
    _apply_defaults(args, {**PARAM_DEFAULTS, **SOLVER_DEFAULTS,
                           "t_max": 10.0, "samples": 401,
                           "sx": 0.0, "sy": 0.0, "sz": 0.5, "n0": 1.0,
                           "id": "mf-evolve"})
    params = _model_params(args)
    s0 = BlochState(args.sx, args.sy, args.sz, args.n0)
    if s0.sphere_defect > 1e-9:
        parser.error(
            f"initial Bloch state is off the radius-1/2 sphere: |s^2 - 1/4| = {s0.sphere_defect:.3e}"
        )
    traj = integrate_bloch(s0, params, _times(args), **_evolve_kwargs(args))
    out = _out_dir(args)
    csv_path = os.path.join(out, f"{args.id}.csv")
    xp.write_trajectory_csv(
        csv_path,
        ["t", "sx", "sy", "sz", "n", "log_n"],
        [traj.t, traj.sx, traj.sy, traj.sz, traj.n, traj.log_n],
    )
    options = {
        **params.as_dict(),
        "sx": args.sx, "sy": args.sy, "sz": args.sz, "n0": args.n0,
        "t-max": args.t_max, "samples": args.samples,
        **_solver_options(args), "id": args.id,
    }
    xp.write_manifest(os.path.join(out, f"{args.id}.manifest.json"),
                      command="mf-evolve", options=options, outputs=[os.path.basename(csv_path)])
    print(csv_path)
    return EXIT_OK


def _cmd_gpe_evolve(args, parser) -> int:
    schema = {**PARAM_SCHEMA, **SOLVER_SCHEMA, **GRID_SCHEMA,
              "psi1": _parse_complex, "psi2": _parse_complex, "kappa": str}
    _merge_spec(args, parser, schema)
    _apply_defaults(args, {**PARAM_DEFAULTS, **SOLVER_DEFAULTS,
                           "t_max": 10.0, "samples": 401,
                           "psi1": 0j, "psi2": 1 + 0j, "kappa": "normalized",
                           "id": "gpe-evolve"})
    if args.kappa not in ("normalized", "unnormalized"):
        parser.error("--kappa must be 'normalized' or 'unnormalized'")
    params = _model_params(args)
    psi0 = SpinorState(args.psi1, args.psi2)
    traj = integrate_gpe(
        psi0, params, _times(args),
        normalized_kappa=(args.kappa == "normalized"), **_evolve_kwargs(args),
    )
    bloch = traj.bloch()
    amp = np.exp(0.5 * traj.log_n)
    psi1 = amp * traj.u1
    psi2 = amp * traj.u2
    out = _out_dir(args)
    csv_path = os.path.join(out, f"{args.id}.csv")
    xp.write_trajectory_csv(
        csv_path,
        ["t", "psi1_re", "psi1_im", "psi2_re", "psi2_im", "n", "log_n", "beta",
         "sx", "sy", "sz"],
        [traj.t, psi1.real, psi1.imag, psi2.real, psi2.imag, traj.n, traj.log_n,
         traj.beta, bloch.sx, bloch.sy, bloch.sz],
    )
    options = {
        **params.as_dict(),
        "psi1": str(args.psi1), "psi2": str(args.psi2), "kappa": args.kappa,
        "t-max": args.t_max, "samples": args.samples,
        **_solver_options(args), "id": args.id,
    }
    xp.write_manifest(os.path.join(out, f"{args.id}.manifest.json"),
                      command="gpe-evolve", options=options, outputs=[os.path.basename(csv_path)])
    print(csv_path)
    return EXIT_OK


def _run_single_compare(args_tuple):
    """Worker for batched compare runs (also used inline for jobs=1)."""
    spec, out = args_tuple
    series = xp.run_comparison(spec)
    metrics = xp.deviation_metrics(series)
    csv_path = os.path.join(out, f"{spec.experiment_id}.csv")
    xp.write_comparison_csv(series, csv_path)
    options = spec.as_dict()
    xp.write_manifest(
        os.path.join(out, f"{spec.experiment_id}.manifest.json"),
        command="compare",
        options=options,
        outputs=[os.path.basename(csv_path)],
        diagnostics={"metrics": metrics.as_dict()},
    )
    return csv_path


def _cmd_compare(args, parser) -> int:
    schema = {**PARAM_SCHEMA, **SOLVER_SCHEMA, **GRID_SCHEMA,
              "n-particles": int, "x1": _parse_complex, "x2": _parse_complex}
    specs = []
    out = None
    if args.specs:
        # Batched mode: one run per spec file, parallel over files.
        for path in args.specs:
            ns = argparse.Namespace(**{k: None for k in
                ("epsilon", "v", "g", "gamma", "rtol", "atol", "fixed_step", "max_steps",
                 "t_max", "samples", "n_particles", "x1", "x2", "id", "out")})
            ns.spec = path
            _merge_spec(ns, parser, schema)
            _apply_defaults(ns, {**PARAM_DEFAULTS, **SOLVER_DEFAULTS,
                                 "t_max": 10.0, "samples": 1001,
                                 "n_particles": 20, "x1": 0j, "x2": 1 + 0j})
            run_id = os.path.splitext(os.path.basename(path))[0]
            specs.append(_compare_spec(ns, run_id))
        out = _out_dir(args)
    else:
        _merge_spec(args, parser, schema)
        _apply_defaults(args, {**PARAM_DEFAULTS, **SOLVER_DEFAULTS,
                               "t_max": 10.0, "samples": 1001,
                               "n_particles": 20, "x1": 0j, "x2": 1 + 0j,
                               "id": "compare"})
        specs.append(_compare_spec(args, args.id))
        out = _out_dir(args)
    work = [(spec, out) for spec in specs]
    if args.jobs and args.jobs > 1 and len(work) > 1:
        with Pool(processes=args.jobs) as pool:
            paths = pool.map(_run_single_compare, work)
    else:
        paths = [_run_single_compare(item) for item in work]
    for path in paths:
        print(path)
    return EXIT_OK


def _compare_spec(ns, run_id: str) -> xp.ExperimentSpec:
    return xp.ExperimentSpec(
        experiment_id=run_id,
        params=ModelParams(epsilon=ns.epsilon, v=ns.v, g=ns.g, gamma=ns.gamma),
        n_particles=ns.n_particles,
        x1=ns.x1,
        x2=ns.x2,
        t_max=ns.t_max,
        n_samples=ns.samples,
        rtol=ns.rtol,
        atol=ns.atol,
        fixed_step=ns.fixed_step,
    )


def _fixed_point_rows(records):
    for rec in records:
        yield [
            rec.s[0], rec.s[1], rec.s[2],
            rec.kind,
            "" if rec.index is None else rec.index,
            rec.eigenvalues[0].real, rec.eigenvalues[0].imag,
            rec.eigenvalues[1].real, rec.eigenvalues[1].imag,
            rec.residual,
            int(rec.marginal),
        ]


def _cmd_fixed_points(args, parser) -> int:
    schema = {**PARAM_SCHEMA}
    _merge_spec(args, parser, schema)
    _apply_defaults(args, {**PARAM_DEFAULTS, "id": "fixed-points"})
    params = _model_params(args)
    records = fp.fixed_points(params)
    header = f"{'sx':>12} {'sy':>12} {'sz':>12} {'class':>8} {'index':>5} {'residual':>9}"
    print(header)
    for rec in records:
        idx = "-" if rec.index is None else f"{rec.index:+d}"
        print(
            f"{rec.s[0]:12.6f} {rec.s[1]:12.6f} {rec.s[2]:12.6f} "
            f"{rec.kind:>8} {idx:>5} {rec.residual:9.2e}"
        )
    if params.epsilon == 0.0:
        label = fp.region(params)
        print(f"region: {label.label} (|distance to circle| = {label.dist_circle:.6f}, "
              f"|distance to line| = {label.dist_line:.6f})")
    if args.out is not None:
        out = _out_dir(args)
        csv_path = os.path.join(out, f"{args.id}.csv")
        with io.open(csv_path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["sx", "sy", "sz", "class", "index",
                             "eig1_re", "eig1_im", "eig2_re", "eig2_im",
                             "residual", "marginal"])
            for row in _fixed_point_rows(records):
                writer.writerow([xp._format_value(x) if isinstance(x, float) else x for x in row])
        xp.write_manifest(
            os.path.join(out, f"{args.id}.manifest.json"),
            command="fixed-points",
            options={**params.as_dict(), "id": args.id},
            outputs=[os.path.basename(csv_path)],
        )
        print(csv_path)
    return EXIT_OK


def _scan_row_worker(args_tuple):
    v, g, gamma_values = args_tuple
    return [fp._scan_point(v, g, float(gamma), 1e-9) for gamma in gamma_values]


def _cmd_region_scan(args, parser) -> int:
    schema = {
        "v": float,
        "g-min": float, "g-max": float, "g-steps": int,
        "gamma-min": float, "gamma-max": float, "gamma-steps": int,
    }
    _merge_spec(args, parser, schema)
    _apply_defaults(args, {"v": 1.0, "g_min": 0.0, "g_max": 2.0, "g_steps": 41,
                           "gamma_min": 0.0, "gamma_max": 2.0, "gamma_steps": 41,
                           "jobs": 1, "id": "region-scan"})
    g_values = np.linspace(args.g_min, args.g_max, args.g_steps)
    gamma_values = np.linspace(args.gamma_min, args.gamma_max, args.gamma_steps)
    if args.jobs > 1:
        work = [(args.v, float(g), gamma_values) for g in g_values]
        with Pool(processes=args.jobs) as pool:
            rows = pool.map(_scan_row_worker, work)
        points = [pt for row in rows for pt in row]
        result = fp.assemble_scan(args.v, g_values, gamma_values, points)
    else:
        result = fp.bifurcation_scan(args.v, g_values, gamma_values)
    out = _out_dir(args)
    csv_path = os.path.join(out, f"{args.id}.csv")
    with io.open(csv_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["g", "gamma", "region", "n_fixed_points", "n_center",
                         "n_saddle", "n_sink", "n_source", "marginal", "exceptional"])
        for pt in result.points:
            writer.writerow([
                xp._format_value(pt.g), xp._format_value(pt.gamma), pt.label,
                pt.n_fixed_points, pt.n_center, pt.n_saddle, pt.n_sink,
                pt.n_source, int(pt.marginal), int(pt.exceptional),
            ])
    diagnostics = {
        "crossings": [
            {"g": c.g, "gamma": c.gamma, "from": c.count_from, "to": c.count_to, "axis": c.axis}
            for c in result.crossings
        ],
        "exceptional_points": [list(pt) for pt in result.exceptional_points],
    }
    options = {
        "v": args.v,
        "g-min": args.g_min, "g-max": args.g_max, "g-steps": args.g_steps,
        "gamma-min": args.gamma_min, "gamma-max": args.gamma_max,
        "gamma-steps": args.gamma_steps, "id": args.id,
    }
    xp.write_manifest(os.path.join(out, f"{args.id}.manifest.json"),
                      command="region-scan", options=options,
                      outputs=[os.path.basename(csv_path)], diagnostics=diagnostics)
    print(csv_path)
    return EXIT_OK


def _cmd_phase_portrait(args, parser) -> int:
    schema = {**PARAM_SCHEMA, **SOLVER_SCHEMA, **GRID_SCHEMA,
              "lat-seeds": int, "lon-seeds": int}
    _merge_spec(args, parser, schema)
    _apply_defaults(args, {**PARAM_DEFAULTS, **SOLVER_DEFAULTS,
                           "t_max": 20.0, "samples": 801,
                           "lat_seeds": 4, "lon_seeds": 6,
                           "id": "phase-portrait"})
    params = _model_params(args)
    seeds = xp.portrait_seed_grid(args.lat_seeds, args.lon_seeds)
    bundle = xp.run_phase_portrait(
        params, seeds, t_max=args.t_max, n_samples=args.samples,
        rtol=args.rtol, atol=args.atol,
    )
    out = _out_dir(args)
    csv_path = os.path.join(out, f"{args.id}.csv")
    with io.open(csv_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["seed", "t", "sx", "sy", "sz", "n"])
        for k, traj in enumerate(bundle.trajectories):
            n_vals = traj.n
            for i in range(traj.t.shape[0]):
                writer.writerow([k, xp._format_value(float(traj.t[i])),
                                 xp._format_value(float(traj.sx[i])),
                                 xp._format_value(float(traj.sy[i])),
                                 xp._format_value(float(traj.sz[i])),
                                 xp._format_value(float(n_vals[i]))])
    fp_path = os.path.join(out, f"{args.id}.fixed-points.csv")
    with io.open(fp_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["sx", "sy", "sz", "class", "index",
                         "eig1_re", "eig1_im", "eig2_re", "eig2_im",
                         "residual", "marginal"])
        for row in _fixed_point_rows(bundle.fixed_point_records):
            writer.writerow([xp._format_value(x) if isinstance(x, float) else x for x in row])
    options = {
        **params.as_dict(),
        "t-max": args.t_max, "samples": args.samples,
        "lat-seeds": args.lat_seeds, "lon-seeds": args.lon_seeds,
        **_solver_options(args), "id": args.id,
    }
    xp.write_manifest(os.path.join(out, f"{args.id}.manifest.json"),
                      command="phase-portrait", options=options,
                      outputs=[os.path.basename(csv_path), os.path.basename(fp_path)])
    print(csv_path)
    return EXIT_OK


def _cmd_figure(args, parser) -> int:
    out = _out_dir(args)
    outputs = []
    diagnostics = {}
    if args.number == 1:
        panels = xp.figure1_panels()
        chosen = panels if args.panel in (None, "all") else {args.panel: panels[args.panel]}
        if args.panel not in (None, "all") and args.panel not in panels:
            parser.error(f"figure 1 panel must be one of {sorted(panels)} or 'all'")
        for name, params in chosen.items():
            bundle = xp.run_phase_portrait(params, xp.portrait_seed_grid(), t_max=20.0, n_samples=801)
            path = os.path.join(out, f"figure1-{name}.csv")
            with io.open(path, "w", newline="", encoding="utf-8") as handle:
                writer = csv.writer(handle)
                writer.writerow(["seed", "t", "sx", "sy", "sz", "n"])
                for k, traj in enumerate(bundle.trajectories):
                    n_vals = traj.n
                    for i in range(traj.t.shape[0]):
                        writer.writerow([k, xp._format_value(float(traj.t[i])),
                                         xp._format_value(float(traj.sx[i])),
                                         xp._format_value(float(traj.sy[i])),
                                         xp._format_value(float(traj.sz[i])),
                                         xp._format_value(float(n_vals[i]))])
            outputs.append(os.path.basename(path))
    elif args.number == 2:
        conventions = xp.CONVENTIONS if args.convention in (None, "both") else (args.convention,)
        for conv in conventions:
            spec = xp.figure2_spec(conv)
            series = xp.run_survival_staircase(spec)
            path = os.path.join(out, f"{spec.experiment_id}.csv")
            xp.write_comparison_csv(series, path)
            outputs.append(os.path.basename(path))
            diagnostics[spec.experiment_id] = series.diagnostics
    elif args.number == 3:
        panels = ("top", "bottom") if args.panel in (None, "all") else (args.panel,)
        for panel in panels:
            if panel not in ("top", "bottom"):
                parser.error("figure 3 panel must be 'top', 'bottom' or 'all'")
            spec = xp.figure3_spec(panel, args.convention or "macroscopic")
            series = xp.run_population_imbalance(spec)
            path = os.path.join(out, f"{spec.experiment_id}.csv")
            xp.write_comparison_csv(series, path)
            outputs.append(os.path.basename(path))
            diagnostics[spec.experiment_id] = series.diagnostics
    else:
        parser.error("figure number must be 1, 2 or 3")
    options = {"number": args.number, "panel": args.panel, "convention": args.convention}
    xp.write_manifest(os.path.join(out, f"figure{args.number}.manifest.json"),
                      command="figure", options=options, outputs=outputs,
                      diagnostics=diagnostics)
    for name in outputs:
        print(os.path.join(out, name))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(
        prog="leakydimer",
        description="Decaying two-mode Bose-Hubbard laboratory: exact and mean-field dynamics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mp-evolve", help="many-particle evolution from a coherent state")
    _add_param_flags(p); _add_solver_flags(p); _add_grid_flags(p); _add_common_flags(p)
    p.add_argument("--n-particles", "-N", type=_positive_int, default=None)
    p.add_argument("--x1", type=_parse_complex, default=None, help="coherent amplitude, site 1")
    p.add_argument("--x2", type=_parse_complex, default=None, help="coherent amplitude, site 2")
    p.set_defaults(func=_cmd_mp_evolve)

    p = sub.add_parser("mf-evolve", help="mean-field Bloch evolution")
    _add_param_flags(p); _add_solver_flags(p); _add_grid_flags(p); _add_common_flags(p)
    p.add_argument("--sx", type=float, default=None)
    p.add_argument("--sy", type=float, default=None)
    p.add_argument("--sz", type=float, default=None)
    p.add_argument("--n0", type=float, default=None, help="initial per-particle norm")
    p.set_defaults(func=_cmd_mf_evolve)

    p = sub.add_parser("gpe-evolve", help="spinor-form mean-field evolution")
    _add_param_flags(p); _add_solver_flags(p); _add_grid_flags(p); _add_common_flags(p)
    p.add_argument("--psi1", type=_parse_complex, default=None)
    p.add_argument("--psi2", type=_parse_complex, default=None)
    p.add_argument("--kappa", type=str, default=None,
                   help="'normalized' (default) or 'unnormalized' imbalance convention")
    p.set_defaults(func=_cmd_gpe_evolve)

    p = sub.add_parser("compare", help="many-particle vs. mean-field comparison run(s)")
    _add_param_flags(p); _add_solver_flags(p); _add_grid_flags(p); _add_common_flags(p)
    p.add_argument("--n-particles", "-N", type=_positive_int, default=None)
    p.add_argument("--x1", type=_parse_complex, default=None)
    p.add_argument("--x2", type=_parse_complex, default=None)
    p.add_argument("--specs", nargs="+", default=None,
                   help="batch mode: one spec file per run")
    p.add_argument("--jobs", type=_positive_int, default=1,
                   help="parallel workers for batched runs")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("fixed-points", help="fixed points, classes and indices")
    _add_param_flags(p); _add_common_flags(p)
    p.set_defaults(func=_cmd_fixed_points)

    p = sub.add_parser("region-scan", help="fixed-point census over a (g, gamma) grid")
    p.add_argument("--v", type=float, default=None)
    p.add_argument("--g-min", type=float, default=None)
    p.add_argument("--g-max", type=float, default=None)
    p.add_argument("--g-steps", type=_positive_int, default=None)
    p.add_argument("--gamma-min", type=float, default=None)
    p.add_argument("--gamma-max", type=float, default=None)
    p.add_argument("--gamma-steps", type=_positive_int, default=None)
    p.add_argument("--jobs", type=_positive_int, default=None)
    _add_common_flags(p)
    p.set_defaults(func=_cmd_region_scan)

    p = sub.add_parser("phase-portrait", help="trajectory bundle + fixed-point overlay")
    _add_param_flags(p); _add_solver_flags(p); _add_grid_flags(p); _add_common_flags(p)
    p.add_argument("--lat-seeds", type=_positive_int, default=None)
    p.add_argument("--lon-seeds", type=_positive_int, default=None)
    p.set_defaults(func=_cmd_phase_portrait)

    p = sub.add_parser("figure", help="figure presets (1: portraits, 2: staircase, 3: imbalance)")
    p.add_argument("number", type=int, help="figure number: 1, 2 or 3")
    p.add_argument("--panel", type=str, default=None,
                   help="figure 1: top-left/.../bottom-right/all; figure 3: top/bottom/all")
    p.add_argument("--convention", type=str, default=None,
                   choices=["macroscopic", "microscopic", "both"],
                   help="quoted-interaction convention (figure 2/3)")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_figure)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args, parser)
    except SystemExit as exc:
        return int(exc.code or 0)
    except SpecFileError as exc:
        print(f"leakydimer: spec error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, OSError) as exc:
        print(f"leakydimer: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except IntegrationError as exc:
        print(f"leakydimer: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
