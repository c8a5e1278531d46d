"""Config-driven experiment harness writing plot-ready CSV artifacts.

Each runner builds its setup from an ExperimentConfig, farms trajectories over
a process pool (seeds are pre-assigned per trajectory index, results reduced
in index order, so outputs are byte-identical for any worker count), and
writes long-format CSVs plus a JSON manifest holding the config, its hash,
per-trajectory seeds, stage timings, and any step failures.
"""

import csv
import json
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from . import __version__
from .baselines import (FDSCN1D, FDSCN2D, SMM1D, SMM2D, run_uniform_trajectory,
                        uniform_grid_1d)
from .config import ExperimentConfig, config_hash
from .mesh import build_mesh
from .noise import AggregatedNoise, NoiseModel1D, NoiseModel2D
from .observables import (discrete_charge, discrete_charge_2d, fit_order,
                          mean_square_error, trapezoid_weights)
from .stepper import ProblemSpec, RunOptions, StepFailure, run_trajectory


@dataclass(frozen=True)
class RunResult:
    manifest: dict
    paths: list
    data: object = None


# ---------------------------------------------------------------- initial data

def soliton_datum(x: np.ndarray) -> np.ndarray:
    # carrier e^{-ix} travels right (+2) under the i du = [u_xx + ...]dt sign
    # convention; amplitude sqrt(6/5), width sqrt(2)
    return (np.sqrt(6.0 / 5.0) / np.cosh(np.sqrt(2.0) * x)
            * np.exp(-1j * x))


def collision_datum(x: np.ndarray) -> np.ndarray:
    fast = (np.sqrt(6.0 / 5.0) / np.cosh(np.sqrt(2.0) * x)
            * np.exp(-2j * x))
    slow = (np.sqrt(3.0 / 5.0) / np.cosh(np.sqrt(2.0) * (x - 30.0))
            * np.exp(-0.5j * (x - 30.0)))
    return fast + slow


def gaussian_datum(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    X, Y = np.meshgrid(x, y, indexing="ij")
    return np.exp(-0.5 * (X ** 2 + Y ** 2)).astype(complex)


def sine_datum(x: np.ndarray) -> np.ndarray:
    return np.sin(np.pi * x).astype(complex)


# ------------------------------------------------------------------- plumbing

def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_csv(path: str, header, rows) -> str:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return path


def output_dir(config: ExperimentConfig, subdir: str) -> str:
    # root resolution (CLI flag > ODDS_NLS_OUTPUT env > config) happens in the
    # CLI; library callers get config.output_dir as-is
    path = os.path.join(config.output_dir, subdir)
    os.makedirs(path, exist_ok=True)
    return path


def _manifest(config: ExperimentConfig, stages: dict, artifacts, failures,
              extra=None) -> dict:
    man = {
        "experiment": config.kind,
        "artifact_version": __version__,
        "config": config.to_dict(),
        "config_sha256": config_hash(config),
        "per_trajectory_seeds": [[config.seed, p]
                                 for p in range(config.trajectories)],
        "stage_seconds": {k: round(v, 3) for k, v in stages.items()},
        "artifacts": [os.path.basename(p) for p in artifacts],
        "failures": failures,
    }
    if extra:
        man.update(extra)
    return man


def _write_manifest(dirpath: str, man: dict) -> str:
    path = os.path.join(dirpath, "manifest.json")
    with open(path, "w") as fh:
        json.dump(man, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


_CTX = None


def _init_worker(builder):
    global _CTX
    _CTX = builder()


def _run_job(args):
    fn, job = args
    return fn(_CTX, job)


def _farm(builder, job_fn, jobs, workers):
    """Run job_fn(ctx, job) for each job, in order, on `workers` processes."""
    jobs = list(jobs)
    if workers <= 1 or len(jobs) <= 1:
        ctx = builder()
        return [job_fn(ctx, job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(builder,)) as pool:
        return list(pool.map(_run_job, [(job_fn, job) for job in jobs]))


def _snapshot_steps(config: ExperimentConfig):
    steps = sorted({round(t / config.tau) for t in config.snapshot_times})
    n_steps = round(config.t_final / config.tau)
    return tuple(s for s in steps if 0 <= s <= n_steps)


# ------------------------------------------------------------------ soliton1d

def _mesh_1d(config):
    return build_mesh(config.x_left, config.x_right, config.elements,
                      config.degree)


def _soliton_ctx(config):
    mesh = _mesh_1d(config)
    u0 = soliton_datum(mesh.nodes)
    u0[0] = u0[-1] = 0.0
    model = NoiseModel1D.build(config.x_left, config.x_right, mesh.nodes,
                               modes=config.modes, seed=config.seed)
    return config, mesh, u0, model


def _trajectory_job(ctx, p):
    config, mesh, u0, model = ctx
    options = RunOptions(noise=model.trajectory(p) if config.eps else None,
                         snapshot_steps=_snapshot_steps(config),
                         invariant_stride=config.invariant_stride)
    try:
        res = run_trajectory(u0, mesh, ProblemSpec(config.lam, config.eps),
                             config.tau, round(config.t_final / config.tau),
                             options=options)
    except StepFailure as exc:
        return {"trajectory": p, "step": exc.step, "time": exc.time,
                "error": str(exc)}
    return res


def run_soliton1d(config: ExperimentConfig, workers: int = 1) -> RunResult:
    t0 = time.perf_counter()
    mesh = _mesh_1d(config)
    results = _farm(partial(_soliton_ctx, config), _trajectory_job,
                    range(config.trajectories), workers)
    t_run = time.perf_counter() - t0

    failures = [r for r in results if isinstance(r, dict)]
    runs = [(p, r) for p, r in enumerate(results) if not isinstance(r, dict)]
    dirpath = output_dir(config, "soliton1d")
    paths = []
    profile_rows = []
    charge_rows = []
    energy_rows = []
    for p, res in runs:
        for step in sorted(res.snapshots):
            t = step * config.tau
            for x, val in zip(mesh.nodes, res.snapshots[step]):
                profile_rows.append((p, t, x, abs(val)))
        for t, c, e in zip(res.times, res.charge, res.energy):
            charge_rows.append((p, t, c))
            energy_rows.append((p, t, e))
    paths.append(_write_csv(
        os.path.join(dirpath, "profiles.csv"),
        ["trajectory (index)", "time (time units)", "x (space units)",
         "abs_u (amplitude)"], profile_rows))
    paths.append(_write_csv(
        os.path.join(dirpath, "charge.csv"),
        ["trajectory (index)", "time (time units)",
         "charge (amplitude^2 x space)"], charge_rows))
    paths.append(_write_csv(
        os.path.join(dirpath, "energy.csv"),
        ["trajectory (index)", "time (time units)", "energy (energy units)"],
        energy_rows))
    if runs:
        energies = np.vstack([r.energy for _, r in runs])
        mean_rows = list(zip(runs[0][1].times, energies.mean(axis=0)))
        paths.append(_write_csv(
            os.path.join(dirpath, "energy_mean.csv"),
            ["time (time units)", "mean_energy (energy units)"], mean_rows))
    man = _manifest(config, {"run": t_run}, paths, failures)
    paths.append(_write_manifest(dirpath, man))
    return RunResult(man, paths)


# ---------------------------------------------------------------- collision1d

def _collision_ctx(config):
    mesh = _mesh_1d(config)
    u0 = collision_datum(mesh.nodes)
    u0[0] = u0[-1] = 0.0
    model = NoiseModel1D.build(config.x_left, config.x_right, mesh.nodes,
                               modes=config.modes, seed=config.seed)
    return config, mesh, u0, model


def run_collision1d(config: ExperimentConfig, workers: int = 1) -> RunResult:
    t0 = time.perf_counter()
    mesh = _mesh_1d(config)
    results = _farm(partial(_collision_ctx, config), _trajectory_job,
                    range(config.trajectories), workers)
    t_run = time.perf_counter() - t0
    failures = [r for r in results if isinstance(r, dict)]
    runs = [(p, r) for p, r in enumerate(results) if not isinstance(r, dict)]
    dirpath = output_dir(config, "collision1d")
    rows = []
    charge_rows = []
    for p, res in runs:
        for step in sorted(res.snapshots):
            t = step * config.tau
            for x, val in zip(mesh.nodes, res.snapshots[step]):
                rows.append((p, t, x, val.real, val.imag, abs(val)))
        for t, c in zip(res.times, res.charge):
            charge_rows.append((p, t, c))
    paths = [
        _write_csv(os.path.join(dirpath, "snapshots.csv"),
                   ["trajectory (index)", "time (time units)",
                    "x (space units)", "re_u (amplitude)", "im_u (amplitude)",
                    "abs_u (amplitude)"], rows),
        _write_csv(os.path.join(dirpath, "charge.csv"),
                   ["trajectory (index)", "time (time units)",
                    "charge (amplitude^2 x space)"], charge_rows),
    ]
    man = _manifest(config, {"run": t_run}, paths, failures)
    paths.append(_write_manifest(dirpath, man))
    return RunResult(man, paths)


# ----------------------------------------------------------------- gaussian2d

def _gaussian_setup(config):
    mesh_x = build_mesh(config.x_left, config.x_right, config.elements,
                        config.degree)
    mesh_y = build_mesh(config.y_left, config.y_right, config.elements_y,
                        config.degree_y)
    u0 = gaussian_datum(mesh_x.nodes, mesh_y.nodes)
    u0[0, :] = u0[-1, :] = 0.0
    u0[:, 0] = u0[:, -1] = 0.0
    model = NoiseModel2D.build(config.x_left, config.x_right, config.y_left,
                               config.y_right, mesh_x.nodes, mesh_y.nodes,
                               modes_x=config.modes, modes_y=config.modes_y,
                               seed=config.seed)
    return mesh_x, mesh_y, u0, model


def run_gaussian2d(config: ExperimentConfig, workers: int = 1) -> RunResult:
    del workers  # eps sweep shares one trajectory stream; runs are serial
    eps_values = config.eps_values or (config.eps,)
    mesh_x, mesh_y, u0, model = _gaussian_setup(config)
    wx = trapezoid_weights(mesh_x.nodes)
    wy = trapezoid_weights(mesh_y.nodes)
    dirpath = output_dir(config, "gaussian2d")
    surface_rows = []
    charge_rows = []
    failures = []
    stages = {}
    n_steps = round(config.t_final / config.tau)
    for eps in eps_values:
        t0 = time.perf_counter()
        options = RunOptions(noise=model.trajectory(0) if eps else None,
                             snapshot_steps=_snapshot_steps(config),
                             record_invariants=False)
        try:
            res = run_trajectory(u0, (mesh_x, mesh_y),
                                 ProblemSpec(config.lam, eps), config.tau,
                                 n_steps, options=options)
        except StepFailure as exc:
            failures.append({"eps": eps, "step": exc.step, "time": exc.time,
                             "error": str(exc)})
            continue
        finally:
            stages[f"run_eps_{eps:g}"] = time.perf_counter() - t0
        for step in sorted(res.snapshots):
            t = step * config.tau
            field = res.snapshots[step]
            charge_rows.append((eps, t, float(wx @ np.abs(field) ** 2 @ wy)))
            for i, x in enumerate(mesh_x.nodes):
                for j, y in enumerate(mesh_y.nodes):
                    surface_rows.append((eps, t, x, y, abs(field[i, j])))
    paths = [
        _write_csv(os.path.join(dirpath, "surfaces.csv"),
                   ["eps (dimensionless)", "time (time units)",
                    "x (space units)", "y (space units)",
                    "abs_u (amplitude)"], surface_rows),
        _write_csv(os.path.join(dirpath, "charge.csv"),
                   ["eps (dimensionless)", "time (time units)",
                    "charge (amplitude^2 x area)"], charge_rows),
    ]
    man = _manifest(config, stages, paths, failures,
                    extra={"eps_sweep": list(eps_values)})
    paths.append(_write_manifest(dirpath, man))
    return RunResult(man, paths)


# ---------------------------------------------------------------- convergence

def _convergence_ctx(config):
    mesh = _mesh_1d(config)
    u0 = sine_datum(mesh.nodes)
    u0[0] = u0[-1] = 0.0
    model = NoiseModel1D.build(config.x_left, config.x_right, mesh.nodes,
                               modes=config.modes, seed=config.seed)
    weights = trapezoid_weights(mesh.nodes)
    return config, mesh, u0, model, weights


def _convergence_job(ctx, p):
    """Squared weighted terminal errors of every ladder tau for trajectory p."""
    config, mesh, u0, model, weights = ctx
    prob = ProblemSpec(config.lam, config.eps)
    n_ref = round(config.t_final / config.tau_ref)
    res = run_trajectory(u0, mesh, prob, config.tau_ref, n_ref,
                         options=RunOptions(noise=model.trajectory(p),
                                            record_invariants=False))
    ref = res.state.values
    out = np.empty(len(config.tau_ladder))
    for i, tau in enumerate(config.tau_ladder):
        ratio = round(tau / config.tau_ref)
        noise = AggregatedNoise(model.trajectory(p), ratio, config.tau_ref)
        res = run_trajectory(u0, mesh, prob, tau,
                             round(config.t_final / tau),
                             options=RunOptions(noise=noise,
                                                record_invariants=False))
        diff = res.state.values - ref
        out[i] = float(weights @ np.abs(diff) ** 2)
    return out


def run_convergence(config: ExperimentConfig, workers: int = 1) -> RunResult:
    t0 = time.perf_counter()
    sq_errors = _farm(partial(_convergence_ctx, config), _convergence_job,
                      range(config.trajectories), workers)
    t_run = time.perf_counter() - t0
    taus = np.array(config.tau_ladder)
    order = np.argsort(taus)[::-1]  # fit_order wants decreasing taus
    errs = np.sqrt(np.vstack(sq_errors).mean(axis=0))
    fit = fit_order(taus[order], errs[order])
    dirpath = output_dir(config, "convergence")
    rows = []
    for i, (tau, err) in enumerate(zip(fit.taus, fit.errors)):
        rows.append((tau, err, "" if i == 0 else _fmt(fit.orders[i - 1])))
    paths = [_write_csv(os.path.join(dirpath, "table.csv"),
                        ["tau (time units)", "err (weighted l2 amplitude)",
                         "order (dimensionless)"], rows)]
    man = _manifest(config, {"run": t_run}, paths, [],
                    extra={"global_order": fit.global_order,
                           "tau_ref": config.tau_ref})
    paths.append(_write_manifest(dirpath, man))
    return RunResult(man, paths, data=fit)


# ----------------------------------------------------------------- efficiency

def _time_odds_1d(config, n_steps):
    mesh = _mesh_1d(config)
    u0 = soliton_datum(mesh.nodes)
    u0[0] = u0[-1] = 0.0
    model = NoiseModel1D.build(config.x_left, config.x_right, mesh.nodes,
                               modes=config.modes, seed=config.seed)
    prob = ProblemSpec(config.lam, config.eps)

    def once(rep):
        opts = RunOptions(noise=model.trajectory(rep), record_invariants=False)
        run_trajectory(u0, mesh, prob, config.tau, n_steps, options=opts)

    return mesh.nodes.size, once


def _time_uniform_1d(config, n_steps, scheme):
    grid = uniform_grid_1d(config.x_left, config.x_right,
                           config.uniform_points)
    u0 = soliton_datum(grid.nodes)
    u0[0] = u0[-1] = 0.0
    model = NoiseModel1D.build(config.x_left, config.x_right, grid.nodes,
                               modes=config.modes, seed=config.seed)
    method = scheme(grid, config.tau, config.lam, config.eps)

    def once(rep):
        run_uniform_trajectory(method, u0, n_steps,
                               noise=model.trajectory(rep))

    return grid.nodes.size, once


def _time_odds_2d(config, n_steps):
    mesh_x, mesh_y, u0, model = _gaussian_setup(config)
    prob = ProblemSpec(config.lam, config.eps)

    def once(rep):
        opts = RunOptions(noise=model.trajectory(rep), record_invariants=False)
        run_trajectory(u0, (mesh_x, mesh_y), prob, config.tau, n_steps,
                       options=opts)

    return mesh_x.nodes.size, once


def _time_uniform_2d(config, n_steps, scheme):
    grid_x = uniform_grid_1d(config.x_left, config.x_right,
                             config.uniform_points)
    grid_y = uniform_grid_1d(config.y_left, config.y_right,
                             config.uniform_points)
    u0 = gaussian_datum(grid_x.nodes, grid_y.nodes)
    u0[0, :] = u0[-1, :] = 0.0
    u0[:, 0] = u0[:, -1] = 0.0
    model = NoiseModel2D.build(config.x_left, config.x_right, config.y_left,
                               config.y_right, grid_x.nodes, grid_y.nodes,
                               modes_x=config.modes, modes_y=config.modes_y,
                               seed=config.seed)
    method = scheme(grid_x, grid_y, config.tau, config.lam, config.eps)

    def once(rep):
        run_uniform_trajectory(method, u0, n_steps,
                               noise=model.trajectory(rep))

    return grid_x.nodes.size, once


def run_efficiency(config: ExperimentConfig, workers: int = 1) -> RunResult:
    # wall-clock comparison: always serial, one scheme at a time
    del workers
    n_steps = round(config.t_final / config.tau)
    if config.dimension == 1:
        setups = [("odds", *_time_odds_1d(config, n_steps)),
                  ("smm", *_time_uniform_1d(config, n_steps, SMM1D)),
                  ("fdscn", *_time_uniform_1d(config, n_steps, FDSCN1D))]
    else:
        setups = [("odds", *_time_odds_2d(config, n_steps)),
                  ("smm", *_time_uniform_2d(config, n_steps, SMM2D)),
                  ("fdscn", *_time_uniform_2d(config, n_steps, FDSCN2D))]
    rows = []
    medians = {}
    stages = {}
    for name, points, once in setups:
        t0 = time.perf_counter()
        times = []
        for rep in range(config.repeats):
            t1 = time.perf_counter()
            once(rep)
            times.append(time.perf_counter() - t1)
        stages[name] = time.perf_counter() - t0
        med = statistics.median(times)
        medians[name] = med
        rows.append((name, config.dimension, points, n_steps, config.repeats,
                     med, min(times), max(times)))
    dirpath = output_dir(config, f"efficiency{config.dimension}d")
    paths = [_write_csv(
        os.path.join(dirpath, "timings.csv"),
        ["scheme (name)", "dimension (count)", "points_per_axis (count)",
         "steps (count)", "repeats (count)", "median_seconds (s)",
         "min_seconds (s)", "max_seconds (s)"], rows)]
    man = _manifest(config, stages, paths, [], extra={"medians": medians})
    paths.append(_write_manifest(dirpath, man))
    return RunResult(man, paths, data=medians)


RUNNERS = {
    "soliton1d": run_soliton1d,
    "collision1d": run_collision1d,
    "gaussian2d": run_gaussian2d,
    "convergence": run_convergence,
    "efficiency": run_efficiency,
}


def run_experiment(config: ExperimentConfig, workers: int = 1) -> RunResult:
    return RUNNERS[config.kind](config, workers=workers)
