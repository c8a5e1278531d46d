"""Time stepping for the stochastic cubic Schrodinger equation.

One step composes the exact pointwise nonlinear/stochastic flow with
Crank-Nicolson solves of the linear part on the overlapping collocation
mesh; in 2D the linear part is swept dimension by dimension.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import (CNSystem, KrylovError, SolverOptions, build_cn_system,
                     cn_step_linear, krylov_solve_block)
from .mesh import OverlapMesh1D, assemble_global
from .observables import (discrete_charge, discrete_charge_2d,
                          discrete_energy, discrete_energy_2d)


@dataclass
class StateField:
    values: np.ndarray
    t: float


@dataclass(frozen=True)
class ProblemSpec:
    """Equation parameters and Dirichlet data.

    boundary, when given, must be vectorized: called as boundary(t, x) in 1D
    and boundary(t, x, y) in 2D with broadcastable arrays, returning complex
    values. None means homogeneous data.
    """

    lam: float = 1.0
    eps: float = 0.0
    boundary: Callable | None = None


class StepFailure(RuntimeError):
    """A linear solve failed mid-run; carries the step index and time."""

    def __init__(self, message: str, step: int, time: float, residual: float):
        super().__init__(message)
        self.step = step
        self.time = time
        self.residual = residual


def nonlinear_flow(values: np.ndarray, tau: float, lam: float, eps: float,
                   dw: np.ndarray | None = None) -> np.ndarray:
    """Exact flow of i du = lam |u|^2 u dt + eps u o dW over one step.

    Multiplies by a unit phase, so |values| is preserved pointwise. dw is the
    Wiener increment on the same grid; it is only consulted when eps != 0.
    """
    phase = tau * lam * np.abs(values) ** 2
    if eps != 0.0:
        if dw is None:
            raise ValueError("eps != 0 requires a Wiener increment")
        phase = phase + eps * dw
    return values * np.exp(-1j * phase)


def _bc_pair(problem: ProblemSpec, t_old: float, t_new: float,
             xs: np.ndarray, ys=None):
    """Evaluate boundary data at both time levels; complex arrays."""
    if ys is None:
        old = np.asarray(problem.boundary(t_old, xs), dtype=complex)
        new = np.asarray(problem.boundary(t_new, xs), dtype=complex)
    else:
        old = np.asarray(problem.boundary(t_old, xs, ys), dtype=complex)
        new = np.asarray(problem.boundary(t_new, xs, ys), dtype=complex)
    return old, new


def odds_step_1d(values: np.ndarray, t: float, tau: float,
                 problem: ProblemSpec, mesh: OverlapMesh1D, system: CNSystem,
                 opts: SolverOptions | None = None,
                 dw: np.ndarray | None = None) -> np.ndarray:
    """One full 1D step from t to t + tau. Returns the new grid values."""
    w = nonlinear_flow(values, tau, problem.lam, problem.eps, dw)
    if problem.boundary is None:
        w[0] = 0.0
        w[-1] = 0.0
        return cn_step_linear(system, w, opts)
    ends = np.array([mesh.x_left, mesh.x_right])
    bc_old, bc_new = _bc_pair(problem, t, t + tau, ends)
    w[0], w[-1] = bc_old
    forcing = system.boundary_forcing((bc_old[0], bc_old[1]),
                                      (bc_new[0], bc_new[1]))
    return cn_step_linear(system, w, opts, forcing=forcing,
                          bc_new=(bc_new[0], bc_new[1]))


def _sweep_lines(block: np.ndarray, system: CNSystem, opts, left_old,
                 right_old, left_new, right_new) -> None:
    """Solve one CN step along axis 0 of block for every column, in place.

    The bc arrays hold per-column Dirichlet data (None means homogeneous).
    Every column shares the line operator, so the per-column solves advance
    in lockstep through krylov_solve_block; each column sees exactly the
    linear step cn_step_linear would give it.
    """
    interior = block[1:-1, :]
    U = np.vstack([interior.imag, interior.real])
    if left_old is None:
        rhs = system.G_explicit @ U + system.F[:, None]
    else:
        half = system.tau / 2.0
        qb = np.vstack([left_new.imag + left_old.imag,
                        right_new.imag + right_old.imag])
        pb = np.vstack([left_new.real + left_old.real,
                        right_new.real + right_old.real])
        forcing = np.vstack([half * (system.B_boundary @ qb),
                             -half * (system.B_boundary @ pb)])
        rhs = system.G_explicit @ U + forcing
    sol = krylov_solve_block(system.G, rhs, U, opts)
    n = system.n_interior
    block[1:-1, :] = sol[n:, :] + 1j * sol[:n, :]
    if left_old is None:
        block[0, :] = 0.0
        block[-1, :] = 0.0
    else:
        block[0, :] = left_new
        block[-1, :] = right_new


def _refresh_edges_2d(w: np.ndarray, problem: ProblemSpec, t: float,
                      mesh_x: OverlapMesh1D, mesh_y: OverlapMesh1D) -> None:
    if problem.boundary is None:
        w[0, :] = 0.0
        w[-1, :] = 0.0
        w[:, 0] = 0.0
        w[:, -1] = 0.0
        return
    xs, ys = mesh_x.nodes, mesh_y.nodes
    w[0, :] = problem.boundary(t, xs[0], ys)
    w[-1, :] = problem.boundary(t, xs[-1], ys)
    w[:, 0] = problem.boundary(t, xs, ys[0])
    w[:, -1] = problem.boundary(t, xs, ys[-1])


def odds_step_2d(values: np.ndarray, t: float, tau: float,
                 problem: ProblemSpec, mesh_x: OverlapMesh1D,
                 mesh_y: OverlapMesh1D, system_x: CNSystem,
                 system_y: CNSystem, opts: SolverOptions | None = None,
                 dw: np.ndarray | None = None) -> np.ndarray:
    """One full 2D step: nonlinear flow, then x-line solves, then y-line."""
    w = nonlinear_flow(values, tau, problem.lam, problem.eps, dw)
    xs, ys = mesh_x.nodes, mesh_y.nodes
    if problem.boundary is None:
        _sweep_lines(w[:, 1:-1], system_x, opts, None, None, None, None)
        wt = np.ascontiguousarray(w[1:-1, :].T)
        _sweep_lines(wt, system_y, opts, None, None, None, None)
        w[1:-1, :] = wt.T
        _refresh_edges_2d(w, problem, t + tau, mesh_x, mesh_y)
        return w
    y_int = ys[1:-1]
    lo, ln = _bc_pair(problem, t, t + tau, np.full_like(y_int, xs[0]), y_int)
    ro, rn = _bc_pair(problem, t, t + tau, np.full_like(y_int, xs[-1]), y_int)
    _sweep_lines(w[:, 1:-1], system_x, opts, lo, ro, ln, rn)
    x_int = xs[1:-1]
    bo, bn = _bc_pair(problem, t, t + tau, x_int, np.full_like(x_int, ys[0]))
    to, tn = _bc_pair(problem, t, t + tau, x_int, np.full_like(x_int, ys[-1]))
    wt = np.ascontiguousarray(w[1:-1, :].T)
    _sweep_lines(wt, system_y, opts, bo, to, bn, tn)
    w[1:-1, :] = wt.T
    _refresh_edges_2d(w, problem, t + tau, mesh_x, mesh_y)
    return w


@dataclass
class RunOptions:
    noise: object | None = None          # trajectory noise source, eps != 0
    solver: SolverOptions = field(default_factory=SolverOptions)
    snapshot_steps: tuple[int, ...] = ()
    record_invariants: bool = True
    invariant_stride: int = 1


@dataclass
class TrajectoryResult:
    times: np.ndarray      # invariant sample times (empty when not recorded)
    charge: np.ndarray
    energy: np.ndarray
    snapshots: dict        # step index -> grid values copy
    state: StateField      # final state
    n_steps: int


def run_trajectory(u0: np.ndarray, mesh, problem: ProblemSpec, tau: float,
                   n_steps: int, t0: float = 0.0,
                   options: RunOptions | None = None) -> TrajectoryResult:
    """Integrate one trajectory over n_steps steps of size tau.

    Args:
        u0: initial grid values, shape (n,) in 1D or (nx, ny) in 2D.
        mesh: OverlapMesh1D, or an (mesh_x, mesh_y) pair for 2D runs.
        problem: equation parameters and Dirichlet data.
        tau: time step, > 0.
        n_steps: number of steps, >= 0.
        t0: initial time.
        options: noise source, solver settings, snapshot/invariant recording.

    Returns:
        TrajectoryResult with invariant series, requested snapshots and the
        final state. When eps == 0 the noise source is never consulted.

    Raises:
        StepFailure: a linear solve did not reach tolerance mid-run.
        ValueError: inconsistent shapes, missing noise, bad snapshot indices.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    options = options or RunOptions()
    two_d = isinstance(mesh, tuple)
    if two_d:
        mesh_x, mesh_y = mesh
        expected = (mesh_x.n_nodes, mesh_y.n_nodes)
    else:
        expected = (mesh.n_nodes,)
    values = np.array(u0, dtype=complex)
    if values.shape != expected:
        raise ValueError(f"u0 shape {values.shape}, mesh wants {expected}")
    if problem.eps != 0.0 and options.noise is None:
        raise ValueError("eps != 0 requires a noise source in RunOptions")
    for s in options.snapshot_steps:
        if not 0 <= s <= n_steps:
            raise ValueError(f"snapshot step {s} outside [0, {n_steps}]")

    if two_d:
        system_x = build_cn_system(mesh_x, tau)
        system_y = build_cn_system(mesh_y, tau)
        d1x = assemble_global(mesh_x, 1)
        d1y = assemble_global(mesh_y, 1)

        def invariants(v):
            return (discrete_charge_2d(v, mesh_x.nodes, mesh_y.nodes),
                    discrete_energy_2d(v, mesh_x, mesh_y, d1x, d1y))
    else:
        system = build_cn_system(mesh, tau)
        d1 = assemble_global(mesh, 1)

        def invariants(v):
            return (discrete_charge(v, mesh.nodes),
                    discrete_energy(v, mesh, d1))

    wanted = set(options.snapshot_steps)
    snapshots = {}
    if 0 in wanted:
        snapshots[0] = values.copy()
    times, charges, energies = [], [], []
    stride = max(1, options.invariant_stride)
    if options.record_invariants:
        q, e = invariants(values)
        times.append(t0)
        charges.append(q)
        energies.append(e)

    t = t0
    for k in range(n_steps):
        dw = None
        if problem.eps != 0.0:
            dw = options.noise.increment_at(k, t, t + tau).values
        try:
            if two_d:
                values = odds_step_2d(values, t, tau, problem, mesh_x, mesh_y,
                                      system_x, system_y, options.solver, dw)
            else:
                values = odds_step_1d(values, t, tau, problem, mesh, system,
                                      options.solver, dw)
        except KrylovError as err:
            raise StepFailure(
                f"linear solve failed at step {k} (t = {t:.6g}): {err}",
                step=k, time=t, residual=err.residual) from err
        t = t0 + (k + 1) * tau
        if (k + 1) in wanted:
            snapshots[k + 1] = values.copy()
        if options.record_invariants and ((k + 1) % stride == 0
                                          or k + 1 == n_steps):
            q, e = invariants(values)
            times.append(t)
            charges.append(q)
            energies.append(e)

    return TrajectoryResult(times=np.array(times), charge=np.array(charges),
                            energy=np.array(energies), snapshots=snapshots,
                            state=StateField(values=values, t=t),
                            n_steps=n_steps)
