"""Uniform-grid reference schemes used for efficiency comparisons.

Two implicit schemes on equispaced grids with zero Dirichlet data:

* SMM: midpoint box scheme with half-node (1D) / quarter-node (2D)
  averaging of the cubic and noise terms; conserves the discrete charge.
* FDSCN: splitting scheme; an implicit nonlinear Crank-Nicolson stage for
  the deterministic part followed by an exact pointwise noise phase.

Both resolve their implicit stage by fixed-point iteration, with the
(constant) linear part solved by the same restarted Krylov routine the
collocation stepper uses, warm-started at the previous iterate.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linalg import SolverOptions, krylov_solve, stack_real, unstack_real

FP_TOL = 1e-12
FP_MAXITER = 50


@dataclass(frozen=True)
class UniformGrid1D:
    x_left: float
    x_right: float
    nodes: np.ndarray
    h: float


def uniform_grid_1d(x_left: float, x_right: float, n_points: int) -> UniformGrid1D:
    if n_points < 3:
        raise ValueError("need at least three points")
    if x_right <= x_left:
        raise ValueError("empty domain")
    nodes = np.linspace(x_left, x_right, n_points)
    return UniformGrid1D(x_left, x_right, nodes, nodes[1] - nodes[0])


def laplacian_1d(n_interior: int, h: float) -> sp.csr_matrix:
    """Second-difference matrix on the interior of a zero-Dirichlet grid."""
    main = np.full(n_interior, -2.0)
    off = np.ones(n_interior - 1)
    return sp.diags([off, main, off], (-1, 0, 1), format="csr") / h ** 2


def averaging_1d(n_interior: int) -> sp.csr_matrix:
    """Half-node box average pushed back to nodes: tridiag(1, 2, 1)/2."""
    main = np.full(n_interior, 1.0)
    off = np.full(n_interior - 1, 0.5)
    return sp.diags([off, main, off], (-1, 0, 1), format="csr")


def implicit_pair(S: sp.spmatrix, A: sp.spmatrix) -> sp.csr_matrix:
    """Real block form of (S + iA)v = r for stacked unknowns [Im v; Re v].

    The matching right-hand side is stack_real(r).
    """
    return sp.bmat([[S, A], [-A, S]], format="csr")


def _fixed_point(apply_rhs, G, v0, opts, label: str) -> np.ndarray:
    """Iterate v <- G^{-1} rhs(v) until the max-norm update stalls below tol."""
    v = v0
    x0 = stack_real(v)
    for _ in range(FP_MAXITER):
        sol = krylov_solve(G, stack_real(apply_rhs(v)), x0=x0, opts=opts)
        v_new = unstack_real(sol)
        delta = np.max(np.abs(v_new - v))
        v, x0 = v_new, sol
        if delta <= FP_TOL * max(1.0, float(np.max(np.abs(v_new)))):
            return v
    raise RuntimeError(f"{label} fixed point did not converge in "
                       f"{FP_MAXITER} iterations (last update {delta:.3e})")


def _half_cubic(u: np.ndarray) -> np.ndarray:
    """Sum of |.|^2 (.) over the two adjacent half nodes, interior output."""
    half = 0.5 * (u[1:] + u[:-1])
    cub = np.abs(half) ** 2 * half
    return cub[:-1] + cub[1:]


def _half_pair(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Sum of (u w) over the two adjacent half nodes, interior output."""
    half_u = 0.5 * (u[1:] + u[:-1])
    half_w = 0.5 * (w[1:] + w[:-1])
    prod = half_u * half_w
    return prod[:-1] + prod[1:]


class SMM1D:
    """Multi-symplectic box scheme, zero Dirichlet data.

    Midpoint form solved per step: (S + i tau L) v = S u^n - (i tau / 2) g(v)
    with v the time midpoint, L the second-difference operator, S the
    half-node averaging weight, and g the cubic and noise terms evaluated at
    half nodes. The new state is 2v - u^n.
    """

    def __init__(self, grid: UniformGrid1D, tau: float, lam: float, eps: float,
                 opts: SolverOptions | None = None):
        self.grid = grid
        self.tau = tau
        self.lam = lam
        self.eps = eps
        self.opts = opts or SolverOptions()
        n_int = grid.nodes.size - 2
        self.S = averaging_1d(n_int)
        self.L = laplacian_1d(n_int, grid.h)
        self.G = implicit_pair(self.S, tau * self.L)

    def step(self, u: np.ndarray, dw: np.ndarray | None = None) -> np.ndarray:
        un = u[1:-1]
        su = self.S @ un
        if self.eps != 0.0:
            wdot = dw / self.tau
        full = u.copy()

        def rhs(v):
            vfull = np.zeros_like(u)
            vfull[1:-1] = v
            g = self.lam * _half_cubic(vfull)
            if self.eps != 0.0:
                g = g + self.eps * _half_pair(vfull, wdot)
            return su - 0.5j * self.tau * g

        v = _fixed_point(rhs, self.G, un.copy(), self.opts, "SMM")
        full[1:-1] = 2.0 * v - un
        full[0] = full[-1] = 0.0
        return full


class FDSCN1D:
    """Splitting Crank-Nicolson on a uniform grid, zero Dirichlet data.

    Stage one solves the implicit midpoint system
    (I + i tau/2 L) m = u^n - i tau lam/4 (|u^n|^2 + |u*|^2) m, u* = 2m - u^n;
    stage two applies the exact noise phase exp(-i eps dW).
    """

    def __init__(self, grid: UniformGrid1D, tau: float, lam: float, eps: float,
                 opts: SolverOptions | None = None):
        self.grid = grid
        self.tau = tau
        self.lam = lam
        self.eps = eps
        self.opts = opts or SolverOptions()
        n_int = grid.nodes.size - 2
        self.L = laplacian_1d(n_int, grid.h)
        self.G = implicit_pair(sp.identity(n_int, format="csr"),
                               (tau / 2.0) * self.L)

    def _nonlinear_stage(self, un: np.ndarray) -> np.ndarray:
        sq_n = np.abs(un) ** 2

        def rhs(m):
            star = 2.0 * m - un
            factor = self.lam / 4.0 * (sq_n + np.abs(star) ** 2)
            return un - 1j * self.tau * factor * m

        m = _fixed_point(rhs, self.G, un.copy(), self.opts, "FDSCN")
        return 2.0 * m - un

    def step(self, u: np.ndarray, dw: np.ndarray | None = None) -> np.ndarray:
        full = u.copy()
        star = self._nonlinear_stage(u[1:-1])
        if self.eps != 0.0:
            star = star * np.exp(-1j * self.eps * dw[1:-1])
        full[1:-1] = star
        full[0] = full[-1] = 0.0
        return full


def _quarter_cubic(u: np.ndarray) -> np.ndarray:
    q = 0.25 * (u[1:, 1:] + u[1:, :-1] + u[:-1, 1:] + u[:-1, :-1])
    cub = np.abs(q) ** 2 * q
    return cub[1:, 1:] + cub[1:, :-1] + cub[:-1, 1:] + cub[:-1, :-1]


def _quarter_pair(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    qu = 0.25 * (u[1:, 1:] + u[1:, :-1] + u[:-1, 1:] + u[:-1, :-1])
    qw = 0.25 * (w[1:, 1:] + w[1:, :-1] + w[:-1, 1:] + w[:-1, :-1])
    prod = qu * qw
    return prod[1:, 1:] + prod[1:, :-1] + prod[:-1, 1:] + prod[:-1, :-1]


class SMM2D:
    """Tensor box generalisation of the 1D scheme on a uniform rectangle.

    LHS averaging is Sx (x) Sy; the Laplacian enters as
    Lxx (x) Sy + Sx (x) Lyy; cubic and noise terms are summed over the four
    adjacent quarter-node values. Interior unknowns are flattened C-order.
    """

    def __init__(self, grid_x: UniformGrid1D, grid_y: UniformGrid1D,
                 tau: float, lam: float, eps: float,
                 opts: SolverOptions | None = None):
        self.grid_x = grid_x
        self.grid_y = grid_y
        self.tau = tau
        self.lam = lam
        self.eps = eps
        self.opts = opts or SolverOptions()
        nx = grid_x.nodes.size - 2
        ny = grid_y.nodes.size - 2
        self.shape = (nx, ny)
        Sx, Sy = averaging_1d(nx), averaging_1d(ny)
        Lx, Ly = laplacian_1d(nx, grid_x.h), laplacian_1d(ny, grid_y.h)
        self.S2 = sp.kron(Sx, Sy, format="csr")
        L2 = sp.kron(Lx, Sy) + sp.kron(Sx, Ly)
        self.G = implicit_pair(self.S2, tau * L2.tocsr())

    def step(self, u: np.ndarray, dw: np.ndarray | None = None) -> np.ndarray:
        un = u[1:-1, 1:-1]
        su = self.S2 @ un.reshape(-1)
        if self.eps != 0.0:
            wdot = dw / self.tau

        def rhs(v):
            vfull = np.zeros_like(u)
            vfull[1:-1, 1:-1] = v.reshape(self.shape)
            g = self.lam * _quarter_cubic(vfull)
            if self.eps != 0.0:
                g = g + self.eps * _quarter_pair(vfull, wdot)
            return su - 0.5j * self.tau * g.reshape(-1)

        v = _fixed_point(rhs, self.G, un.reshape(-1).copy(), self.opts, "SMM")
        full = np.zeros_like(u)
        full[1:-1, 1:-1] = (2.0 * v - un.reshape(-1)).reshape(self.shape)
        return full


class FDSCN2D:
    """Splitting Crank-Nicolson with the five-point Laplacian, zero data."""

    def __init__(self, grid_x: UniformGrid1D, grid_y: UniformGrid1D,
                 tau: float, lam: float, eps: float,
                 opts: SolverOptions | None = None):
        self.grid_x = grid_x
        self.grid_y = grid_y
        self.tau = tau
        self.lam = lam
        self.eps = eps
        self.opts = opts or SolverOptions()
        nx = grid_x.nodes.size - 2
        ny = grid_y.nodes.size - 2
        self.shape = (nx, ny)
        L2 = (sp.kron(laplacian_1d(nx, grid_x.h), sp.identity(ny))
              + sp.kron(sp.identity(nx), laplacian_1d(ny, grid_y.h)))
        self.G = implicit_pair(sp.identity(nx * ny, format="csr"),
                               (tau / 2.0) * L2.tocsr())

    def step(self, u: np.ndarray, dw: np.ndarray | None = None) -> np.ndarray:
        un = u[1:-1, 1:-1].reshape(-1)
        sq_n = np.abs(un) ** 2

        def rhs(m):
            star = 2.0 * m - un
            factor = self.lam / 4.0 * (sq_n + np.abs(star) ** 2)
            return un - 1j * self.tau * factor * m

        m = _fixed_point(rhs, self.G, un.copy(), self.opts, "FDSCN")
        star = 2.0 * m - un
        full = np.zeros_like(u)
        full[1:-1, 1:-1] = star.reshape(self.shape)
        if self.eps != 0.0:
            full[1:-1, 1:-1] *= np.exp(-1j * self.eps * dw[1:-1, 1:-1])
        return full


def run_uniform_trajectory(method, u0: np.ndarray, n_steps: int,
                           noise=None, t0: float = 0.0):
    """Drive one of the uniform-grid schemes; returns the final values.

    The noise source is consulted only when the scheme's eps is nonzero.
    """
    values = np.array(u0, dtype=complex)
    tau = method.tau
    t = t0
    for k in range(n_steps):
        dw = None
        if method.eps != 0.0:
            if noise is None:
                raise ValueError("eps != 0 requires a noise source")
            dw = noise.increment_at(k, t, t + tau).values
        values = method.step(values, dw)
        t = t0 + (k + 1) * tau
    return values
