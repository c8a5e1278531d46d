"""Overlapping Chebyshev element meshes and global differentiation operators.

A 1D mesh covers [x_left, x_right] with M equal-width elements whose
Lobatto grids overlap: the last two nodes of element m are the first two
nodes of element m+1. Each global node is computed exactly once, so shared
nodes are bitwise identical between neighbouring elements.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .chebyshev import diff_matrix, diff_matrix_higher, reference_nodes


def element_width(x_left: float, x_right: float, M: int, J: int) -> float:
    """Closed-form element width for the two-node overlap constraint."""
    span = x_right - x_left
    return span / (M + (1 - M) * (1 - np.cos(np.pi / J)) / 2.0)


@dataclass(frozen=True)
class OverlapMesh1D:
    x_left: float
    x_right: float
    n_elements: int
    degree: int
    dx: float
    shift: float
    nodes: np.ndarray          # global grid, all shared nodes stored once
    ref_nodes: np.ndarray      # Lobatto nodes on [-1, 1]
    element_bounds: np.ndarray  # (M, 2) physical end points per element

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def n_interior(self) -> int:
        return self.nodes.size - 2

    def element_slice(self, m: int) -> slice:
        """Global index range of element m's J+1 nodes."""
        if not 0 <= m < self.n_elements:
            raise ValueError(f"element {m} outside 0..{self.n_elements - 1}")
        start = m * (self.degree - 1)
        return slice(start, start + self.degree + 1)

    def element_nodes(self, m: int) -> np.ndarray:
        return self.nodes[self.element_slice(m)]


def build_mesh(x_left: float, x_right: float, M: int, J: int) -> OverlapMesh1D:
    """Construct the overlapping mesh with M elements of degree J.

    The global grid has M*(J-1) + 2 strictly increasing nodes: each of the
    M-1 element interfaces shares two nodes, counted once.
    """
    if x_right <= x_left:
        raise ValueError(f"empty domain [{x_left}, {x_right}]")
    if M < 1:
        raise ValueError(f"need at least one element, got M={M}")
    if J < 2:
        raise ValueError(f"need element degree >= 2, got J={J}")

    ref = reference_nodes(J)
    dx = element_width(x_left, x_right, M, J)
    # distance between consecutive element left edges; equals the position of
    # local node J-1 relative to the element start
    shift = dx * (1.0 + np.cos(np.pi / J)) / 2.0
    lefts = x_left + shift * np.arange(M)

    n_global = M * (J - 1) + 2
    g = np.arange(n_global)
    owner = np.minimum(g // (J - 1), M - 1)
    local = g - owner * (J - 1)
    nodes = lefts[owner] + dx * (ref[local] + 1.0) / 2.0
    nodes[0] = x_left
    nodes[-1] = x_right  # exact in real arithmetic, snap away the round-off
    if np.any(np.diff(nodes) <= 0):
        raise ValueError(f"degenerate mesh for M={M}, J={J}")

    starts = (np.arange(M) * (J - 1))
    bounds = np.column_stack([nodes[starts], nodes[starts + J]])
    return OverlapMesh1D(x_left, x_right, M, J, float(dx), float(shift),
                         nodes, ref, bounds)


def affine_to_reference(mesh: OverlapMesh1D, m: int, y) -> np.ndarray:
    """Map physical coordinates inside element m onto [-1, 1]."""
    lo, hi = mesh.element_bounds[m]
    y = np.asarray(y, dtype=float)
    tol = 1e-12 * (hi - lo)
    if np.any(y < lo - tol) or np.any(y > hi + tol):
        raise ValueError(f"point outside element {m}: [{lo}, {hi}]")
    return (2.0 * y - (hi + lo)) / (hi - lo)


def reference_to_physical(mesh: OverlapMesh1D, m: int, eta) -> np.ndarray:
    lo, hi = mesh.element_bounds[m]
    eta = np.asarray(eta, dtype=float)
    return lo + (hi - lo) * (eta + 1.0) / 2.0


def assemble_global(mesh: OverlapMesh1D, order: int = 2) -> sp.csr_matrix:
    """Assemble the global differentiation matrix of the given order.

    Every global node's derivative row comes from exactly one element:
    the first element supplies local rows 0..J-1, interior elements rows
    1..J-1, the last element rows 1..J. Elementwise blocks are the reference
    matrix scaled by (2/width)^order.
    """
    J, M = mesh.degree, mesh.n_elements
    D_ref = diff_matrix(J) if order == 1 else diff_matrix_higher(J, order)
    n = mesh.n_nodes
    out = sp.lil_matrix((n, n))
    for m in range(M):
        lo, hi = mesh.element_bounds[m]
        block = D_ref * (2.0 / (hi - lo)) ** order
        cols = mesh.element_slice(m)
        if M == 1:
            rows_local = slice(0, J + 1)
        elif m == 0:
            rows_local = slice(0, J)
        elif m == M - 1:
            rows_local = slice(1, J + 1)
        else:
            rows_local = slice(1, J)
        row0 = m * (J - 1) + rows_local.start
        out[row0:row0 + (rows_local.stop - rows_local.start), cols] = \
            block[rows_local, :]
    return out.tocsr()


def split_interior_boundary(matrix: sp.spmatrix) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Split a global operator into its interior block and boundary columns.

    Returns (B, B_bdy) where B acts on interior values and B_bdy is the
    (n-2, 2) matrix of couplings to the two boundary nodes.
    """
    A = matrix.tocsr()
    n = A.shape[0]
    if n < 3:
        raise ValueError("need at least one interior node")
    interior = A[1:-1, 1:-1]
    bdy = sp.hstack([A[1:-1, 0], A[1:-1, n - 1]]).tocsr()
    return interior.tocsr(), bdy


def dump_nodes_csv(mesh: OverlapMesh1D, path: str) -> None:
    """Write the global grid as a two-column CSV for plotting or debugging."""
    with open(path, "w") as fh:
        fh.write("index,x\n")
        for i, x in enumerate(mesh.nodes):
            fh.write(f"{i},{x!r}\n")
