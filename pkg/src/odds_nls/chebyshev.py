"""Chebyshev-Gauss-Lobatto nodes and collocation differentiation matrices.

Nodes are returned in ascending order on [-1, 1]. Differentiation matrices are
spectrally exact on polynomials up to the node-count degree, which the tests
check directly instead of trusting any closed-form transcription.
"""

import numpy as np


def reference_nodes(J: int) -> np.ndarray:
    """Ascending Gauss-Lobatto nodes cos((J-j)*pi/J), j = 0..J.

    Uses the sine form sin(pi*(2j-J)/(2J)) so the grid is exactly
    antisymmetric about 0 in floating point.
    """
    if J < 1:
        raise ValueError(f"need at least degree 1, got J={J}")
    j = np.arange(J + 1)
    return np.sin(np.pi * (2 * j - J) / (2.0 * J))


def _signed_weights(J: int) -> np.ndarray:
    # endpoint weights are doubled, interior alternate in sign
    c = np.ones(J + 1)
    c[0] = 2.0
    c[J] = 2.0
    c *= (-1.0) ** np.arange(J + 1)
    return c


def diff_matrix(J: int) -> np.ndarray:
    """First-order differentiation matrix on the ascending Lobatto grid.

    Off-diagonal entries follow the standard barycentric formula; the diagonal
    is the negated row sum, which makes rows annihilate constants exactly.
    """
    x = reference_nodes(J)
    c = _signed_weights(J)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    D = np.outer(c, 1.0 / c) / dx
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def diff_matrix_higher(J: int, r: int) -> np.ndarray:
    """Differentiation matrix of order r (1 <= r <= J) via the Welfert recursion.

    Each level reuses the previous order's diagonal:
        D^(r)_ij = r/(x_i - x_j) * (c_i/c_j * D^(r-1)_ii - D^(r-1)_ij), i != j,
    and the diagonal is again the negated row sum. Entries for r > J would be
    identically zero in exact arithmetic, so that range is rejected.
    """
    if not 1 <= r <= J:
        raise ValueError(f"derivative order r={r} outside 1..J={J}")
    x = reference_nodes(J)
    c = _signed_weights(J)
    inv_dx = x[:, None] - x[None, :]
    np.fill_diagonal(inv_dx, 1.0)
    inv_dx = 1.0 / inv_dx
    np.fill_diagonal(inv_dx, 0.0)
    ratio = np.outer(c, 1.0 / c)

    D = diff_matrix(J)
    for order in range(2, r + 1):
        diag = np.diag(D)
        D = order * inv_dx * (ratio * diag[:, None] - D)
        np.fill_diagonal(D, 0.0)
        np.fill_diagonal(D, -D.sum(axis=1))
    return D
