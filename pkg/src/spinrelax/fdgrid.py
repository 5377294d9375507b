"""
Finite-difference helpers on the interior node grid x_i = i h, h = L / (N + 1).

The 3-point Laplacian with zero boundary values is diagonalized exactly by
the orthonormal type-I discrete sine transform, which the steady-state and
preconditioning code relies on.
"""

from __future__ import annotations

import numpy as np

from .core import CellGeometry


def dst_matrix(N: int) -> np.ndarray:
    """Orthonormal DST-I matrix; symmetric and its own inverse."""
    j = np.arange(1, N + 1)
    return np.sqrt(2.0 / (N + 1)) * np.sin(np.outer(j, j) * np.pi / (N + 1))


def laplacian_eigenvalues(N: int, h: float) -> np.ndarray:
    """Eigenvalues of the 1-D 3-point Laplacian (negative)."""
    j = np.arange(1, N + 1)
    return -(4.0 / h ** 2) * np.sin(j * np.pi / (2 * (N + 1))) ** 2


def transform(a: np.ndarray, S: np.ndarray, axes=(0, 1, 2)) -> np.ndarray:
    """Apply the (self-inverse) sine transform along the given spatial axes."""
    for ax in axes:
        a = np.moveaxis(np.tensordot(S, a, axes=([1], [ax])), 0, ax)
    return a


def laplacian_3d(a: np.ndarray, h: float) -> np.ndarray:
    """3-point Laplacian on the last three axes with zero boundary values."""
    out = -6.0 * a
    for ax in (-3, -2, -1):
        n = a.shape[ax]
        lo = [slice(None)] * a.ndim
        hi = [slice(None)] * a.ndim
        lo[ax] = slice(0, n - 1)
        hi[ax] = slice(1, n)
        out[tuple(hi)] += a[tuple(lo)]
        out[tuple(lo)] += a[tuple(hi)]
    return out / h ** 2


def cell_mean(a: np.ndarray, geom: CellGeometry) -> complex:
    """Volume average of nodal values (boundary values are zero)."""
    return a.sum(axis=(-3, -2, -1)) * (geom.grid_spacing / geom.L) ** 3


def steady_state_scalar(geom: CellGeometry, diffusion: float, rate: float, source: float) -> np.ndarray:
    """Nodal solution of diffusion * lap(P) - rate * P + source = 0."""
    N, h = geom.N, geom.grid_spacing
    S = dst_matrix(N)
    lam = laplacian_eigenvalues(N, h)
    total = lam[:, None, None] + lam[None, :, None] + lam[None, None, :]
    rhs = transform(np.full((N, N, N), float(source)), S)
    return transform(rhs / (rate - diffusion * total), S)
