"""Fast solvers for the constant-coefficient systems on the MAC grid.

The five-point operators with even (Neumann) or odd (wall) reflection are
diagonalized by discrete cosine/sine transforms, which gives exact solves in
O(N log N).  The pressure equation is still run through preconditioned CG so
that its residual is measured and reported, not assumed.
"""

from __future__ import annotations

import numpy as np
from scipy import fft

from .domain import Grid, VectorField, laplacian


class PoissonNotConverged(RuntimeError):
    pass


def _eig_cos(n: int, h: float) -> np.ndarray:
    k = np.arange(n)
    return (2.0 * np.cos(np.pi * k / n) - 2.0) / h**2


def _eig_sin(n: int, h: float, count: int) -> np.ndarray:
    k = np.arange(1, count + 1)
    return (2.0 * np.cos(np.pi * k / n) - 2.0) / h**2


def _forward(a, kinds):
    for axis, kind in enumerate(kinds):
        if kind == "c2":
            a = fft.dct(a, type=2, axis=axis, norm="ortho")
        elif kind == "s2":
            a = fft.dst(a, type=2, axis=axis, norm="ortho")
        else:
            a = fft.dst(a, type=1, axis=axis, norm="ortho")
    return a


def _inverse(a, kinds):
    for axis, kind in enumerate(kinds):
        if kind == "c2":
            a = fft.idct(a, type=2, axis=axis, norm="ortho")
        elif kind == "s2":
            a = fft.idst(a, type=2, axis=axis, norm="ortho")
        else:
            a = fft.idst(a, type=1, axis=axis, norm="ortho")
    return a


def neumann_symbol(grid: Grid) -> np.ndarray:
    """Eigenvalues of the Neumann five-point Laplacian in DCT-II ordering."""
    return _eig_cos(grid.nx, grid.hx)[:, None] + _eig_cos(grid.ny, grid.hy)[None, :]


def solve_neumann_helmholtz(grid: Grid, rhs: np.ndarray, alpha: float) -> np.ndarray:
    """Solve (I - alpha * Laplacian_N) x = rhs."""
    if alpha == 0.0:
        return rhs.copy()
    sym = 1.0 - alpha * neumann_symbol(grid)
    return _inverse(_forward(rhs, ("c2", "c2")) / sym, ("c2", "c2"))


def solve_velocity_helmholtz(grid: Grid, rhs: VectorField, alpha: float) -> VectorField:
    """Solve (I - alpha * vector Laplacian) u = rhs on interior faces; walls stay 0."""
    out = VectorField.zeros(grid)
    if alpha == 0.0:
        out.u1[1:-1, :] = rhs.u1[1:-1, :]
        out.u2[:, 1:-1] = rhs.u2[:, 1:-1]
        return out
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    sym1 = _eig_sin(nx, hx, nx - 1)[:, None] + _eig_sin(ny, hy, ny)[None, :]
    k1 = ("s1", "s2")
    out.u1[1:-1, :] = _inverse(_forward(rhs.u1[1:-1, :], k1) / (1.0 - alpha * sym1), k1)
    sym2 = _eig_sin(nx, hx, nx)[:, None] + _eig_sin(ny, hy, ny - 1)[None, :]
    k2 = ("s2", "s1")
    out.u2[:, 1:-1] = _inverse(_forward(rhs.u2[:, 1:-1], k2) / (1.0 - alpha * sym2), k2)
    return out


def _neumann_pseudo_inverse(grid: Grid, r: np.ndarray) -> np.ndarray:
    """Apply the inverse of -Laplacian_N on the mean-zero subspace."""
    sym = -neumann_symbol(grid)
    sym[0, 0] = 1.0
    z = _forward(r, ("c2", "c2")) / sym
    z[0, 0] = 0.0
    return _inverse(z, ("c2", "c2"))


def solve_pressure(grid: Grid, rhs: np.ndarray, tol: float = 1e-11, max_iter: int = 50):
    """Solve Laplacian_N p = rhs for mean-zero p by preconditioned CG.

    Returns ``(p, relative_residual, iterations)``.  The right-hand side is
    projected to mean zero first (the compatibility condition).
    """
    b = -(rhs - rhs.mean())
    bnorm = np.sqrt(np.sum(b * b))
    p = np.zeros_like(b)
    if bnorm == 0.0:
        return p, 0.0, 0
    r = b.copy()
    z = _neumann_pseudo_inverse(grid, r)
    d = z.copy()
    rz = np.sum(r * z)
    rel = 1.0
    for it in range(1, max_iter + 1):
        q = -laplacian(grid, d, "neumann")
        alpha = rz / np.sum(d * q)
        p += alpha * d
        p -= p.mean()
        r = b + laplacian(grid, p, "neumann")
        rel = np.sqrt(np.sum(r * r)) / bnorm
        if rel <= tol:
            return p, float(rel), it
        z = _neumann_pseudo_inverse(grid, r)
        rz_new = np.sum(r * z)
        d = z + (rz_new / rz) * d
        rz = rz_new
    raise PoissonNotConverged(
        f"pressure solve residual {rel:.3e} above tolerance {tol:.1e} after {max_iter} iterations"
    )
