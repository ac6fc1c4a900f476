"""Staggered (MAC) discretization of the unit square.

Scalars live at cell centres in arrays of shape ``(nx, ny)`` indexed ``[i, j]``
with ``x = (i + 1/2) hx`` and ``y = (j + 1/2) hy``.  The first velocity
component lives on vertical faces, shape ``(nx + 1, ny)``, the second on
horizontal faces, shape ``(nx, ny + 1)``.  Boundary faces are the first and
last entries along the staggered axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORM_KINDS = ("L1", "L2", "Linf", "H1seminorm")


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("cell counts must be integers")
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid must have at least 4x4 cells, got {self.nx}x{self.ny}")

    @property
    def hx(self) -> float:
        return 1.0 / self.nx

    @property
    def hy(self) -> float:
        return 1.0 / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def xc(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.hx

    @property
    def yc(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.hy

    @property
    def xf(self) -> np.ndarray:
        return np.arange(self.nx + 1) * self.hx

    @property
    def yf(self) -> np.ndarray:
        return np.arange(self.ny + 1) * self.hy

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xc, self.yc, indexing="ij")

    def u1_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of vertical faces (first velocity component)."""
        return np.meshgrid(self.xf, self.yc, indexing="ij")

    def u2_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of horizontal faces (second velocity component)."""
        return np.meshgrid(self.xc, self.yf, indexing="ij")

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xf, self.yf, indexing="ij")

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(x, y)`` at cell centres."""
        x, y = self.centers()
        return np.asarray(func(x, y), dtype=float) * np.ones(self.shape)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)


@dataclass
class VectorField:
    """Face-staggered vector field; ``no_slip`` marks zero boundary faces."""

    u1: np.ndarray
    u2: np.ndarray
    no_slip: bool = False

    @classmethod
    def zeros(cls, grid: Grid, no_slip: bool = True) -> "VectorField":
        return cls(np.zeros((grid.nx + 1, grid.ny)), np.zeros((grid.nx, grid.ny + 1)), no_slip)

    def copy(self) -> "VectorField":
        return VectorField(self.u1.copy(), self.u2.copy(), self.no_slip)

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u1 + other.u1, self.u2 + other.u2, self.no_slip and other.no_slip)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u1 - other.u1, self.u2 - other.u2, self.no_slip and other.no_slip)

    def scale(self, alpha: float) -> "VectorField":
        return VectorField(alpha * self.u1, alpha * self.u2, self.no_slip)

    def boundary_normal_max(self) -> float:
        return max(
            np.abs(self.u1[[0, -1], :]).max(),
            np.abs(self.u2[:, [0, -1]]).max(),
        )

    def max_abs(self) -> float:
        return max(np.abs(self.u1).max(), np.abs(self.u2).max())

    def enforce_no_slip(self) -> "VectorField":
        self.u1[[0, -1], :] = 0.0
        self.u2[:, [0, -1]] = 0.0
        self.no_slip = True
        return self


def integrate(grid: Grid, f: np.ndarray) -> float:
    """Midpoint rule over the unit square."""
    return float(grid.cell_area * np.sum(f))


def mean(grid: Grid, f: np.ndarray) -> float:
    # |Omega| = 1
    return integrate(grid, f)


def grad_neumann(grid: Grid, f: np.ndarray) -> VectorField:
    """Face gradient with zero normal component on the boundary."""
    g1 = np.zeros((grid.nx + 1, grid.ny))
    g2 = np.zeros((grid.nx, grid.ny + 1))
    g1[1:-1, :] = (f[1:, :] - f[:-1, :]) / grid.hx
    g2[:, 1:-1] = (f[:, 1:] - f[:, :-1]) / grid.hy
    return VectorField(g1, g2, no_slip=True)


def divergence(grid: Grid, v: VectorField) -> np.ndarray:
    return (v.u1[1:, :] - v.u1[:-1, :]) / grid.hx + (v.u2[:, 1:] - v.u2[:, :-1]) / grid.hy


def laplacian(grid: Grid, f: np.ndarray, bc: str = "neumann") -> np.ndarray:
    """Five-point Laplacian with ghost-cell reflection.

    ``neumann`` reflects evenly (zero normal derivative); ``dirichlet0``
    reflects oddly, placing a zero value on the boundary face.
    """
    if bc == "neumann":
        sign = 1.0
    elif bc == "dirichlet0":
        sign = -1.0
    else:
        raise ValueError(f"unknown boundary condition {bc!r}")
    g = np.empty((grid.nx + 2, grid.ny + 2))
    g[1:-1, 1:-1] = f
    g[0, 1:-1] = sign * f[0, :]
    g[-1, 1:-1] = sign * f[-1, :]
    g[1:-1, 0] = sign * f[:, 0]
    g[1:-1, -1] = sign * f[:, -1]
    c = g[1:-1, 1:-1]
    return (g[2:, 1:-1] - 2 * c + g[:-2, 1:-1]) / grid.hx**2 + (
        g[1:-1, 2:] - 2 * c + g[1:-1, :-2]
    ) / grid.hy**2


def face_inner(grid: Grid, v: VectorField, w: VectorField) -> float:
    """Discrete L2 pairing of two face fields (each face carries weight hx*hy)."""
    return float(grid.cell_area * (np.sum(v.u1 * w.u1) + np.sum(v.u2 * w.u2)))


def norm(grid: Grid, f: np.ndarray, kind: str = "L2") -> float:
    if kind == "L1":
        return integrate(grid, np.abs(f))
    if kind == "L2":
        return float(np.sqrt(integrate(grid, f * f)))
    if kind == "Linf":
        return float(np.abs(f).max())
    if kind == "H1seminorm":
        g = grad_neumann(grid, f)
        return float(np.sqrt(face_inner(grid, g, g)))
    raise ValueError(f"unknown norm {kind!r}; expected one of {NORM_KINDS}")


def cell_average(grid: Grid, v: VectorField) -> tuple[np.ndarray, np.ndarray]:
    """Interpolate a face field to cell centres."""
    return 0.5 * (v.u1[1:, :] + v.u1[:-1, :]), 0.5 * (v.u2[:, 1:] + v.u2[:, :-1])


def velocity_gradient_sq(grid: Grid, u: VectorField) -> float:
    """Discrete integral of |grad u|^2 for a no-slip face field.

    Normal derivatives are taken cell-centred, tangential ones at nodes with
    odd ghost reflection across the wall, so the value equals
    ``-<u, laplacian u>`` under the same boundary treatment.
    """
    hx, hy = grid.hx, grid.hy
    u1, u2 = u.u1, u.u2
    d1x = (u1[1:, :] - u1[:-1, :]) / hx
    # tangential derivative of u1 along y at nodes, walls included
    u1i = u1[1:-1, :]
    d1y = np.empty((grid.nx - 1, grid.ny + 1))
    d1y[:, 1:-1] = (u1i[:, 1:] - u1i[:, :-1]) / hy
    d1y[:, 0] = 2.0 * u1i[:, 0] / hy
    d1y[:, -1] = -2.0 * u1i[:, -1] / hy
    d2y = (u2[:, 1:] - u2[:, :-1]) / hy
    u2i = u2[:, 1:-1]
    d2x = np.empty((grid.nx + 1, grid.ny - 1))
    d2x[1:-1, :] = (u2i[1:, :] - u2i[:-1, :]) / hx
    d2x[0, :] = 2.0 * u2i[0, :] / hx
    d2x[-1, :] = -2.0 * u2i[-1, :] / hx
    # wall nodes carry half weight in the tangential sums
    wy = np.ones(grid.ny + 1)
    wy[[0, -1]] = 0.5
    wx = np.ones(grid.nx + 1)
    wx[[0, -1]] = 0.5
    return float(
        hx * hy * (np.sum(d1x**2) + np.sum(d2y**2))
        + hx * hy * np.sum(d1y**2 * wy[None, :])
        + hx * hy * np.sum(d2x**2 * wx[:, None])
    )


def vector_laplacian(grid: Grid, u: VectorField) -> VectorField:
    """Componentwise five-point Laplacian of a no-slip face field.

    Walls normal to a component hold it at exactly zero; walls tangential to
    it are imposed by odd ghost reflection.
    """
    hx2, hy2 = grid.hx**2, grid.hy**2
    out = VectorField.zeros(grid)
    a = np.pad(u.u1, ((0, 0), (1, 1)))
    a[:, 0] = -u.u1[:, 0]
    a[:, -1] = -u.u1[:, -1]
    out.u1[1:-1, :] = (u.u1[2:, :] - 2 * u.u1[1:-1, :] + u.u1[:-2, :]) / hx2 + (
        a[1:-1, 2:] - 2 * a[1:-1, 1:-1] + a[1:-1, :-2]
    ) / hy2
    b = np.pad(u.u2, ((1, 1), (0, 0)))
    b[0, :] = -u.u2[0, :]
    b[-1, :] = -u.u2[-1, :]
    out.u2[:, 1:-1] = (u.u2[:, 2:] - 2 * u.u2[:, 1:-1] + u.u2[:, :-2]) / hy2 + (
        b[2:, 1:-1] - 2 * b[1:-1, 1:-1] + b[:-2, 1:-1]
    ) / hx2
    return out
