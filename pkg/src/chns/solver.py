"""Time integration of the regularized chemotaxis-Navier-Stokes system.

One step is a Lie splitting: projection-method fluid step, then the
attractant, then the cell density.  Each sub-step keeps its own structural
property exactly: discrete incompressibility, the max principle for ``c`` and
mass conservation plus nonnegativity for ``n``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .domain import Grid, VectorField, divergence, grad_neumann, integrate, laplacian, vector_laplacian
from .linsolve import solve_neumann_helmholtz, solve_pressure, solve_velocity_helmholtz
from .model import CutoffFamily, Model

log = logging.getLogger(__name__)


class TimestepTooLarge(RuntimeError):
    """Raised when a sub-step cannot keep its positivity or max principle."""


@dataclass
class StepControl:
    dt: float = 2e-3
    cfl: float = 0.25
    theta: float = 0.5
    poisson_tol: float = 1e-11
    poisson_max_iter: int = 50

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.cfl <= 0.5:
            raise ValueError("cfl must lie in (0, 0.5]")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if not 0 < self.poisson_tol <= 1e-10:
            raise ValueError("poisson_tol must lie in (0, 1e-10]")


@dataclass
class State:
    t: float
    n: np.ndarray
    c: np.ndarray
    u: VectorField
    P: np.ndarray

    def copy(self) -> "State":
        return State(self.t, self.n.copy(), self.c.copy(), self.u.copy(), self.P.copy())


# -- initial data ---------------------------------------------------------

INITIAL_KINDS = ("default", "uniform", "heat", "vortex")


def _stream_bump(x, y):
    return (np.sin(np.pi * x) * np.sin(np.pi * y)) ** 2


def curl_velocity(grid: Grid, stream, scale: float = 1.0) -> VectorField:
    """Discretely divergence-free face field (d_y s, -d_x s) from nodal stream values."""
    X, Y = grid.nodes()
    s = scale * np.asarray(stream(X, Y), dtype=float)
    u1 = (s[:, 1:] - s[:, :-1]) / grid.hy
    u2 = -(s[1:, :] - s[:-1, :]) / grid.hx
    return VectorField(u1, u2, no_slip=True)


@dataclass(frozen=True)
class InitialData:
    """Closed-form initial data.

    ``default``: n0 = 1 + 0.5 cos(pi x) cos(pi y), c0 = (1 + y)/4, u0 = 0.
    ``uniform``: n0 = n_bar, c0 = c_bar, u0 = 0.
    ``heat``: n0 as default, c0 = 1 + cos(pi x), u0 = 0.
    ``vortex``: default n0, c0 with u0 the curl of amp * sin^2(pi x) sin^2(pi y).
    """

    kind: str = "default"
    n_bar: float = 1.0
    c_bar: float = 0.0
    amp: float = 0.05

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            raise ValueError(f"unknown initial data {self.kind!r}")

    def n0(self, x, y):
        if self.kind == "uniform":
            return self.n_bar + 0.0 * x
        return 1.0 + 0.5 * np.cos(np.pi * x) * np.cos(np.pi * y)

    def c0(self, x, y):
        if self.kind == "uniform":
            return self.c_bar + 0.0 * x
        if self.kind == "heat":
            return 1.0 + np.cos(np.pi * x) + 0.0 * y
        return np.clip(0.5 * (1.0 + y) / 2.0, 0.0, 1.0) + 0.0 * x

    def state(self, grid: Grid) -> State:
        n = grid.sample(self.n0)
        c = grid.sample(self.c0)
        if self.kind == "vortex":
            u = curl_velocity(grid, _stream_bump, self.amp)
        else:
            u = VectorField.zeros(grid)
        if integrate(grid, n) <= 0 or n.min() < 0 or c.min() < 0:
            raise ValueError("initial data must have n >= 0, c >= 0 and positive mass")
        return State(0.0, n, c, u, grid.zeros())


# -- face reconstructions -------------------------------------------------


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _slopes(f: np.ndarray, axis: int) -> np.ndarray:
    d = np.diff(f, axis=axis)
    s = np.zeros_like(f)
    sl = [slice(None)] * 2
    lo = [slice(None)] * 2
    hi = [slice(None)] * 2
    sl[axis] = slice(1, -1)
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    s[tuple(sl)] = _minmod(d[tuple(lo)], d[tuple(hi)])
    return s


def limited_flux(grid: Grid, q: np.ndarray, v: VectorField, limit: bool = True) -> VectorField:
    """Upwind face flux v*q with minmod-limited (MUSCL) or donor-cell states.

    Boundary faces carry zero flux.
    """
    F = VectorField.zeros(grid)
    if limit:
        sx, sy = _slopes(q, 0), _slopes(q, 1)
    else:
        sx = sy = np.zeros_like(q)
    left = q[:-1, :] + 0.5 * sx[:-1, :]
    right = q[1:, :] - 0.5 * sx[1:, :]
    a = v.u1[1:-1, :]
    F.u1[1:-1, :] = np.maximum(a, 0.0) * left + np.minimum(a, 0.0) * right
    low = q[:, :-1] + 0.5 * sy[:, :-1]
    high = q[:, 1:] - 0.5 * sy[:, 1:]
    b = v.u2[:, 1:-1]
    F.u2[:, 1:-1] = np.maximum(b, 0.0) * low + np.minimum(b, 0.0) * high
    return F


def face_average(grid: Grid, q: np.ndarray) -> VectorField:
    """Arithmetic mean of neighbouring cells on interior faces, wall faces 0."""
    out = VectorField.zeros(grid)
    out.u1[1:-1, :] = 0.5 * (q[1:, :] + q[:-1, :])
    out.u2[:, 1:-1] = 0.5 * (q[:, 1:] + q[:, :-1])
    return out


def chemotactic_velocity(grid: Grid, model: Model, eps: float, n: np.ndarray, c: np.ndarray) -> VectorField:
    """Face values of S_eps(x, n, c) grad c.

    The normal derivative of ``c`` is the compact face difference; the
    tangential one averages the cell-centred derivatives of both neighbours.
    """
    w = VectorField.zeros(grid)
    sens = model.sensitivity
    if sens.is_zero():
        return w
    cut = CutoffFamily(eps)
    g = grad_neumann(grid, c)
    # cell-centred derivatives from face gradients
    gx_c = 0.5 * (g.u1[1:, :] + g.u1[:-1, :])
    gy_c = 0.5 * (g.u2[:, 1:] + g.u2[:, :-1])
    nf = face_average(grid, n)
    cf = face_average(grid, c)

    X, Y = grid.u1_points()
    sl = (slice(1, -1), slice(None))
    x, y, nn, cc = X[sl], Y[sl], nf.u1[sl], cf.u1[sl]
    fac = cut.rho(x, y) * cut.chi(nn)
    a, b = sens.a(x, y, nn, cc), sens.b(x, y, nn, cc)
    cx = g.u1[sl]
    cy = 0.5 * (gy_c[1:, :] + gy_c[:-1, :])
    w.u1[sl] = fac * (a * cx - b * cy)

    X, Y = grid.u2_points()
    sl = (slice(None), slice(1, -1))
    x, y, nn, cc = X[sl], Y[sl], nf.u2[sl], cf.u2[sl]
    fac = cut.rho(x, y) * cut.chi(nn)
    a, b = sens.a(x, y, nn, cc), sens.b(x, y, nn, cc)
    cy = g.u2[sl]
    cx = 0.5 * (gx_c[:, 1:] + gx_c[:, :-1])
    w.u2[sl] = fac * (b * cx + a * cy)
    return w


# -- sub-steps ------------------------------------------------------------


def cfl_dt(grid: Grid, model: Model, state: State, eps: float, ctl: StepControl) -> float:
    h = min(grid.hx, grid.hy)
    limits = []
    umax = state.u.max_abs()
    if umax > 0:
        limits.append(h / umax)
    # the theta scheme is unconditionally stable for theta >= 1/2
    d_eff = max(1.0 - 2.0 * ctl.theta, 0.0)
    if d_eff > 0:
        limits.append(h * h / (4.0 * d_eff))
    wmax = chemotactic_velocity(grid, model, eps, state.n, state.c).max_abs()
    if wmax > 0:
        limits.append(h / wmax)
    if not limits:
        return ctl.dt
    return min(ctl.cfl * min(limits), ctl.dt)


def transport_n(
    grid: Grid,
    model: Model,
    n: np.ndarray,
    c: np.ndarray,
    u: VectorField,
    eps: float,
    dt: float,
    theta: float = 0.5,
) -> np.ndarray:
    """Conservative update of the cell density.

    Flux F = -grad n + n (S_eps grad c) + u n; the transport part is explicit
    and limited, diffusion is theta-implicit.  All wall fluxes vanish.
    """
    v = u + chemotactic_velocity(grid, model, eps, n, c)
    F = limited_flux(grid, n, v, limit=True)
    star = n - dt * divergence(grid, F)
    if theta < 1.0:
        star = star + (1.0 - theta) * dt * laplacian(grid, n, "neumann")
    scale = max(float(np.abs(n).max()), 1e-300)
    if star.min() < -1e-13 * scale:
        raise TimestepTooLarge(f"density undershoot {star.min():.3e} at dt={dt:.3e}")
    out = solve_neumann_helmholtz(grid, star, theta * dt)
    if out.min() < -1e-13 * scale:
        raise TimestepTooLarge(f"density undershoot {out.min():.3e} after diffusion at dt={dt:.3e}")
    return out


def transport_c(
    grid: Grid,
    model: Model,
    c: np.ndarray,
    n: np.ndarray,
    u: VectorField,
    dt: float,
    theta: float = 0.5,
) -> np.ndarray:
    """Donor-cell advection, theta-implicit diffusion, semi-implicit consumption.

    Each factor is a nonnegative averaging (or shrinking) map, so every L^p
    norm of ``c`` is nonincreasing and ``c`` stays in [0, max c].
    """
    cmax = float(c.max()) if c.size else 0.0
    if cmax == 0.0 and c.min() == 0.0:
        return np.zeros_like(c)
    F = limited_flux(grid, c, u, limit=False)
    star = c - dt * divergence(grid, F)
    if theta < 1.0:
        star = star + (1.0 - theta) * dt * laplacian(grid, c, "neumann")
    tol = 1e-12 * cmax
    if star.min() < -tol or star.max() > cmax + tol:
        raise TimestepTooLarge(f"attractant max principle violated at dt={dt:.3e}")
    diffused = solve_neumann_helmholtz(grid, star, theta * dt)
    diffused = np.clip(diffused, 0.0, cmax)
    return diffused / (1.0 + dt * n * model.consumption.rate(diffused))


def convection(grid: Grid, u: VectorField) -> VectorField:
    """Divergence-form (u . grad) u on interior faces, central averaging."""
    out = VectorField.zeros(grid)
    hx, hy = grid.hx, grid.hy
    u1, u2 = u.u1, u.u2
    # u1 momentum
    uc = 0.5 * (u1[1:, :] + u1[:-1, :])
    out.u1[1:-1, :] = (uc[1:, :] ** 2 - uc[:-1, :] ** 2) / hx
    u1y = np.zeros((grid.nx + 1, grid.ny + 1))
    u1y[:, 1:-1] = 0.5 * (u1[:, 1:] + u1[:, :-1])
    u2x = np.zeros((grid.nx + 1, grid.ny + 1))
    u2x[1:-1, :] = 0.5 * (u2[1:, :] + u2[:-1, :])
    corner = u1y * u2x
    out.u1[1:-1, :] += (corner[1:-1, 1:] - corner[1:-1, :-1]) / hy
    # u2 momentum
    vc = 0.5 * (u2[:, 1:] + u2[:, :-1])
    out.u2[:, 1:-1] = (vc[:, 1:] ** 2 - vc[:, :-1] ** 2) / hy
    out.u2[:, 1:-1] += (corner[1:, 1:-1] - corner[:-1, 1:-1]) / hx
    return out


def buoyancy(grid: Grid, model: Model, n: np.ndarray) -> VectorField:
    gphi = model.potential.face_gradient(grid)
    nf = face_average(grid, n)
    return VectorField(nf.u1 * gphi.u1, nf.u2 * gphi.u2, no_slip=True)


def project(grid: Grid, ustar: VectorField, dt: float, ctl: StepControl):
    """Remove the gradient part of ``ustar``; returns (u, P)."""
    rhs = divergence(grid, ustar) / dt
    P, _, _ = solve_pressure(grid, rhs, ctl.poisson_tol, ctl.poisson_max_iter)
    gP = grad_neumann(grid, P)
    u = VectorField(ustar.u1 - dt * gP.u1, ustar.u2 - dt * gP.u2, no_slip=True)
    u.enforce_no_slip()
    return u, P


def ns_step(grid: Grid, model: Model, u: VectorField, n: np.ndarray, dt: float, ctl: StepControl):
    """Projection step: theta-implicit viscous predictor, Neumann pressure solve, correction."""
    rhs = u - convection(grid, u).scale(dt)
    if ctl.theta < 1.0:
        rhs = rhs + vector_laplacian(grid, u).scale((1.0 - ctl.theta) * dt)
    rhs.enforce_no_slip()
    # forcing enters after the viscous solve so that gradient forcing stays an
    # exact discrete gradient and is removed by the projection
    ustar = solve_velocity_helmholtz(grid, rhs, ctl.theta * dt) + buoyancy(grid, model, n).scale(dt)
    ustar.enforce_no_slip()
    return project(grid, ustar, dt, ctl)


def advance(grid: Grid, model: Model, state: State, eps: float, ctl: StepControl, dt: float | None = None) -> State:
    """One Lie splitting step: fluid, then attractant, then density."""
    if dt is None:
        dt = cfl_dt(grid, model, state, eps, ctl)
    u, P = ns_step(grid, model, state.u, state.n, dt, ctl)
    c = transport_c(grid, model, state.c, state.n, u, dt, ctl.theta)
    n = transport_n(grid, model, state.n, c, u, eps, dt, ctl.theta)
    return State(state.t + dt, n, c, u, P)


def step_with_retry(grid, model, state, eps, ctl, dt, max_halvings: int = 8):
    """Advance by ``dt`` using substeps halved until positivity holds."""
    for k in range(max_halvings + 1):
        m = 2**k
        try:
            s = state
            for _ in range(m):
                s = advance(grid, model, s, eps, ctl, dt / m)
            if k:
                log.debug("step at t=%.6g needed %d substeps", state.t, m)
            s.t = state.t + dt
            return s
        except TimestepTooLarge:
            if k == max_halvings:
                raise
    raise AssertionError("unreachable")


# -- driver ---------------------------------------------------------------


@dataclass
class Trajectory:
    grid: Grid
    model: Model
    eps: float
    snapshots: list = field(default_factory=list)
    series: object = None
    truncated: bool = False
    error: str = ""

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])


def run(config, keep_every_step: bool = False, on_snapshot=None) -> Trajectory:
    """Integrate from t = 0 to config.T.

    Snapshots are kept every ``snapshot_interval`` steps (every step when
    ``keep_every_step``); diagnostics rows every ``diag_interval`` steps.  The
    final time is always recorded.
    """
    from .diagnostics import FunctionalSeries

    grid = config.grid()
    model = config.model()
    ctl = config.step_control()
    eps = config.eps
    state = config.initial_data().state(grid)
    traj = Trajectory(grid, model, eps)
    series = FunctionalSeries(grid, state)
    traj.series = series

    def keep(s):
        traj.snapshots.append(s.copy())
        if on_snapshot is not None:
            on_snapshot(s)

    keep(state)
    T = config.T
    step = 0
    try:
        while state.t < T - 1e-12 * max(T, 1.0):
            dt = cfl_dt(grid, model, state, eps, ctl)
            dt = min(dt, T - state.t)
            state = step_with_retry(grid, model, state, eps, ctl, dt)
            step += 1
            last = state.t >= T - 1e-12 * max(T, 1.0)
            if last:
                state.t = T
            if last or step % config.diag_interval == 0:
                series.record(state)
            if keep_every_step or last or step % config.snapshot_interval == 0:
                keep(state)
    except (TimestepTooLarge, RuntimeError) as exc:
        traj.truncated = True
        traj.error = str(exc)
        log.error("run truncated at t=%.6g: %s", state.t, exc)
    return traj
