"""Integral identities of generalized solutions, assembled on discrete runs.

Each test function is a spatial profile times a polynomial time bump
``chi(t) = (1 - t/T_supp)^4`` whose derivative is known in closed form, so
``phi_t`` never comes from differencing output.  Space integrals use the same
discrete gradient, Laplacian and face pairings as the solver, time integrals
use the trapezoid rule over the stored snapshots.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .domain import Grid, VectorField, face_inner, grad_neumann, integrate, laplacian, vector_laplacian
from .solver import buoyancy, chemotactic_velocity, convection, curl_velocity, face_average


class SupportExceedsTrajectory(ValueError):
    pass


class TestNotNonnegative(ValueError):
    __test__ = False


class CollarTooThin(ValueError):
    pass


@dataclass(frozen=True)
class TimeProfile:
    """chi(t) = (1 - t/t_supp)^power on [0, t_supp), zero afterwards."""

    t_supp: float
    power: int = 4

    def __post_init__(self):
        if not self.t_supp > 0:
            raise ValueError("t_supp must be positive")
        if self.power < 2:
            raise ValueError("power must be at least 2")

    def value(self, t: float) -> float:
        s = 1.0 - t / self.t_supp
        return s**self.power if s > 0 else 0.0

    def derivative(self, t: float) -> float:
        s = 1.0 - t / self.t_supp
        return -self.power * s ** (self.power - 1) / self.t_supp if s > 0 else 0.0


@dataclass(frozen=True)
class SpaceTimeTest:
    """A test function phi(x, t) = profile(x) chi(t).

    For ``kind == 'neumann'`` the profile is a scalar function of (x, y);
    for ``kind == 'solenoidal'`` it is a stream function sampled at grid
    nodes, and phi is its discrete curl.
    """

    test_id: str
    kind: str
    profile: object
    t_profile: TimeProfile
    nonneg: bool = False
    collar: float = 0.0

    def scalar(self, grid: Grid) -> np.ndarray:
        if self.kind != "neumann":
            raise ValueError(f"test {self.test_id} is not a scalar test")
        return grid.sample(self.profile)

    def vector(self, grid: Grid) -> VectorField:
        if self.kind != "solenoidal":
            raise ValueError(f"test {self.test_id} is not a solenoidal test")
        h = max(grid.hx, grid.hy)
        if self.collar < 2.0 * h:
            raise CollarTooThin(f"collar {self.collar:.4g} thinner than 2h = {2.0 * h:.4g}")
        X, Y = grid.nodes()
        s = np.asarray(self.profile(X, Y), dtype=float)
        d = np.minimum(np.minimum(X, 1.0 - X), np.minimum(Y, 1.0 - Y))
        scale = max(float(np.abs(s).max()), 1e-300)
        if np.abs(s[d < self.collar]).max(initial=0.0) > 1e-14 * scale:
            raise CollarTooThin(f"stream of test {self.test_id} does not vanish on the declared collar")
        return curl_velocity(grid, self.profile)

    def combine(self, alpha: float, other: "SpaceTimeTest", test_id: str | None = None) -> "SpaceTimeTest":
        """The test alpha * self + other (same kind and time profile)."""
        if other.kind != self.kind or other.t_profile != self.t_profile:
            raise ValueError("can only combine tests of equal kind and time profile")
        f, g = self.profile, other.profile
        return SpaceTimeTest(
            test_id or f"{alpha}*{self.test_id}+{other.test_id}",
            self.kind,
            lambda x, y: alpha * f(x, y) + g(x, y),
            self.t_profile,
            nonneg=False,
            collar=min(self.collar, other.collar),
        )


def make_neumann_test(k: int, m: int, t_profile: TimeProfile, offset: float = 0.0, amp: float = 1.0,
                      test_id: str | None = None) -> SpaceTimeTest:
    """offset + amp cos(k pi x) cos(m pi y); zero normal derivative on the walls."""
    if k < 0 or m < 0:
        raise ValueError("mode numbers must be nonnegative")

    def prof(x, y):
        return offset + amp * np.cos(k * math.pi * x) * np.cos(m * math.pi * y)

    nonneg = offset - abs(amp) >= 0.0 or (k == 0 and m == 0 and offset + amp >= 0.0)
    return SpaceTimeTest(test_id or f"cos{k}{m}", "neumann", prof, t_profile, nonneg=nonneg)


def collar_bump(collar: float):
    """Smooth 1D bump supported in [collar, 1 - collar], equal to 1 at 1/2."""
    half = 0.5 - collar
    if not half > 0:
        raise ValueError("collar must be below 1/2")

    def b(s):
        r = (np.asarray(s, dtype=float) - 0.5) / half
        out = np.zeros_like(r)
        inside = np.abs(r) < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
        return out

    return b


def make_solenoidal_test(stream, t_profile: TimeProfile, collar: float, test_id: str = "curl") -> SpaceTimeTest:
    """Discrete curl of ``stream``, which must vanish within ``collar`` of the wall."""
    return SpaceTimeTest(test_id, "solenoidal", stream, t_profile, collar=collar)


def bump_stream(collar: float, kx: int = 1, ky: int = 1):
    """bump(x) bump(y) sin(kx pi x) sin(ky pi y)-type stream with a zero collar."""
    b = collar_bump(collar)

    def s(x, y):
        return b(x) * b(y) * np.cos((kx - 1) * math.pi * x) * np.cos((ky - 1) * math.pi * y)

    return s


# -- assembly -------------------------------------------------------------


def _time_weights(times: np.ndarray) -> np.ndarray:
    w = np.zeros_like(times)
    dt = np.diff(times)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


def _checked_times(traj, test: SpaceTimeTest) -> np.ndarray:
    times = traj.times
    if len(times) < 2 or times[-1] < test.t_profile.t_supp * (1.0 - 1e-12):
        end = times[-1] if len(times) else float("nan")
        raise SupportExceedsTrajectory(
            f"test {test.test_id} supported up to t = {test.t_profile.t_supp:.6g} but trajectory ends at {end:.6g}"
        )
    return times


def residual_c(traj, test: SpaceTimeTest) -> float:
    """LHS - RHS of the attractant identity against a Neumann test."""
    times = _checked_times(traj, test)
    grid = traj.grid
    phi = test.scalar(grid)
    gphi = grad_neumann(grid, phi)
    f = traj.model.consumption
    total = 0.0
    for s, w in zip(traj.snapshots, _time_weights(times)):
        chi, dchi = test.t_profile.value(s.t), test.t_profile.derivative(s.t)
        if chi == 0.0 and dchi == 0.0:
            continue
        gc = grad_neumann(grid, s.c)
        cf = face_average(grid, s.c)
        cu = VectorField(cf.u1 * s.u.u1, cf.u2 * s.u.u2)
        lhs = dchi * integrate(grid, s.c * phi)
        rhs = chi * (face_inner(grid, gc, gphi) + integrate(grid, s.n * f(s.c) * phi) - face_inner(grid, cu, gphi))
        total += w * (lhs - rhs)
    c0 = traj.snapshots[0].c
    return float(total + test.t_profile.value(0.0) * integrate(grid, c0 * phi))


def residual_u(traj, test: SpaceTimeTest, forcing=None) -> float:
    """LHS - RHS of the momentum identity against a solenoidal test.

    ``forcing(state) -> VectorField`` is added to the buoyancy term; it exists
    to probe that gradient forcings are invisible to these tests.
    """
    times = _checked_times(traj, test)
    grid = traj.grid
    Phi = test.vector(grid)
    lapPhi = vector_laplacian(grid, Phi)
    total = 0.0
    for s, w in zip(traj.snapshots, _time_weights(times)):
        chi, dchi = test.t_profile.value(s.t), test.t_profile.derivative(s.t)
        if chi == 0.0 and dchi == 0.0:
            continue
        force = buoyancy(grid, traj.model, s.n)
        if forcing is not None:
            force = force + forcing(s)
        lhs = -dchi * face_inner(grid, s.u, Phi)
        # -grad u : grad Phi = u . lap Phi, (u x u) : grad Phi = -conv(u) . Phi
        rhs = chi * (face_inner(grid, s.u, lapPhi) - face_inner(grid, convection(grid, s.u), Phi)
                     + face_inner(grid, force, Phi))
        total += w * (lhs - rhs)
    u0 = traj.snapshots[0].u
    return float(total - test.t_profile.value(0.0) * face_inner(grid, u0, Phi))


def gap_ln_n(traj, test: SpaceTimeTest) -> float:
    """LHS - RHS of the ln(n + 1) inequality; nonnegative for generalized solutions."""
    times = _checked_times(traj, test)
    grid = traj.grid
    phi = test.scalar(grid)
    if not test.nonneg or phi.min() < 0.0:
        raise TestNotNonnegative(f"test {test.test_id} is not nonnegative")
    gphi = grad_neumann(grid, phi)
    lap_phi = laplacian(grid, phi, "neumann")
    phif = face_average(grid, phi)
    total = 0.0
    for s, w in zip(traj.snapshots, _time_weights(times)):
        chi, dchi = test.t_profile.value(s.t), test.t_profile.derivative(s.t)
        if chi == 0.0 and dchi == 0.0:
            continue
        L = np.log(s.n + 1.0)
        gL = grad_neumann(grid, L)
        rf = face_average(grid, s.n / (s.n + 1.0))
        W = chemotactic_velocity(grid, traj.model, traj.eps, s.n, s.c)
        rW = VectorField(rf.u1 * W.u1, rf.u2 * W.u2)
        Lf = face_average(grid, L)
        Lu = VectorField(Lf.u1 * s.u.u1, Lf.u2 * s.u.u2)
        gLphi = VectorField(gL.u1 * phif.u1, gL.u2 * phif.u2)
        rhs = (
            integrate(grid, L * lap_phi)
            + face_inner(grid, gLphi, gL)
            - face_inner(grid, gLphi, rW)
            + face_inner(grid, rW, gphi)
            + face_inner(grid, Lu, gphi)
        )
        lhs = -dchi * integrate(grid, L * phi)
        total += w * (lhs - chi * rhs)
    L0 = np.log(traj.snapshots[0].n + 1.0)
    return float(total - test.t_profile.value(0.0) * integrate(grid, L0 * phi))


ASSEMBLERS = {"c": residual_c, "u": residual_u, "ln_n": gap_ln_n}


# -- refinement studies ---------------------------------------------------


@dataclass
class ResidualTable:
    """Residuals per (test id, level); level 0 is the coarsest."""

    values: dict = field(default_factory=dict)
    kinds: dict = field(default_factory=dict)
    min_ratio: float = 1.5
    # when set, gaps must also shrink by this factor per level
    gap_min_ratio: float | None = None
    # residuals below this are round-off: the test is orthogonal to the run
    atol: float = 1e-12

    def add(self, test_id: str, kind: str, level: int, value: float) -> None:
        key = (test_id, level)
        if key in self.values:
            raise ValueError(f"duplicate row {key}")
        if self.kinds.setdefault(test_id, kind) != kind:
            raise ValueError(f"test {test_id} recorded with two kinds")
        self.values[key] = float(value)

    def tests(self) -> list[str]:
        return list(self.kinds)

    def series(self, test_id: str) -> np.ndarray:
        levels = sorted(lv for (t, lv) in self.values if t == test_id)
        return np.array([self.values[(test_id, lv)] for lv in levels])

    def ratios(self, test_id: str) -> np.ndarray:
        r = np.abs(self.series(test_id))
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(r[1:] > 0, r[:-1] / r[1:], np.inf)

    def orders(self, test_id: str) -> np.ndarray:
        return np.log2(self.ratios(test_id))

    def extrapolated(self, test_id: str) -> float:
        """Richardson limit from the finest levels (order fitted when 3 levels exist)."""
        g = self.series(test_id)
        p = 1.0
        if len(g) >= 3:
            d1, d2 = abs(g[-2] - g[-3]), abs(g[-1] - g[-2])
            if d1 > 0 and d2 > 0:
                p = min(max(math.log2(d1 / d2), 1.0), 4.0)
        return float(g[-1] + (g[-1] - g[-2]) / (2.0**p - 1.0))

    def tol_gap(self, test_id: str, level: int | None = None) -> float:
        """Three times the estimated discretization error of a gap at ``level``."""
        g = self.series(test_id)
        lv = len(g) - 1 if level is None else level
        return 3.0 * abs(g[lv] - self.extrapolated(test_id)) + 1e-14

    def row_verdicts(self, test_id: str):
        """(level, value, tol, passed) per level."""
        g = self.series(test_id)
        out = []
        for lv, v in enumerate(g):
            if self.kinds[test_id] == "ln_n":
                tol = self.tol_gap(test_id, lv)
                ok = v >= -tol
                if self.gap_min_ratio is not None and lv > 0:
                    ok = ok and abs(v) <= max(abs(g[lv - 1]) / self.gap_min_ratio, self.atol)
            elif lv == 0:
                tol, ok = max(abs(v), self.atol), True
            else:
                tol = max(abs(g[lv - 1]) / self.min_ratio, self.atol)
                ok = abs(v) <= tol
            out.append((lv, float(v), float(tol), bool(ok)))
        return out

    def passed(self) -> bool:
        return all(ok for t in self.tests() for (_, _, _, ok) in self.row_verdicts(t))

    def write_csv(self, path) -> None:
        write_suite_csv(path, [self])

    @classmethod
    def read_csv(cls, path) -> "ResidualTable":
        tab = cls()
        with open(path, newline="") as fh:
            for r in csv.DictReader(fh):
                tab.add(r["test_id"], r["kind"], int(r["level"]), float(r["residual_or_gap"]))
        return tab


def default_tests(t_supp: float) -> list[tuple[str, SpaceTimeTest]]:
    """The sampled test family: (kind, test) pairs."""
    tp = TimeProfile(t_supp)
    tests = [
        ("c", make_neumann_test(1, 0, tp, test_id="c_cos10")),
        ("c", make_neumann_test(0, 1, tp, test_id="c_cos01")),
        ("c", make_neumann_test(1, 1, tp, test_id="c_cos11")),
        ("ln_n", make_neumann_test(0, 0, tp, offset=1.0, amp=0.0, test_id="ln_const")),
        ("ln_n", make_neumann_test(1, 0, tp, offset=1.0, amp=0.5, test_id="ln_cos10")),
        ("ln_n", make_neumann_test(0, 1, tp, offset=1.0, amp=0.5, test_id="ln_cos01")),
        ("ln_n", make_neumann_test(1, 1, tp, offset=1.0, amp=0.5, test_id="ln_cos11")),
        ("ln_n", make_neumann_test(2, 1, tp, offset=1.0, amp=0.9, test_id="ln_cos21")),
        ("u", make_solenoidal_test(bump_stream(0.15), tp, 0.15, test_id="u_bump11")),
        ("u", make_solenoidal_test(bump_stream(0.15, 2, 1), tp, 0.15, test_id="u_bump21")),
    ]
    return tests


def assemble(traj, tests) -> list[tuple[str, str, float]]:
    """Evaluate each (kind, test) on one trajectory: (test_id, kind, value)."""
    return [(t.test_id, kind, ASSEMBLERS[kind](traj, t)) for kind, t in tests]


def _run_every_step(cfg):
    from .solver import run

    return run(cfg, keep_every_step=True)


def refinement_study(config, tests=None, levels=None, dt0=None, T=None, runner=None,
                     table: ResidualTable | None = None, prefix: str = "") -> ResidualTable:
    """Run ``config`` on each grid level with dt halved per level and assemble ``tests``.

    Levels default to ``config.weak_levels``; the coarsest uses ``dt0``
    (default ``config.weak_dt``) and the horizon ``T`` (default ``config.weak_T``).
    ``runner(cfg) -> Trajectory`` must keep every step; rows go into ``table``
    with ids prefixed by ``prefix``.
    """
    levels = tuple(config.weak_levels if levels is None else levels)
    dt0 = config.weak_dt if dt0 is None else dt0
    T = config.weak_T if T is None else T
    tests = default_tests(T) if tests is None else tests
    runner = _run_every_step if runner is None else runner
    table = ResidualTable() if table is None else table
    for lv, N in enumerate(levels):
        cfg = config.replace(nx=N, ny=N, dt=dt0 / 2**lv, T=T)
        traj = runner(cfg)
        if traj.truncated:
            raise RuntimeError(f"level {lv} run truncated: {traj.error}")
        for test_id, kind, value in assemble(traj, tests):
            table.add(prefix + test_id, kind, lv, value)
    return table


def heat_config(config):
    """The decoupled problem: no chemotaxis, no consumption, no forcing, heat initial data."""
    return config.replace(a0=0.0, beta0=0.0, consumption="zero", potential="flat", initial="heat")


def heat_tests(t_supp: float) -> list[tuple[str, SpaceTimeTest]]:
    return [(k, t) for k, t in default_tests(t_supp) if k in ("c", "ln_n")]


# the manufactured heat runs must converge at order >= 1, i.e. ratio >= 2
HEAT_MIN_RATIO = 2.0


def weak_suite(config, runner=None) -> tuple[ResidualTable, ResidualTable]:
    """Refinement studies on the configured model and on the pure-heat problem."""
    T = config.weak_T
    coupled = refinement_study(config, runner=runner, prefix="run_")
    heat = ResidualTable(min_ratio=HEAT_MIN_RATIO, gap_min_ratio=HEAT_MIN_RATIO)
    refinement_study(heat_config(config), heat_tests(T), runner=runner, table=heat, prefix="heat_")
    return coupled, heat


def write_suite_csv(path, tables) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("test_id", "kind", "level", "residual_or_gap", "tol", "verdict"))
        for tab in tables:
            for t in tab.tests():
                for lv, v, tol, ok in tab.row_verdicts(t):
                    w.writerow((t, tab.kinds[t], lv, repr(v), repr(tol), "PASS" if ok else "FAIL"))


def read_suite_verdicts(path) -> list[tuple[str, str, int, float, float, bool]]:
    with open(path, newline="") as fh:
        return [
            (r["test_id"], r["kind"], int(r["level"]), float(r["residual_or_gap"]), float(r["tol"]),
             r["verdict"] == "PASS")
            for r in csv.DictReader(fh)
        ]
