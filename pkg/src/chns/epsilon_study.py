"""A family of regularized runs with shrinking eps, compared pairwise.

Grid, step control and output cadence are shared by all members, so the
adjacent-pair differences isolate the effect of the regularization.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import full_report, grad_n_bound
from .domain import face_inner, grad_neumann, integrate
from .solver import Trajectory, run

log = logging.getLogger(__name__)


class CadenceMismatch(ValueError):
    pass


@dataclass(frozen=True)
class EpsFamilyConfig:
    eps_list: tuple
    base: object
    T: float

    def __post_init__(self):
        e = tuple(float(x) for x in self.eps_list)
        if not e:
            raise ValueError("eps list is empty")
        if not all(0.0 < x < 1.0 for x in e):
            raise ValueError("every eps must lie in (0, 1)")
        if not all(a > b for a, b in zip(e, e[1:])):
            raise ValueError("eps list must be strictly decreasing")
        if not self.T > 0:
            raise ValueError("T must be positive")
        object.__setattr__(self, "eps_list", e)

    @classmethod
    def from_run_config(cls, config, T: float | None = None) -> "EpsFamilyConfig":
        return cls(tuple(config.eps_list), config, config.T if T is None else T)

    def member_config(self, eps: float):
        return self.base.replace(eps=eps, T=self.T)


@dataclass
class Member:
    eps: float
    trajectory: Trajectory | None
    error: str = ""

    @property
    def failed(self) -> bool:
        return self.trajectory is None or self.trajectory.truncated


def worker_count(size: int) -> int:
    """Family size, capped by the CHNS_THREADS environment variable."""
    cap = os.environ.get("CHNS_THREADS")
    n = size
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            log.warning("ignoring non-integer CHNS_THREADS=%r", cap)
    return max(1, n)


def run_family(cfg: EpsFamilyConfig, threads: int | None = None) -> list[Member]:
    """One run per eps; a failing member is recorded, its siblings still run."""

    def one(eps):
        try:
            traj = run(cfg.member_config(eps))
            return Member(eps, traj, traj.error)
        except Exception as exc:  # noqa: BLE001 - isolate member failures
            log.error("member eps=%g failed: %s", eps, exc)
            return Member(eps, None, f"{type(exc).__name__}: {exc}")

    n = worker_count(len(cfg.eps_list)) if threads is None else max(1, threads)
    if n == 1:
        return [one(e) for e in cfg.eps_list]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(one, cfg.eps_list))


def _common_times(trajs) -> np.ndarray:
    t0 = trajs[0].times
    for tr in trajs[1:]:
        t = tr.times
        if len(t) != len(t0) or not np.allclose(t, t0, rtol=0.0, atol=1e-12):
            raise CadenceMismatch("trajectories are not sampled at identical times")
    return t0


def _trapezoid(t: np.ndarray, y: np.ndarray, T: float) -> float:
    keep = t <= T * (1.0 + 1e-12)
    t, y = t[keep], y[keep]
    return float(np.sum(0.5 * np.diff(t) * (y[1:] + y[:-1])))


PAIR_COLUMNS = ("L1_n", "L2_c", "L2_u", "L2_grad_c")


def pair_distances(a: Trajectory, b: Trajectory, T: float) -> dict:
    """Space-time distances between two runs over (0, T)."""
    t = _common_times([a, b])
    grid = a.grid
    d = {k: [] for k in PAIR_COLUMNS}
    for sa, sb in zip(a.snapshots, b.snapshots):
        du = sa.u - sb.u
        g = grad_neumann(grid, sa.c - sb.c)
        d["L1_n"].append(integrate(grid, np.abs(sa.n - sb.n)))
        d["L2_c"].append(integrate(grid, (sa.c - sb.c) ** 2))
        d["L2_u"].append(face_inner(grid, du, du))
        d["L2_grad_c"].append(face_inner(grid, g, g))
    out = {"L1_n": _trapezoid(t, np.array(d["L1_n"]), T)}
    for k in PAIR_COLUMNS[1:]:
        out[k] = math.sqrt(max(_trapezoid(t, np.array(d[k]), T), 0.0))
    return out


@dataclass
class CauchyTable:
    rows: list = field(default_factory=list)  # (eps_high, eps_low, distances)
    ui_value: float = math.nan
    ui_bound: float = math.nan

    def column(self, name: str) -> np.ndarray:
        return np.array([r[2][name] for r in self.rows])

    def monotone(self, name: str) -> bool:
        v = self.column(name)
        return bool(np.all(np.diff(v) < 0))

    @property
    def ui_passed(self) -> bool:
        return self.ui_value <= self.ui_bound

    def passed(self) -> bool:
        return self.ui_passed and all(self.monotone(k) for k in PAIR_COLUMNS)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("eps_low", "eps_high") + PAIR_COLUMNS)
            for hi, lo, d in self.rows:
                w.writerow([repr(lo), repr(hi)] + [repr(float(d[k])) for k in PAIR_COLUMNS])
            verdict = "PASS" if self.ui_passed else "FAIL"
            w.writerow(["uniform_integrability", repr(float(self.ui_value)), "bound", repr(float(self.ui_bound)),
                        verdict, ""])

    @classmethod
    def read_csv(cls, path) -> "CauchyTable":
        tab = cls()
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            next(r)
            for row in r:
                if row[0] == "uniform_integrability":
                    tab.ui_value, tab.ui_bound = float(row[1]), float(row[3])
                else:
                    d = {k: float(v) for k, v in zip(PAIR_COLUMNS, row[2:])}
                    tab.rows.append((float(row[1]), float(row[0]), d))
        return tab


def cauchy_table(trajs, T: float) -> CauchyTable:
    """Distances between adjacent members, ordered along the family."""
    if len(trajs) < 2:
        raise ValueError("need at least two trajectories")
    _common_times(trajs)
    tab = CauchyTable()
    for a, b in zip(trajs, trajs[1:]):
        tab.rows.append((a.eps, b.eps, pair_distances(a, b, T)))
    return tab


def entropy_integral(traj: Trajectory, T: float, n0_bar: float | None = None) -> float:
    """Time integral over (0, T) of int G(n) with G(s) = (s+1) ln((s+1)/(n0_bar+1))."""
    grid = traj.grid
    if n0_bar is None:
        n0_bar = traj.series.initial["mass"]
    vals = [integrate(grid, (s.n + 1.0) * np.log((s.n + 1.0) / (n0_bar + 1.0))) for s in traj.snapshots]
    return _trapezoid(traj.times, np.array(vals), T)


def uniform_integrability(trajs, T: float) -> float:
    """Largest entropy integral over the family."""
    return max(entropy_integral(tr, T) for tr in trajs)


def entropy_bound(traj: Trajectory, K1: float, T: float) -> float:
    """(K2 / 2 pi + K1 T) int(n0 + 1) with K2 the weighted density-gradient budget."""
    init = traj.series.initial
    K2 = grad_n_bound(traj.series, traj.model.S0(init["c0_max"]))
    return (K2 / (2.0 * math.pi) + K1 * T) * (init["mass"] + 1.0)


@dataclass
class EpsStudyResult:
    members: list
    table: CauchyTable | None
    reports: dict

    @property
    def failed_members(self) -> list:
        return [m.eps for m in self.members if m.failed]

    def passed(self) -> bool:
        return (
            not self.failed_members
            and self.table is not None
            and self.table.passed()
            and all(r.passed for r in self.reports.values())
        )


def study(cfg: EpsFamilyConfig, K1: float, threads: int | None = None) -> EpsStudyResult:
    """Run the family, tabulate adjacent differences and check every member."""
    members = run_family(cfg, threads)
    good = [m.trajectory for m in members if not m.failed]
    reports = {
        m.eps: full_report(m.trajectory.series, m.trajectory.model, K1, cfg.T, cfg.base.slack)
        for m in members
        if not m.failed
    }
    table = None
    if len(good) >= 2 and len(good) == len(members):
        table = cauchy_table(good, cfg.T)
        table.ui_value = uniform_integrability(good, cfg.T)
        table.ui_bound = entropy_bound(good[0], K1, cfg.T)
    return EpsStudyResult(members, table, reports)
