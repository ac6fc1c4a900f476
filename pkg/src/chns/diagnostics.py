"""Integral functionals along a run and the a priori inequalities they obey."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .domain import Grid, face_inner, grad_neumann, integrate, norm, velocity_gradient_sq
from .trudinger_moser import fisher_information

COLUMNS = (
    "t",
    "mass",
    "c_L1",
    "c_L2",
    "c_Linf",
    "grad_c_sq",
    "D_c",
    "fisher_n",
    "D_n",
    "E",
    "int_E",
    "K",
    "grad_u_sq",
    "D_u",
)
ACCUMULATED = {"D_c": "grad_c_sq", "D_n": "fisher_n", "int_E": "E", "D_u": "grad_u_sq"}

# first Dirichlet eigenvalue of the unit square is 2 pi^2
POINCARE_SQUARE = 1.0 / (math.pi * math.sqrt(2.0))
TOL_REPORT = 1e-8
SLACK_FACTOR = 1.1


def weighted_density_gradient(grid: Grid, n: np.ndarray) -> float:
    """Discrete integral of |grad n|^2 / (n + 1)^2 with face-averaged weights."""
    return fisher_information(grid, n + 1.0)


def entropy(grid: Grid, n: np.ndarray, n0_bar: float) -> float:
    """E = integral of (n + 1) ln((n + 1) / (mean(n0) + 1))."""
    return integrate(grid, (n + 1.0) * np.log((n + 1.0) / (n0_bar + 1.0)))


def instantaneous(grid: Grid, state, n0_bar: float) -> dict:
    n, c, u = state.n, state.c, state.u
    gc = grad_neumann(grid, c)
    return {
        "t": float(state.t),
        "mass": integrate(grid, n),
        "c_L1": norm(grid, c, "L1"),
        "c_L2": norm(grid, c, "L2"),
        "c_Linf": norm(grid, c, "Linf"),
        "grad_c_sq": face_inner(grid, gc, gc),
        "fisher_n": weighted_density_gradient(grid, n),
        "E": entropy(grid, n, n0_bar),
        "K": face_inner(grid, u, u),
        "grad_u_sq": velocity_gradient_sq(grid, u),
    }


class FunctionalSeries:
    """Rows of functionals; cumulative integrals use the trapezoid rule in t."""

    def __init__(self, grid: Grid, initial_state=None, rows=None, initial=None):
        self.grid = grid
        self.rows: list[dict] = []
        self.initial: dict = {}
        if initial_state is not None:
            n0, c0, u0 = initial_state.n, initial_state.c, initial_state.u
            self.initial = {
                "mass": integrate(grid, n0),
                "c0_sq": integrate(grid, c0 * c0),
                "c0_max": float(c0.max()),
                "u0_sq": face_inner(grid, u0, u0),
            }
            self.record(initial_state)
        if initial is not None:
            self.initial = dict(initial)
        if rows is not None:
            self.rows = [dict(r) for r in rows]

    @property
    def n0_bar(self) -> float:
        return self.initial["mass"]

    def record(self, state) -> dict:
        row = instantaneous(self.grid, state, self.n0_bar)
        if self.rows:
            prev = self.rows[-1]
            dt = row["t"] - prev["t"]
            if not dt > 0:
                raise ValueError("series times must be strictly increasing")
            for acc, rate in ACCUMULATED.items():
                row[acc] = prev[acc] + 0.5 * dt * (prev[rate] + row[rate])
        else:
            for acc in ACCUMULATED:
                row[acc] = 0.0
        self.rows.append(row)
        return row

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def __len__(self):
        return len(self.rows)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for r in self.rows:
                w.writerow([repr(float(r[k])) for k in COLUMNS])

    @classmethod
    def read_csv(cls, path, grid: Grid, initial: dict) -> "FunctionalSeries":
        with open(path, newline="") as fh:
            rows = [{k: float(v) for k, v in r.items()} for r in csv.DictReader(fh)]
        return cls(grid, rows=rows, initial=initial)


@dataclass
class CheckResult:
    name: str
    lhs: float
    rhs: float
    constants: dict = field(default_factory=dict)
    slack: float = 1.0

    @property
    def margin(self) -> float:
        return self.slack * self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.margin >= -TOL_REPORT * abs(self.rhs)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{self.name} {self.lhs!r} {self.rhs!r} {self.margin!r} {verdict}"


def check_mass(series: FunctionalSeries, tol: float = 1e-10) -> CheckResult:
    m = series.column("mass")
    drift = float(np.max(np.abs(m - m[0])) / m[0])
    return CheckResult("mass_conservation", drift, tol)


def check_c_monotone(series: FunctionalSeries, p, tol: float = 1e-10) -> CheckResult:
    key = {1: "c_L1", 2: "c_L2", "inf": "c_Linf", math.inf: "c_Linf"}[p]
    v = series.column(key)
    worst = 0.0
    running_min = v[0]
    for x in v[1:]:
        if running_min > 0:
            worst = max(worst, x / running_min - 1.0)
        elif x > 0:
            worst = math.inf
        running_min = min(running_min, x)
    label = "inf" if key == "c_Linf" else str(p)
    return CheckResult(f"c_monotone_L{label}", worst, tol)


def check_grad_c_budget(series: FunctionalSeries, slack: float = 1.0) -> CheckResult:
    rhs = 0.5 * series.initial["c0_sq"]
    return CheckResult("grad_c_budget", series.rows[-1]["D_c"], rhs, slack=slack)


def grad_n_bound(series: FunctionalSeries, S0_at_c0max: float) -> float:
    return 2.0 * series.initial["mass"] + S0_at_c0max**2 * series.initial["c0_sq"]


def check_grad_n_budget(series: FunctionalSeries, S0_at_c0max: float, slack: float = 1.0) -> CheckResult:
    rhs = grad_n_bound(series, S0_at_c0max)
    return CheckResult(
        "grad_n_budget", series.rows[-1]["D_n"], rhs, {"S0": S0_at_c0max}, slack=slack
    )


def nlogn_pointwise_margins(series: FunctionalSeries, K1: float) -> np.ndarray:
    """Per-row margin of E <= (1/2pi) int(n+1) int|grad n|^2/(n+1)^2 + K1 int(n+1)."""
    mass1 = series.column("mass") + 1.0
    bound = mass1 * series.column("fisher_n") / (2 * math.pi) + K1 * mass1
    return bound - series.column("E")


def check_nlogn(series: FunctionalSeries, K1, T: float, S0_at_c0max: float, slack: float = 1.0) -> CheckResult:
    if K1 is None:
        raise ValueError("missing-calibration: K1 is required for the n log n bound")
    K2 = grad_n_bound(series, S0_at_c0max)
    mass1 = series.initial["mass"] + 1.0
    rhs = (K2 / (2 * math.pi) + K1 * T) * mass1
    pointwise = nlogn_pointwise_margins(series, K1)
    res = CheckResult(
        "nlogn_bound",
        series.rows[-1]["int_E"],
        rhs,
        {"K1": K1, "K2": K2, "T": T, "pointwise_min_margin": float(pointwise.min())},
        slack=slack,
    )
    if pointwise.min() < -TOL_REPORT * rhs:
        # a pointwise failure invalidates the bound even when the integral passes
        res.lhs = max(res.lhs, slack * rhs - float(pointwise.min()))
    return res


@dataclass(frozen=True)
class EnergyConstants:
    K1: float
    K2: float
    K3: float
    K4: float
    K5: float
    Cp: float
    T: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("K1", "K2", "K3", "K4", "K5", "Cp", "T")}


def energy_constants(series: FunctionalSeries, K1: float, grad_phi_sup: float, hess_phi_sup: float, T: float,
                     Cp: float = POINCARE_SQUARE) -> EnergyConstants:
    """Assemble K2..K5 of the velocity energy estimate.

    K2 = 2|grad phi|^2 + 2|H phi|^2 Cp^2, K3 = (8 pi / 2 K2) / int(n0 + 1),
    K4 = the measured time integral of E over [0, T],
    K5 = (2 / K3) (K4 + K1 T int(n0 + 1)).
    """
    if K1 is None:
        raise ValueError("missing-calibration: K1 is required for the velocity energy bound")
    mass1 = series.initial["mass"] + 1.0
    K2 = 2 * grad_phi_sup**2 + 2 * hess_phi_sup**2 * Cp**2
    t = series.column("t")
    K4 = float(np.interp(T, t, series.column("int_E")))
    if K2 == 0.0:
        return EnergyConstants(K1, 0.0, math.inf, K4, 0.0, Cp, T)
    K3 = 8 * math.pi / (2 * K2) / mass1
    K5 = 2.0 / K3 * (K4 + K1 * T * mass1)
    return EnergyConstants(K1, K2, K3, K4, K5, Cp, T)


def check_energy_u(series: FunctionalSeries, consts: EnergyConstants, slack: float = 1.0) -> CheckResult:
    """sup_t [K(t) + D_u(t)] <= int |u0|^2 + K5(T)."""
    lhs_t = series.column("K") + series.column("D_u")
    rhs = series.initial["u0_sq"] + consts.K5
    return CheckResult("u_energy", float(lhs_t.max()), rhs, consts.as_dict(), slack=slack)


def check_energy_u_g(series: FunctionalSeries, consts: EnergyConstants, slack: float = 1.0) -> CheckResult:
    """Pointwise-in-time form: K(t) + D_u(t) <= int |u0|^2 + int_0^t g."""
    t = series.column("t")
    lhs_t = series.column("K") + series.column("D_u")
    if consts.K2 == 0.0:
        g_int = np.zeros_like(t)
    else:
        mass1 = series.initial["mass"] + 1.0
        g_int = 2.0 / consts.K3 * (series.column("int_E") + consts.K1 * t * mass1)
    rhs_t = series.initial["u0_sq"] + g_int
    margins = slack * rhs_t - lhs_t
    k = int(np.argmin(margins[1:])) + 1 if len(margins) > 1 else 0
    return CheckResult(
        "u_energy_g", float(lhs_t[k]), float(rhs_t[k]), {"t_worst": float(t[k])}, slack=slack
    )


@dataclass
class InequalityReport:
    entries: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def lines(self) -> list[str]:
        return [e.line() for e in self.entries]

    def write(self, path) -> None:
        with open(path, "w") as fh:
            for k, v in self.notes.items():
                fh.write(f"# {k} = {v}\n")
            for line in self.lines():
                fh.write(line + "\n")


def full_report(series: FunctionalSeries, model, K1: float, T: float, slack: float = 1.0) -> InequalityReport:
    """Mass, three attractant norms, two gradient budgets, the entropy bound and two velocity bounds."""
    S0 = model.S0(series.initial["c0_max"])
    pot = model.potential
    consts = energy_constants(series, K1, pot.grad_sup, pot.hessian_sup, T)
    rep = InequalityReport()
    rep.entries = [
        check_mass(series),
        check_c_monotone(series, 1),
        check_c_monotone(series, 2),
        check_c_monotone(series, "inf"),
        check_grad_c_budget(series, slack),
        check_grad_n_budget(series, S0, slack),
        check_nlogn(series, K1, T, S0, slack),
        check_energy_u(series, consts, slack),
        check_energy_u_g(series, consts, slack),
    ]
    rep.notes = {"K1": repr(K1), "S0": repr(S0), "slack": repr(slack), "cadence_rows": len(series)}
    return rep
