"""Empirical audit of the Trudinger-Moser consequences on the discrete square.

Two entropy/dissipation inequalities are checked over a seeded family of test
pairs (phi, psi):

    (I)  int phi (psi - mean psi) <= (1/a) [int psi ln(psi/mean psi) + C int psi]
                                     + (a / 8 pi) int psi int |grad phi|^2
    (II) int psi ln(psi/mean psi) <= (1 / 2 pi) int psi int |grad psi|^2 / psi^2 + C int psi

together with the raw exponential bound int exp(2 pi xi^2) <= K1 for zero-mean xi
of unit Dirichlet energy.  The constants are existential, so they are calibrated
(smallest value consistent with the family), not asserted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import Grid, face_inner, grad_neumann, integrate, norm

PSI_FLOOR = 1e-3
EXP_CLAMP = 700.0
DEFAULT_A_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)
KINDS = ("neumann_trig", "bump", "random_smooth")


def fisher_information(grid: Grid, psi: np.ndarray) -> float:
    """Discrete integral of |grad psi|^2 / psi^2, psi averaged onto faces."""
    g = grad_neumann(grid, psi)
    w1 = np.ones_like(g.u1)
    w2 = np.ones_like(g.u2)
    w1[1:-1, :] = 0.5 * (psi[1:, :] + psi[:-1, :])
    w2[:, 1:-1] = 0.5 * (psi[:, 1:] + psi[:, :-1])
    return float(grid.cell_area * (np.sum((g.u1 / w1) ** 2) + np.sum((g.u2 / w2) ** 2)))


def relative_entropy(grid: Grid, psi: np.ndarray) -> float:
    m = integrate(grid, psi)
    return integrate(grid, psi * np.log(psi / m))


def _require_positive(psi):
    if np.min(psi) <= 0:
        raise ValueError("nonpositive-psi: psi must be strictly positive")


# -- test-function family --------------------------------------------------


def _trig_field(rng, x, y, kmax, terms, decay):
    out = np.zeros_like(x)
    for _ in range(terms):
        k, m = 0, 0
        while k + m == 0:
            k, m = rng.integers(0, kmax + 1, size=2)
        coef = rng.normal() / (1.0 + k * k + m * m) ** decay
        out += coef * np.cos(k * np.pi * x) * np.cos(m * np.pi * y)
    return out


def _bump_field(rng, x, y):
    x0, y0 = rng.uniform(0.0, 1.0, size=2)
    width = rng.uniform(0.08, 0.35)
    return np.exp(-((x - x0) ** 2 + (y - y0) ** 2) / (2 * width**2))


def _raw_field(kind, rng, x, y):
    if kind == "neumann_trig":
        return _trig_field(rng, x, y, kmax=4, terms=int(rng.integers(1, 4)), decay=0.0)
    if kind == "bump":
        return _bump_field(rng, x, y)
    return _trig_field(rng, x, y, kmax=8, terms=24, decay=1.5)


# (width, amplitude of a*phi) for corner-concentrated Gibbs pairs; corner
# concentration is the extremal direction for inequality (I) on the square
ANCHORS = tuple((w, A) for w in (0.1, 0.15, 0.21, 0.3) for A in (8.0, 11.0, 13.6, 16.0))
ANCHOR_A = 4.0


def _anchor_pair(k, x, y):
    w, A = ANCHORS[k]
    b = np.exp(-(x**2 + y**2) / (2 * w**2))
    phi = (A / ANCHOR_A) * b
    e = A * b
    psi = PSI_FLOOR + (1.0 - PSI_FLOOR) * np.exp(e - e.max())
    return phi, psi


@dataclass(frozen=True)
class TestFunctionFamily:
    """Seeded family of (phi, psi) pairs sampled at cell centres.

    Member k depends only on (seed, k), so a larger count extends a smaller
    family instead of resampling it.  With ``kind='mixed'`` members cycle
    through the three kinds.  Half of the psi members are Gibbs-type
    exp(s * phi) profiles, which saturate inequality (I); the rest use an
    independent field.  The first ``len(ANCHORS)`` members (when ``anchors``)
    are deterministic corner bumps phi = (A/4) b with psi = exp(A b), the
    maximizing psi of (I) at a = 4.
    """

    __test__ = False

    seed: int = 7
    count: int = 1000
    kind: str = "mixed"
    n: int = 32
    anchors: bool = True

    @property
    def grid(self) -> Grid:
        return Grid(self.n, self.n)

    def member_kind(self, k: int) -> str:
        return KINDS[k % 3] if self.kind == "mixed" else self.kind

    def member(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        x, y = self.grid.centers()
        if self.anchors and k < len(ANCHORS):
            return _anchor_pair(k, x, y)
        rng = np.random.default_rng([self.seed, k])
        kind = self.member_kind(k)
        phi = rng.uniform(0.2, 4.0) * _raw_field(kind, rng, x, y)
        if rng.random() < 0.5:
            g = phi / max(np.abs(phi).max(), 1e-12)
        else:
            g = _raw_field(kind, rng, x, y)
            g = g / max(np.abs(g).max(), 1e-12)
        s = rng.uniform(-4.0, 4.0)
        e = s * g
        psi = PSI_FLOOR + (1.0 - PSI_FLOOR) * np.exp(e - e.max())
        return phi, psi

    def __iter__(self):
        for k in range(self.count):
            yield self.member(k)

    def describe(self) -> str:
        return (
            f"seed={self.seed} kind={self.kind} count={self.count} "
            f"grid={self.n}x{self.n} anchors={len(ANCHORS) if self.anchors else 0}"
        )


# -- the inequalities ------------------------------------------------------


def raw_mt_value(grid: Grid, phi: np.ndarray):
    """Normalize phi to zero mean, unit H1 seminorm; return (int exp(2 pi xi^2), clamped).

    Returns ``(None, False)`` for fields with zero seminorm.
    """
    xi = phi - phi.mean()
    s = norm(grid, xi, "H1seminorm")
    if s <= 1e-14 * max(1.0, np.abs(phi).max()):
        return None, False
    xi = xi / s
    expo = 2.0 * math.pi * xi * xi
    clamped = bool(expo.max() > EXP_CLAMP)
    return integrate(grid, np.exp(np.minimum(expo, EXP_CLAMP))), clamped


@dataclass
class RawMTResult:
    K1_est: float
    worst_index: int
    skipped: int
    clamped: list = field(default_factory=list)


def raw_mt_check(family: TestFunctionFamily) -> RawMTResult:
    grid = family.grid
    best, worst, skipped, clamped = 1.0, -1, 0, []
    for k, (phi, _) in enumerate(family):
        val, cl = raw_mt_value(grid, phi)
        if val is None:
            skipped += 1
            continue
        if cl:
            clamped.append(k)
        if worst < 0 or val > best:
            best, worst = val, k
    return RawMTResult(best, worst, skipped, clamped)


def check_ineq1(grid: Grid, phi: np.ndarray, psi: np.ndarray, a: float, C: float) -> float:
    """Margin RHS - LHS of inequality (I)."""
    _require_positive(psi)
    if a <= 0:
        raise ValueError("nonpositive-a: a must be positive")
    m = integrate(grid, psi)
    lhs = integrate(grid, phi * (psi - m))
    gphi = grad_neumann(grid, phi)
    rhs = (relative_entropy(grid, psi) + C * m) / a + a / (8 * math.pi) * m * face_inner(grid, gphi, gphi)
    return rhs - lhs


def check_ineq2(grid: Grid, psi: np.ndarray, C: float) -> float:
    """Margin RHS - LHS of inequality (II)."""
    _require_positive(psi)
    m = integrate(grid, psi)
    rhs = m * fisher_information(grid, psi) / (2 * math.pi) + C * m
    return rhs - relative_entropy(grid, psi)


def jensen_check(grid: Grid, psi: np.ndarray) -> float:
    """Integral of ln(psi / mean psi); nonpositive by concavity."""
    _require_positive(psi)
    return integrate(grid, np.log(psi / integrate(grid, psi)))


# -- calibration -----------------------------------------------------------


@dataclass
class MemberTerms:
    """Per-member integrals; margins are affine in C."""

    L: np.ndarray  # int phi (psi - mean psi)
    H: np.ndarray  # relative entropy
    m: np.ndarray  # int psi
    G: np.ndarray  # int |grad phi|^2
    F: np.ndarray  # Fisher information of psi

    def margins1(self, C: float, a: float) -> np.ndarray:
        return (self.H + C * self.m) / a + a / (8 * math.pi) * self.m * self.G - self.L

    def margins2(self, C: float) -> np.ndarray:
        return self.m * self.F / (2 * math.pi) + C * self.m - self.H

    def min_margin(self, C: float, a_grid) -> float:
        vals = [self.margins2(C).min()] + [self.margins1(C, a).min() for a in a_grid]
        return float(min(vals))


def member_terms(family: TestFunctionFamily) -> MemberTerms:
    grid = family.grid
    cols = {k: [] for k in "LHmGF"}
    for phi, psi in family:
        m = integrate(grid, psi)
        gphi = grad_neumann(grid, phi)
        cols["L"].append(integrate(grid, phi * (psi - m)))
        cols["H"].append(relative_entropy(grid, psi))
        cols["m"].append(m)
        cols["G"].append(face_inner(grid, gphi, gphi))
        cols["F"].append(fisher_information(grid, psi))
    return MemberTerms(*(np.array(cols[k]) for k in "LHmGF"))


def bisect_constant(terms: MemberTerms, a_grid, tol: float = 1e-6, which: str = "both") -> float:
    """Smallest C >= 0 with every margin nonnegative, to absolute tolerance ``tol``."""

    def ok(C):
        if which == "ineq2":
            return terms.margins2(C).min() >= 0
        if which == "ineq1":
            return min(terms.margins1(C, a).min() for a in a_grid) >= 0
        return terms.min_margin(C, a_grid) >= 0

    if ok(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while not ok(hi):
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            raise RuntimeError("no finite constant satisfies the family")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass
class CalibrationResult:
    K1_est: float
    C_est: float
    family: str
    worst_member: int
    worst_K1_member: int
    a_grid: tuple
    skipped: int = 0
    clamped: list = field(default_factory=list)
    min_margin1: float = 0.0
    min_margin2: float = 0.0
    max_jensen: float = 0.0

    @property
    def bound_constant(self) -> float:
        """Constant used downstream in the n log n and velocity-energy bounds.

        The derivation produces ln(K1 / |Omega|); the calibrated C_est is the
        empirical minimum.  The larger of the two is valid for both uses.
        """
        return max(self.C_est, math.log(self.K1_est))

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"K1_est = {self.K1_est!r}\n")
            fh.write(f"C_est = {self.C_est!r}\n")
            fh.write(f"bound_constant = {self.bound_constant!r}\n")
            fh.write(f"family = {self.family}\n")
            fh.write(f"worst_member = {self.worst_member}\n")
            fh.write(f"worst_K1_member = {self.worst_K1_member}\n")
            fh.write(f"a_grid = {', '.join(repr(a) for a in self.a_grid)}\n")
            fh.write(f"skipped = {self.skipped}\n")
            fh.write(f"clamped = {', '.join(str(k) for k in self.clamped)}\n")
            fh.write(f"min_margin1 = {self.min_margin1!r}\n")
            fh.write(f"min_margin2 = {self.min_margin2!r}\n")
            fh.write(f"max_jensen = {self.max_jensen!r}\n")

    @classmethod
    def read(cls, path) -> "CalibrationResult":
        kv = {}
        with open(path) as fh:
            for line in fh:
                if "=" in line:
                    k, _, v = line.partition("=")
                    kv[k.strip()] = v.strip()
        return cls(
            K1_est=float(kv["K1_est"]),
            C_est=float(kv["C_est"]),
            family=kv["family"],
            worst_member=int(kv["worst_member"]),
            worst_K1_member=int(kv["worst_K1_member"]),
            a_grid=tuple(float(a) for a in kv["a_grid"].split(",")),
            skipped=int(kv["skipped"]),
            clamped=[int(k) for k in kv["clamped"].split(",") if k.strip()],
            min_margin1=float(kv["min_margin1"]),
            min_margin2=float(kv["min_margin2"]),
            max_jensen=float(kv["max_jensen"]),
        )

    def passed(self, jensen_tol: float = 1e-12) -> bool:
        return (
            math.isfinite(self.C_est)
            and self.K1_est >= 1.0
            and self.min_margin1 >= 0
            and self.min_margin2 >= 0
            and self.max_jensen <= jensen_tol
        )


def calibrate_C(family: TestFunctionFamily, a_grid=DEFAULT_A_GRID, tol: float = 1e-6) -> CalibrationResult:
    a_grid = tuple(float(a) for a in a_grid)
    terms = member_terms(family)
    C = bisect_constant(terms, a_grid, tol)
    per_member = np.minimum.reduce([terms.margins2(C)] + [terms.margins1(C, a) for a in a_grid])
    raw = raw_mt_check(family)
    grid = family.grid
    jensen = max(jensen_check(grid, psi) for _, psi in family)
    return CalibrationResult(
        K1_est=raw.K1_est,
        C_est=C,
        family=family.describe(),
        worst_member=int(np.argmin(per_member)),
        worst_K1_member=raw.worst_index,
        a_grid=a_grid,
        skipped=raw.skipped,
        clamped=raw.clamped,
        min_margin1=float(min(terms.margins1(C, a).min() for a in a_grid)),
        min_margin2=float(terms.margins2(C).min()),
        max_jensen=float(jensen),
    )
