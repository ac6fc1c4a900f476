"""End-to-end acceptance battery; each test prints one PASS/FAIL line."""

import filecmp
import math
import time

import numpy as np
import pytest

from chns.cli import a_grid, main
from chns.config import RunConfig
from chns.diagnostics import (
    POINCARE_SQUARE,
    check_c_monotone,
    check_energy_u,
    check_energy_u_g,
    check_grad_c_budget,
    check_grad_n_budget,
    check_mass,
    check_nlogn,
    energy_constants,
    nlogn_pointwise_margins,
)
from chns.epsilon_study import PAIR_COLUMNS, EpsFamilyConfig, study
from chns.solver import run
from chns.trudinger_moser import TestFunctionFamily, calibrate_C
from chns.weakform import heat_config, weak_suite

BATTERY_START = time.perf_counter()
CONFIG = RunConfig()


@pytest.fixture()
def verdict(capsys):
    def emit(label, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        assert ok, f"{label}: {detail}"

    return emit


@pytest.fixture(scope="module")
def timed_run():
    t0 = time.perf_counter()
    traj = run(CONFIG)
    return traj, time.perf_counter() - t0


@pytest.fixture(scope="module")
def calibrations():
    t0 = time.perf_counter()
    grid_a = a_grid(CONFIG)
    base = calibrate_C(TestFunctionFamily(CONFIG.seed, 1000, CONFIG.mt_kind, CONFIG.mt_grid), grid_a)
    elapsed = time.perf_counter() - t0
    doubled = calibrate_C(TestFunctionFamily(CONFIG.seed, 2000, CONFIG.mt_kind, CONFIG.mt_grid), grid_a)
    return base, doubled, elapsed


@pytest.fixture(scope="module")
def K1(calibrations):
    return calibrations[0].bound_constant


def S0(traj):
    return traj.model.S0(traj.series.initial["c0_max"])


def test_01_mass_conservation(timed_run, verdict):
    traj, elapsed = timed_run
    r = check_mass(traj.series, 1e-10)
    ok = not traj.truncated and r.lhs <= 1e-10 and elapsed <= 120
    verdict("1 mass conservation", ok, f"max relative drift {r.lhs:.3e} (<= 1e-10), runtime {elapsed:.1f}s (<= 120s)")


def test_02_attractant_norms_nonincreasing(timed_run, verdict):
    traj, _ = timed_run
    res = [check_c_monotone(traj.series, p, 1e-10) for p in (1, 2, "inf")]
    ok = all(r.passed for r in res)
    verdict("2 attractant Lp monotone", ok, ", ".join(f"{r.name} worst growth {r.lhs:.2e}" for r in res))


def test_03_gradient_budget_and_heat_identity(timed_run, verdict):
    traj, _ = timed_run
    r = check_grad_c_budget(traj.series)
    heat = run(heat_config(CONFIG))
    row = heat.series.rows[-1]
    lhs = 0.5 * row["c_L2"] ** 2 + row["D_c"]
    rhs = 0.5 * heat.series.initial["c0_sq"]
    rel = abs(lhs - rhs) / rhs
    ok = r.margin > 0 and rel <= 0.01
    verdict("3 attractant gradient budget", ok,
            f"D_c {r.lhs:.4e} <= {r.rhs:.4e}; heat energy identity relative error {rel:.2e} (<= 1e-2)")


def test_04_weighted_density_budget(timed_run, verdict):
    traj, _ = timed_run
    r = check_grad_n_budget(traj.series, S0(traj))
    verdict("4 weighted density gradient budget", r.margin > 0, f"D_n {r.lhs:.4e} <= {r.rhs:.4e}")


def test_05_exponential_integrability_suite(calibrations, verdict):
    base, doubled, elapsed = calibrations
    drift = abs(doubled.C_est - base.C_est) / base.C_est
    ok = (
        math.isfinite(base.C_est)
        and drift <= 0.05
        and base.min_margin1 >= 0
        and base.min_margin2 >= 0
        and base.max_jensen <= 1e-12
        and elapsed <= 300
    )
    verdict("5 calibrated constant", ok,
            f"C_est {base.C_est:.6f}, doubled family {doubled.C_est:.6f} (drift {drift:.2e}), "
            f"margins {base.min_margin1:.2e}/{base.min_margin2:.2e}, jensen {base.max_jensen:.2e}, "
            f"runtime {elapsed:.1f}s")


def test_06_entropy_bound(timed_run, K1, verdict):
    traj, _ = timed_run
    pointwise = nlogn_pointwise_margins(traj.series, K1)
    r = check_nlogn(traj.series, K1, CONFIG.T, S0(traj))
    ok = bool(np.all(pointwise >= 0)) and r.passed
    verdict("6 entropy bound", ok,
            f"min pointwise margin {pointwise.min():.4e} over {len(pointwise)} times; "
            f"integral {r.lhs:.4e} <= {r.rhs:.4e}")


def test_07_velocity_energy(timed_run, K1, verdict):
    traj, _ = timed_run
    s = traj.series
    pot = traj.model.potential
    consts = energy_constants(s, K1, pot.grad_sup, pot.hessian_sup, CONFIG.T)
    # independent assembly of the constants
    mass1 = s.initial["mass"] + 1.0
    Cp = 1.0 / (math.pi * math.sqrt(2.0))
    K2 = 2 * pot.grad_sup**2 + 2 * pot.hessian_sup**2 * Cp**2
    K3 = 8 * math.pi / (2 * K2) / mass1
    K4 = s.rows[-1]["int_E"]
    K5 = 2 / K3 * (K4 + K1 * CONFIG.T * mass1)
    exact = (
        consts.Cp == POINCARE_SQUARE
        and math.isclose(consts.Cp, Cp, rel_tol=1e-15)
        and math.isclose(consts.K5, K5, rel_tol=1e-12)
    )
    lhs_t = s.column("K") + s.column("D_u")
    every_time = bool(np.all(lhs_t <= s.initial["u0_sq"] + K5))
    ok = exact and every_time and check_energy_u(s, consts).passed and check_energy_u_g(s, consts).passed
    verdict("7 velocity energy", ok, f"max K + D_u {lhs_t.max():.4e} <= {s.initial['u0_sq'] + K5:.4e} (K5 {K5:.4e})")


def test_08_weak_form(verdict):
    coupled, heat = weak_suite(CONFIG)
    # tests orthogonal to the heat data give round-off residuals; they carry no order
    live = [t for t in heat.tests() if np.abs(heat.series(t)).max() > heat.atol]
    silent_exact = all(np.abs(heat.series(t)).max() <= heat.atol for t in heat.tests() if t not in live)
    min_order = min(float(heat.orders(t).min()) for t in live)
    gap_rows = [row for t in coupled.tests() if coupled.kinds[t] == "ln_n" for row in coupled.row_verdicts(t)]
    ok = heat.passed() and silent_exact and len(live) >= 5 and min_order >= 1.0 and coupled.passed()
    verdict("8 weak-form residuals", ok,
            f"heat min observed order {min_order:.2f} (>= 1) over {len(live)} tests; coupled rows all pass: {coupled.passed()} "
            f"({len(gap_rows)} gap rows, worst gap/tol "
            f"{min(v / tol for _, v, tol, _ in gap_rows):.2f})")


def test_09_eps_family(K1, verdict):
    cfg = EpsFamilyConfig(CONFIG.eps_list, CONFIG.replace(nx=64, ny=64), 0.5)
    t0 = time.perf_counter()
    res = study(cfg, K1)
    elapsed = time.perf_counter() - t0
    assert len(cfg.eps_list) == 4 and res.table is not None
    # constants built from the data alone must not depend on eps
    eps_free = True
    for name in ("grad_c_budget", "grad_n_budget", "nlogn_bound"):
        eps_free &= len({e.rhs for r in res.reports.values() for e in r.entries if e.name == name}) == 1
    for key in ("K1", "K2", "K3"):
        eps_free &= len({e.constants[key] for r in res.reports.values() for e in r.entries
                         if e.name == "u_energy"}) == 1
    mono = {k: res.table.monotone(k) for k in PAIR_COLUMNS}
    ok = res.passed() and eps_free and all(mono.values()) and elapsed <= 600
    verdict("9 eps family", ok,
            f"members pass {all(r.passed for r in res.reports.values())}, eps-free bounds {eps_free}, "
            f"monotone {mono}, UI {res.table.ui_value:.4e} <= {res.table.ui_bound:.4e}, runtime {elapsed:.1f}s")


def test_10_determinism(tmp_path, verdict):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text("eps_list = 0.2, 0.1, 0.05\nT = 0.5\n")
    outs = []
    for k in range(2):
        out = tmp_path / f"out{k}"
        assert main(["simulate", str(cfg_path), "--out", str(out)]) == 0
        assert main(["eps-study", str(cfg_path), "--out", str(out)]) == 0
        assert main(["weak-check", str(cfg_path), str(tmp_path / f"traj{k}"), "--out", str(out)]) == 0
        outs.append(out)
    files = ["diagnostics.csv", "eps-study.csv", "weakform.csv", "mt-calibration.txt", "report.txt"]
    same = {f: filecmp.cmp(outs[0] / f, outs[1] / f, shallow=False) for f in files}
    total = time.perf_counter() - BATTERY_START
    ok = all(same.values()) and total <= 1800
    verdict("10 determinism", ok, f"identical outputs {same}, battery runtime {total:.1f}s (<= 1800s)")
