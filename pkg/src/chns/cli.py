"""Command line front end.

Exit codes: 0 all verdicts pass, 1 some verdict fails, 2 configuration
error, 3 runtime or solver error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config, parse_config
from .diagnostics import full_report
from .epsilon_study import EpsFamilyConfig, study
from .snapshots import SnapshotWriter, load_states
from .solver import Trajectory, run
from .diagnostics import POINCARE_SQUARE
from .domain import integrate
from .trudinger_moser import DEFAULT_A_GRID, CalibrationResult, TestFunctionFamily, calibrate_C
from .weakform import read_suite_verdicts, weak_suite, write_suite_csv

log = logging.getLogger("chns")

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

CALIBRATION_FILE = "mt-calibration.txt"
DIAGNOSTICS_FILE = "diagnostics.csv"
REPORT_FILE = "report.txt"
RUN_MANIFEST = "run-manifest.txt"
SNAPSHOT_DIR = "snapshots"
WEAKFORM_FILE = "weakform.csv"
EPS_FILE = "eps-study.csv"
SUMMARY_FILE = "summary.txt"


class CommandError(RuntimeError):
    """A runtime failure reported with exit code 3."""


def _load(path) -> RunConfig:
    if path is None:
        return parse_config("")
    return load_config(path)


def velocity_weight(config: RunConfig) -> float:
    """The weight a = K3 at which the velocity estimate applies the entropy inequality."""
    pot = config.model().potential
    K2 = 2 * pot.grad_sup**2 + 2 * pot.hessian_sup**2 * POINCARE_SQUARE**2
    if K2 == 0.0:
        return math.nan
    grid = config.grid()
    mass1 = integrate(grid, config.initial_data().state(grid).n) + 1.0
    return 8 * math.pi / (2 * K2) / mass1


def a_grid(config: RunConfig) -> tuple:
    k3 = velocity_weight(config)
    return DEFAULT_A_GRID if not math.isfinite(k3) else DEFAULT_A_GRID + (k3,)


def run_calibration(config: RunConfig) -> CalibrationResult:
    fam = TestFunctionFamily(config.seed, config.mt_count, config.mt_kind, config.mt_grid)
    return calibrate_C(fam, a_grid(config))


def calibration(config: RunConfig, out: Path) -> CalibrationResult:
    """Reuse the calibration stored in ``out`` or compute and store one."""
    path = out / CALIBRATION_FILE
    if path.exists():
        return CalibrationResult.read(path)
    log.info("no %s in %s, calibrating", CALIBRATION_FILE, out)
    res = run_calibration(config)
    res.write(path)
    return res


def cmd_simulate(config: RunConfig, out: Path, args) -> int:
    K1 = calibration(config, out).bound_constant
    writer = SnapshotWriter(out / SNAPSHOT_DIR, config.grid())
    traj = run(config, on_snapshot=writer)
    traj.series.write_csv(out / DIAGNOSTICS_FILE)
    report = full_report(traj.series, traj.model, K1, config.T, config.slack)
    report.notes["eps"] = repr(config.eps)
    report.notes["K1_source"] = f"{CALIBRATION_FILE} seed={config.seed} count={config.mt_count}"
    if traj.truncated:
        report.notes["truncated"] = traj.error
    report.write(out / REPORT_FILE)
    with open(out / RUN_MANIFEST, "w") as fh:
        fh.write(config.serialize())
        fh.write("# outputs\n")
        for name in (CALIBRATION_FILE, DIAGNOSTICS_FILE, REPORT_FILE, f"{SNAPSHOT_DIR}/manifest.txt"):
            fh.write(f"# {name}\n")
    for line in report.lines():
        print(line)
    if traj.truncated:
        raise CommandError(f"run truncated: {traj.error}")
    return EXIT_OK if report.passed else EXIT_VERDICT


def cmd_mt_check(config: RunConfig, out: Path, args) -> int:
    res = run_calibration(config)
    res.write(out / CALIBRATION_FILE)
    print(f"C_est {res.C_est!r} K1_est {res.K1_est!r} bound_constant {res.bound_constant!r}")
    print(f"min_margin1 {res.min_margin1!r} min_margin2 {res.min_margin2!r} max_jensen {res.max_jensen!r}")
    return EXIT_OK if res.passed() else EXIT_VERDICT


def _replaying_runner(root: Path):
    """Run each level once and store it under ``root``; replay on later calls."""
    counter = {"k": 0}

    def runner(cfg):
        k = counter["k"]
        counter["k"] += 1
        d = root / f"level_{k:02d}"
        stamp = d / "config.txt"
        text = cfg.serialize()
        if stamp.exists() and stamp.read_text() == text and (d / "manifest.txt").exists():
            grid, states = load_states(d)
            log.info("replaying %s (%d snapshots)", d, len(states))
            return Trajectory(grid, cfg.model(), cfg.eps, snapshots=states)
        d.mkdir(parents=True, exist_ok=True)
        for old in d.glob("snap_*.bin"):
            old.unlink()
        traj = run(cfg, keep_every_step=True, on_snapshot=SnapshotWriter(d, cfg.grid()))
        stamp.write_text(text)
        return traj

    return runner


def cmd_weak_check(config: RunConfig, out: Path, args) -> int:
    traj_dir = Path(args.trajectory_dir)
    traj_dir.mkdir(parents=True, exist_ok=True)
    coupled, heat = weak_suite(config, runner=_replaying_runner(traj_dir))
    write_suite_csv(out / WEAKFORM_FILE, [coupled, heat])
    for tab in (coupled, heat):
        for t in tab.tests():
            print(t, " ".join(repr(float(v)) for v in tab.series(t)),
                  "PASS" if all(ok for *_, ok in tab.row_verdicts(t)) else "FAIL")
    return EXIT_OK if coupled.passed() and heat.passed() else EXIT_VERDICT


def cmd_eps_study(config: RunConfig, out: Path, args) -> int:
    K1 = calibration(config, out).bound_constant
    fam = EpsFamilyConfig.from_run_config(config)
    res = study(fam, K1)
    if res.table is None:
        raise CommandError(f"eps family incomplete; failed members: {res.failed_members}")
    res.table.write_csv(out / EPS_FILE)
    with open(out / EPS_FILE, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for eps, rep in res.reports.items():
            w.writerow(["member", repr(eps), "diagnostics", "PASS" if rep.passed else "FAIL", len(rep.entries), ""])
    for hi, lo, d in res.table.rows:
        print(hi, lo, " ".join(f"{k}={v!r}" for k, v in d.items()))
    print(f"uniform_integrability {res.table.ui_value!r} bound {res.table.ui_bound!r}")
    return EXIT_OK if res.passed() else EXIT_VERDICT


# -- report -----------------------------------------------------------------

SECTIONS = (
    ("mass_conservation", "cell mass conservation"),
    ("c_monotone_L1", "attractant L1 decay"),
    ("c_monotone_L2", "attractant L2 decay"),
    ("c_monotone_Linf", "attractant Linf decay"),
    ("grad_c_budget", "attractant gradient budget"),
    ("grad_n_budget", "weighted density gradient budget"),
    ("nlogn_bound", "entropy bound"),
    ("u_energy", "velocity energy bound"),
    ("u_energy_g", "velocity energy bound, pointwise form"),
)


def _read_report(path: Path) -> dict:
    out = {}
    for line in path.read_text().splitlines():
        if line.startswith("#") or not line.strip():
            continue
        name, *_, verdict = line.split()
        out[name] = (line, verdict == "PASS")
    return out


def cmd_report(directory: Path) -> int:
    found = False
    lines = []
    ok = True
    if (directory / REPORT_FILE).exists():
        found = True
        entries = _read_report(directory / REPORT_FILE)
        lines.append("== a priori estimates (simulate) ==")
        for key, title in SECTIONS:
            if key in entries:
                line, passed = entries[key]
                ok &= passed
                lines.append(f"{title}: {'PASS' if passed else 'FAIL'}  [{line}]")
            else:
                ok = False
                lines.append(f"{title}: MISSING")
    if (directory / CALIBRATION_FILE).exists():
        found = True
        cal = CalibrationResult.read(directory / CALIBRATION_FILE)
        ok &= cal.passed()
        lines.append("== exponential-integrability calibration (mt-check) ==")
        lines.append(f"C_est {cal.C_est!r} K1_est {cal.K1_est!r} bound_constant {cal.bound_constant!r} "
                     f"max_jensen {cal.max_jensen!r}: {'PASS' if cal.passed() else 'FAIL'}")
    if (directory / WEAKFORM_FILE).exists():
        found = True
        rows = read_suite_verdicts(directory / WEAKFORM_FILE)
        failed = [r for r in rows if not r[5]]
        ok &= not failed
        lines.append("== generalized-solution identities (weak-check) ==")
        lines.append(f"{len(rows)} rows, {len(failed)} failing: {'PASS' if not failed else 'FAIL'}")
        for r in failed:
            lines.append(f"  FAIL {r[0]} level {r[2]} value {r[3]!r} tol {r[4]!r}")
    if (directory / EPS_FILE).exists():
        found = True
        lines.append("== regularization family (eps-study) ==")
        with open(directory / EPS_FILE, newline="") as fh:
            rows = list(csv.reader(fh))
        pairs = [r for r in rows[1:] if r[0] not in ("uniform_integrability", "member")]
        cols = rows[0][2:]
        for j, name in enumerate(cols):
            v = [float(r[2 + j]) for r in pairs]
            mono = all(a > b for a, b in zip(v, v[1:]))
            ok &= mono
            lines.append(f"{name} adjacent differences {' '.join(repr(x) for x in v)}: "
                         f"{'PASS' if mono else 'FAIL'}")
        for r in rows[1:]:
            if r[0] == "uniform_integrability":
                ok &= r[4] == "PASS"
                lines.append(f"uniform integrability {r[1]} <= {r[3]}: {r[4]}")
            elif r[0] == "member":
                ok &= r[3] == "PASS"
                lines.append(f"member eps={r[1]} diagnostics: {r[3]}")
    if not found:
        print(f"no results found in {directory}", file=sys.stderr)
        return EXIT_RUNTIME
    lines.append(f"OVERALL {'PASS' if ok else 'FAIL'}")
    text = "\n".join(lines) + "\n"
    (directory / SUMMARY_FILE).write_text(text)
    print(text, end="")
    return EXIT_OK if ok else EXIT_VERDICT


# -- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chns", description="Chemotaxis-Navier-Stokes simulator and estimate checks.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def with_out(sp):
        sp.add_argument("--out", default=".", help="output directory (default: current directory)")
        return sp

    s = with_out(sub.add_parser("simulate", help="run the solver and check the a priori estimates"))
    s.add_argument("config", nargs="?", help="key = value config file (default: all defaults)")
    s = with_out(sub.add_parser("mt-check", help="calibrate the exponential-integrability constant"))
    s.add_argument("config", nargs="?")
    s = with_out(sub.add_parser("weak-check", help="refinement study of the generalized-solution identities"))
    s.add_argument("config")
    s.add_argument("trajectory_dir", help="directory storing (and replaying) the level trajectories")
    s = with_out(sub.add_parser("eps-study", help="run the regularization family"))
    s.add_argument("config", nargs="?")
    s = sub.add_parser("report", help="summarize all results in a directory")
    s.add_argument("dir")
    return p


COMMANDS = {
    "simulate": cmd_simulate,
    "mt-check": cmd_mt_check,
    "weak-check": cmd_weak_check,
    "eps-study": cmd_eps_study,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "report":
        return cmd_report(Path(args.dir))
    try:
        config = _load(args.config)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](config, out, args)
    except (CommandError, RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
