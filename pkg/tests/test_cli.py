import subprocess
import sys

import pytest

from chns.cli import CALIBRATION_FILE, main

SMALL = "nx = 16\nny = 16\nT = 0.1\nmt_count = 40\nmt_grid = 16\nsnapshot_interval = 5\n"
WEAK = SMALL + "weak_levels = 16, 32, 64\nweak_T = 0.05\nweak_dt = 0.005\n"


@pytest.fixture()
def cfg(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(SMALL)
    return p


def test_simulate_then_report(tmp_path, cfg, capsys):
    out = tmp_path / "out"
    assert main(["simulate", str(cfg), "--out", str(out)]) == 0
    for name in (CALIBRATION_FILE, "diagnostics.csv", "report.txt", "run-manifest.txt", "snapshots/manifest.txt"):
        assert (out / name).exists(), name
    report = (out / "report.txt").read_text()
    assert "nlogn_bound" in report and "K1_source" in report
    capsys.readouterr()
    assert main(["report", str(out)]) == 0
    assert "OVERALL PASS" in capsys.readouterr().out
    assert (out / "summary.txt").exists()


def test_simulate_reuses_calibration(tmp_path, cfg):
    out = tmp_path / "o"
    out.mkdir()
    (out / CALIBRATION_FILE).write_text(
        "K1_est = 3.0\nC_est = 0.5\nfamily = x\nworst_member = 0\nworst_K1_member = 0\na_grid = 1.0\n"
        "skipped = 0\nclamped = \nmin_margin1 = 0.0\nmin_margin2 = 0.0\nmax_jensen = -1.0\n"
    )
    main(["simulate", str(cfg), "--out", str(out)])
    assert "# K1 = 1.0986" in (out / "report.txt").read_text()


def test_mt_check(tmp_path, cfg, capsys):
    assert main(["mt-check", str(cfg), "--out", str(tmp_path)]) == 0
    assert "C_est" in capsys.readouterr().out


def test_weak_check_replays(tmp_path):
    p = tmp_path / "w.cfg"
    p.write_text(WEAK)
    traj = tmp_path / "traj"
    assert main(["weak-check", str(p), str(traj), "--out", str(tmp_path)]) in (0, 1)
    first = (tmp_path / "weakform.csv").read_bytes()
    assert any(traj.iterdir())
    main(["weak-check", str(p), str(traj), "--out", str(tmp_path)])
    assert (tmp_path / "weakform.csv").read_bytes() == first


def test_eps_study(tmp_path):
    p = tmp_path / "e.cfg"
    p.write_text(SMALL + "eps_list = 0.4, 0.2, 0.1\n")
    code = main(["eps-study", str(p), "--out", str(tmp_path)])
    assert code in (0, 1)
    text = (tmp_path / "eps-study.csv").read_text()
    assert text.count("member,") == 3 and "uniform_integrability" in text


def test_bad_config_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("nx = 1\n")
    assert main(["simulate", str(p), "--out", str(tmp_path)]) == 2
    assert "line 1" in capsys.readouterr().err
    assert main(["simulate", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)]) == 2


def test_report_empty_dir_exit_3(tmp_path, capsys):
    assert main(["report", str(tmp_path)]) == 3
    assert "no results" in capsys.readouterr().err


def test_truncated_run_exit_3(tmp_path):
    p = tmp_path / "t.cfg"
    p.write_text(SMALL + "poisson_tol = 1e-20\npoisson_max_iter = 2\n")
    assert main(["simulate", str(p), "--out", str(tmp_path)]) == 3


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "chns", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "eps-study" in r.stdout
