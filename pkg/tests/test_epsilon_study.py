import math

import numpy as np
import pytest

from chns.config import RunConfig
from chns.epsilon_study import (
    CadenceMismatch,
    CauchyTable,
    EpsFamilyConfig,
    _trapezoid,
    cauchy_table,
    entropy_integral,
    run_family,
    study,
    worker_count,
)

BASE = RunConfig(nx=16, ny=16, T=0.1, dt=5e-3, snapshot_interval=2)


def test_family_validation():
    with pytest.raises(ValueError):
        EpsFamilyConfig((0.1, 0.2), BASE, 0.1)
    with pytest.raises(ValueError):
        EpsFamilyConfig((), BASE, 0.1)
    with pytest.raises(ValueError):
        EpsFamilyConfig((0.1,), BASE, 0.0)
    cfg = EpsFamilyConfig.from_run_config(BASE)
    assert cfg.eps_list == BASE.eps_list and cfg.member_config(0.05).eps == 0.05


def test_worker_count(monkeypatch):
    monkeypatch.delenv("CHNS_THREADS", raising=False)
    assert worker_count(4) == 4
    monkeypatch.setenv("CHNS_THREADS", "2")
    assert worker_count(4) == 2
    monkeypatch.setenv("CHNS_THREADS", "lots")
    assert worker_count(3) == 3


def test_trapezoid_truncates_at_T():
    t = np.linspace(0, 1, 11)
    assert _trapezoid(t, t, 0.5) == pytest.approx(0.125)


def test_threads_do_not_change_results():
    cfg = EpsFamilyConfig((0.2, 0.1), BASE, 0.1)
    serial = run_family(cfg, threads=1)
    parallel = run_family(cfg, threads=2)
    for a, b in zip(serial, parallel):
        np.testing.assert_array_equal(a.trajectory.snapshots[-1].n, b.trajectory.snapshots[-1].n)


def test_identical_members_have_zero_distance():
    m = run_family(EpsFamilyConfig((0.1,), BASE, 0.1), threads=1)[0].trajectory
    tab = cauchy_table([m, m], 0.1)
    assert all(v == 0.0 for v in tab.rows[0][2].values())


def test_cadence_mismatch():
    a = run_family(EpsFamilyConfig((0.1,), BASE, 0.1), threads=1)[0].trajectory
    b = run_family(EpsFamilyConfig((0.1,), BASE.replace(snapshot_interval=3), 0.1), threads=1)[0].trajectory
    with pytest.raises(CadenceMismatch):
        cauchy_table([a, b], 0.1)


def test_entropy_integral_of_uniform_density_vanishes():
    cfg = BASE.replace(initial="uniform", n_bar=2.0, c_bar=0.5)
    tr = run_family(EpsFamilyConfig((0.1,), cfg, 0.1), threads=1)[0].trajectory
    assert abs(entropy_integral(tr, 0.1)) < 1e-14


def test_failed_members_are_reported(monkeypatch):
    import chns.epsilon_study as es

    real = es.run

    def flaky(cfg):
        if cfg.eps == 0.1:
            raise RuntimeError("boom")
        return real(cfg)

    monkeypatch.setattr(es, "run", flaky)
    res = study(EpsFamilyConfig((0.2, 0.1), BASE, 0.1), K1=2.0, threads=2)
    assert res.failed_members == [0.1]
    assert "boom" in res.members[1].error
    assert res.members[0].trajectory is not None
    assert res.table is None and not res.passed()


def test_small_study_and_csv(tmp_path):
    res = study(EpsFamilyConfig((0.4, 0.2, 0.1), BASE, 0.1), K1=2.0, threads=1)
    assert not res.failed_members
    assert len(res.table.rows) == 2
    assert res.table.ui_value <= res.table.ui_bound
    p = tmp_path / "e.csv"
    res.table.write_csv(p)
    back = CauchyTable.read_csv(p)
    assert back.rows == res.table.rows
    assert back.ui_value == res.table.ui_value and math.isfinite(back.ui_bound)
