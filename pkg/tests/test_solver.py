import math

import numpy as np
import pytest

from chns.config import RunConfig
from chns.domain import Grid, VectorField, divergence, integrate
from chns.model import Model
from chns.solver import (
    State,
    StepControl,
    TimestepTooLarge,
    cfl_dt,
    curl_velocity,
    run,
    transport_c,
    transport_n,
)


def test_curl_velocity_divergence_free():
    g = Grid(20, 16)
    u = curl_velocity(g, lambda x, y: np.sin(3 * x) * np.cos(2 * y) * x * (1 - x) * y * (1 - y))
    assert np.abs(divergence(g, u)).max() < 1e-12


def test_cfl_examples():
    g = Grid(10, 10)
    m = Model()
    st = State(0.0, np.ones(g.shape), np.zeros(g.shape), VectorField.zeros(g), g.zeros())
    # nothing moves: the cap applies
    assert cfl_dt(g, m, st, 0.1, StepControl(dt=1e-2)) == 1e-2
    # explicit diffusion: cfl * h^2 / 4
    assert cfl_dt(g, m, st, 0.1, StepControl(dt=1.0, theta=0.0)) == pytest.approx(0.25 * 0.01 / 4)
    u = VectorField.zeros(g)
    u.u1[5, :] = 2.0
    st.u = u
    assert cfl_dt(g, m, st, 0.1, StepControl(dt=1.0)) == pytest.approx(0.25 * 0.1 / 2.0)


def test_step_control_validation():
    with pytest.raises(ValueError):
        StepControl(dt=0.0)
    with pytest.raises(ValueError):
        StepControl(theta=1.5)


def test_transport_n_rejects_undershoot():
    g = Grid(16, 16)
    m = Model()
    n = g.sample(lambda x, y: np.exp(-50 * ((x - 0.5) ** 2 + (y - 0.5) ** 2)))
    c = g.sample(lambda x, y: 10 * x)
    u = VectorField.zeros(g)
    with pytest.raises(TimestepTooLarge):
        transport_n(g, m, n, c, u, 0.1, dt=1.0, theta=0.0)


def test_transport_c_max_principle():
    g = Grid(16, 16)
    m = Model()
    rng = np.random.default_rng(0)
    c = rng.uniform(0, 1, g.shape)
    n = rng.uniform(0, 2, g.shape)
    out = transport_c(g, m, c, n, VectorField.zeros(g), 1e-3)
    assert out.min() >= 0 and out.max() <= c.max()
    assert integrate(g, out) <= integrate(g, c)


def test_consumption_ode_decay():
    cfg = RunConfig(nx=8, ny=8, T=0.1, dt=1e-3, initial="uniform", n_bar=1.0, c_bar=1.0)
    tr = run(cfg)
    assert len(tr.series) == 101
    c = tr.snapshots[-1].c
    assert np.abs(c - math.exp(-0.1)).max() <= 1e-4
    # uniform buoyancy is a gradient and must not stir the fluid
    assert tr.snapshots[-1].u.max_abs() < 1e-10


def test_heat_mode_decay_rate():
    cfg = RunConfig(nx=32, ny=32, T=0.1, dt=1e-3, a0=0.0, beta0=0.0, consumption="zero", potential="flat",
                    initial="heat", snapshot_interval=10)
    tr = run(cfg)
    mode = tr.grid.sample(lambda x, y: np.cos(np.pi * x) + 0 * y)
    amps = np.array([integrate(tr.grid, s.c * mode) for s in tr.snapshots])
    rate = -np.polyfit(tr.times, np.log(amps), 1)[0]
    assert rate == pytest.approx(math.pi**2, rel=0.01)


def test_splitting_first_order():
    sols = []
    for dt in (0.01, 0.005, 0.0025):
        cfg = RunConfig(nx=16, ny=16, T=0.2, dt=dt, cfl=0.5, initial="vortex", vortex_amp=0.5)
        sols.append(run(cfg).snapshots[-1])
    g = Grid(16, 16)
    e1 = math.sqrt(integrate(g, (sols[0].n - sols[1].n) ** 2))
    e2 = math.sqrt(integrate(g, (sols[1].n - sols[2].n) ** 2))
    assert 0.8 <= math.log2(e1 / e2) <= 1.2


def test_default_run_properties(default_run):
    assert not default_run.truncated
    last = default_run.snapshots[-1]
    assert last.t == 1.0
    assert last.n.min() >= 0 and last.c.min() >= 0
    assert np.abs(divergence(default_run.grid, last.u)).max() < 1e-8
    assert last.u.boundary_normal_max() == 0.0
