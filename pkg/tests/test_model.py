import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chns.model import (
    Consumption,
    CutoffFamily,
    Model,
    Potential,
    Sensitivity,
    boundary_bump,
    eval_f,
    eval_S,
    eval_S_eps,
    smooth_step,
)


def test_smooth_step_plateaus():
    np.testing.assert_array_equal(smooth_step([-3.0, 0.0, 1.0]), [1.0, 1.0, 1.0])
    np.testing.assert_array_equal(smooth_step([2.0, 5.0]), [0.0, 0.0])
    assert smooth_step(1.5) == pytest.approx(0.5)


@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_smooth_step_monotone(s, t):
    lo, hi = min(s, t), max(s, t)
    assert smooth_step(lo) >= smooth_step(hi)


def test_cutoffs():
    cut = CutoffFamily(0.1)
    assert cut.rho(0.05, 0.5) == 0.0
    assert cut.rho(0.5, 0.5) == 1.0
    assert cut.chi(5.0) == 1.0
    assert cut.chi(25.0) == 0.0
    with pytest.raises(ValueError):
        CutoffFamily(1.0)


def test_boundary_bump():
    assert boundary_bump(0.0) == 1.0
    assert boundary_bump(1.0) == 0.0
    assert 0 < boundary_bump(0.5) < 1


def test_sensitivity_matrix():
    m = Model(Sensitivity(2.0, 0.5, 0.1))
    S = eval_S(m, (0.0, 0.5), 1.0, 1.0)
    np.testing.assert_allclose(S, [[2.0, -0.5], [0.5, 2.0]])
    # rotation part vanishes away from the wall
    np.testing.assert_allclose(eval_S(m, (0.5, 0.5), 1.0, 1.0), 2.0 * np.eye(2))
    assert m.S0(1.0) == pytest.approx(math.sqrt(2) * 2.5)
    # |S| <= S0
    assert np.linalg.norm(S, 2) <= m.S0(1.0)


def test_regularized_sensitivity_vanishes_at_wall():
    m = Model()
    np.testing.assert_array_equal(eval_S_eps(m, 0.1, (0.01, 0.5), 1.0, 1.0), np.zeros((2, 2)))


def test_negative_arguments_rejected():
    m = Model()
    with pytest.raises(ValueError):
        eval_S(m, (0.5, 0.5), -1.0, 0.0)
    with pytest.raises(ValueError):
        eval_f(m, -0.1)


def test_consumption_kinds():
    assert eval_f(Model(), 2.0) == 2.0
    assert eval_f(Model(consumption=Consumption("saturating")), 1.0) == 0.5
    assert eval_f(Model(consumption=Consumption("zero")), 3.0) == 0.0
    assert Consumption("saturating").rate(0.0) == 1.0
    with pytest.raises(ValueError):
        Consumption("cubic")


def test_potential_bounds():
    assert Potential("gravity").grad_sup == 1.0
    assert Potential("gravity").hessian_sup == 0.0
    wavy = Potential("gravity_wavy", 0.1)
    assert wavy.hessian_sup == pytest.approx(0.1 * math.pi**2)
    assert wavy.grad_sup == pytest.approx(math.hypot(0.1 * math.pi, 1.0))
    assert Potential("flat").value(0.3, 0.7) == 0.0
