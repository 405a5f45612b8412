import numpy as np
import pytest

from tsinterp.errors import NonFiniteState
from tsinterp.rk5 import rk5_integrate, rk5_step


def test_step_exact_on_quartic():
    # A 5th-order method integrates dy/dt = t^4 (as an autonomous augmented
    # system) exactly: y(1) = 1/5.
    def f(s):
        return np.array([s[1] ** 4, 1.0])

    y = np.array([0.0, 0.0])
    for _ in range(10):
        y = rk5_step(f, y, 0.1)
    assert abs(y[0] - 0.2) < 1e-12
    assert abs(y[1] - 1.0) < 1e-12


def test_convergence_order_on_decay():
    # log-log error slope for dy/dt = -y over a halving dt sequence.
    errors = []
    dts = [0.1, 0.05, 0.025]
    for dt in dts:
        n = round(1.0 / dt)
        traj = rk5_integrate(lambda y: -y, np.array([1.0]), dt, n)
        errors.append(abs(traj[0, -1] - np.exp(-1.0)))
    slopes = np.diff(np.log(errors)) / np.diff(np.log(dts))
    assert 4.5 <= slopes.mean() <= 5.5


def test_integrate_shape_and_first_column():
    traj = rk5_integrate(lambda y: -y, np.array([1.0, 2.0]), 0.01, 7)
    assert traj.shape == (2, 7)
    # column 0 is the state after one step, not the initial condition
    one_step = rk5_step(lambda y: -y, np.array([1.0, 2.0]), 0.01)
    assert np.allclose(traj[:, 0], one_step)
    assert not np.allclose(traj[:, 0], [1.0, 2.0])


def test_non_finite_state_raises():
    with np.errstate(over="ignore", invalid="ignore"), pytest.raises(NonFiniteState):
        rk5_integrate(lambda y: y**3, np.array([5.0]), 0.5, 100)


def test_deterministic():
    a = rk5_integrate(lambda y: -y, np.array([1.0]), 0.02, 50)
    b = rk5_integrate(lambda y: -y, np.array([1.0]), 0.02, 50)
    assert np.array_equal(a, b)
