import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate
from scipy.integrate import solve_ivp

from invpress import Box, ControlSignal, LinearSystem, numerics
from invpress.errors import InputError
from invpress.oracle import SearchParams
from invpress.system import (
    Extension,
    Verdict,
    check_admissible,
    conjugate,
    sample_times,
    simulate,
    solve,
    trajectory,
    trajectory_in,
)


def test_linear_system_validation():
    s = LinearSystem([[1.0]], [1.0], [(-1.0, 1.0)])
    assert s.B.shape == (1, 1)
    with pytest.raises(InputError):
        LinearSystem([[1.0, 0.0]], [[1.0]], [(-1.0, 1.0)])
    with pytest.raises(InputError):
        LinearSystem([[1.0]], [[1.0]], [(0.0, 1.0)])  # 0 must be interior
    with pytest.raises(InputError):
        LinearSystem([[1.0]], [[1.0], [2.0]], [(-1.0, 1.0)])


def test_control_signal_extensions():
    w = ControlSignal(0.5, [1.0, 2.0, 3.0])
    assert w.value(10)[0] == 3.0
    p = ControlSignal(0.5, [1.0, 2.0, 3.0], Extension.PERIODIC)
    assert p.value(4)[0] == 2.0
    assert np.array_equal(p.steps(5)[:, 0], [1, 2, 3, 1, 2])
    assert np.array_equal(p.shift(1).values[:, 0], [2, 3, 1])
    assert w.concat(w).n_steps == 6
    with pytest.raises(InputError):
        ControlSignal(0.0, [1.0])


def test_scalar_solution_closed_form(scalar):
    # x' = x + u with constant u: x(t) = e^t x0 + (e^t - 1) u
    w = ControlSignal.constant([0.3], dt=0.1)
    for t in (0.0, 0.05, 0.73, 2.0):
        ref = np.exp(t) * 0.2 + (np.exp(t) - 1) * 0.3
        assert solve(scalar, [0.2], w, t)[0] == pytest.approx(ref, rel=1e-12)


def test_simulate_matches_ode_solver(pendulum):
    rng = np.random.default_rng(3)
    vals = rng.uniform(-1, 1, size=(8, 1))
    dt = 0.25
    x0 = np.array([0.1, -0.2])
    ts = sample_times(2.0, 0.1)
    xs = simulate(pendulum, x0, vals, dt, ts)

    def rhs(t, x):
        k = min(int(t / dt), 7)
        return pendulum.A @ x + pendulum.B @ vals[k]

    sol = solve_ivp(rhs, (0, 2.0), x0, t_eval=ts, rtol=1e-11, atol=1e-12, max_step=0.01)
    assert np.max(np.abs(xs - sol.y.T)) < 1e-7


def test_simulate_batched_agrees_with_single(pendulum):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(2, 4))
    U = rng.uniform(-1, 1, size=(5, 1, 4))
    ts = [0.0, 0.3, 1.0]
    batched = simulate(pendulum, X, U, 0.2, ts)
    for p in range(4):
        single = simulate(pendulum, X[:, p], U[:, :, p], 0.2, ts)
        assert np.allclose(batched[:, :, p], single, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.05, 1.5))
def test_superposition(a, b, t):
    sys = LinearSystem([[0.3, 1.0], [-0.5, -0.2]], [[1.0], [0.5]], [(-1.0, 1.0)])
    w = ControlSignal(0.1, np.linspace(-1, 1, 10))
    zero = ControlSignal.constant([0.0], 0.1)
    full = solve(sys, [a, b], w, t)
    split = solve(sys, [a, b], zero, t) + solve(sys, [0.0, 0.0], w, t)
    assert np.allclose(full, split, atol=1e-12)


def test_sample_times_include_endpoint():
    ts = sample_times(1.0, 0.3)
    assert ts[0] == 0.0 and ts[-1] == 1.0
    assert np.all(np.diff(ts) <= 0.3 + 1e-15)


def test_trajectory_in(scalar):
    Q = Box([-1.0], [1.0])
    hold = ControlSignal.constant([0.0], 0.25)
    assert trajectory_in(scalar, [0.0], hold, 5.0, Q)
    assert not trajectory_in(scalar, [0.5], hold, 5.0, Q)
    # u = -x0 holds the equilibrium
    assert trajectory_in(scalar, [0.5], ControlSignal.constant([-0.5], 0.25), 5.0, Q)
    with pytest.raises(InputError):
        trajectory_in(scalar, [0.0], hold, 1.0, Q, delta=0.5)


def test_trajectory_shapes(pendulum):
    ts, xs = trajectory(pendulum, [0.0, 0.0], ControlSignal.constant([0.1], 0.5), 1.0)
    assert xs.shape == (ts.size, 2)


def test_conjugate_diagonalizes_pendulum(pendulum, pendulum_T):
    c = conjugate(pendulum, pendulum_T)
    assert np.allclose(c.A, np.diag([-1.0, 1.0]), atol=1e-14)
    assert np.allclose(c.B[:, 0], [0.5, 0.5])
    with pytest.raises(InputError):
        conjugate(pendulum, np.zeros((2, 2)))


def test_conjugate_maps_trajectories(pendulum, pendulum_T):
    c = conjugate(pendulum, pendulum_T)
    w = ControlSignal(0.2, [0.5, -0.3, 0.9])
    x = solve(pendulum, [0.1, 0.2], w, 0.55)
    y = solve(c, pendulum_T @ [0.1, 0.2], w, 0.55)
    assert np.allclose(pendulum_T @ x, y, atol=1e-13)


def test_check_admissible(scalar):
    params = SearchParams(dt=0.25, N=3, grid=3)
    assert check_admissible(scalar, Box([-0.5], [0.5]), Box([-0.9], [0.9]), params) is Verdict.CONFIRMED
    # outside the control set no control can hold x0 = 1.5 in a box around it
    assert check_admissible(scalar, Box([1.5], [1.6]), Box([1.4], [1.7]), params) is Verdict.UNCONFIRMED


def test_step_matrices_match_expm(pendulum):
    Phi, G = pendulum.step_matrices(0.3)
    assert np.allclose(Phi, numerics.expm(pendulum.A, 0.3))
    s = np.linspace(0, 0.3, 3001)
    ref = integrate.trapezoid([numerics.expm(pendulum.A, si) @ pendulum.B for si in s], s, axis=0)
    assert np.allclose(G, ref, atol=1e-7)
