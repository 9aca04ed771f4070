import math

import numpy as np
import pytest

from cbftk.cbf import ABC, RECBF, hocbf
from cbftk.core import ControlAffineSystem, LinearClassK, RelDeg2Output
from cbftk.safety_filter import SafetyFilterSpec
from cbftk.sim import SimulationError, compute_metrics, rk4_step, simulate
from cbftk.systems import PendulumParams, pendulum_dynamics, pendulum_scenario


def test_rk4_exponential_decay():
    x = rk4_step(lambda xs: -xs, np.array([1.0]), 0.1)
    assert x[0] == pytest.approx(math.exp(-0.1), abs=1e-7)


def test_rk4_zero_derivative():
    x0 = np.array([2.0, -3.0])
    assert np.array_equal(rk4_step(lambda xs: np.zeros(2), x0, 0.5), x0)


def test_rk4_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        rk4_step(lambda xs: -xs, np.array([1.0]), 0.0)


def test_rk4_nonfinite_stage_carries_timestamp():
    with pytest.raises(SimulationError) as err:
        rk4_step(lambda xs: np.array([float("nan")]), np.array([1.0]), 0.1, t=2.5)
    assert err.value.t == 2.5


def test_undriven_pendulum_conserves_energy():
    energy = lambda x: 0.5 * x[1] ** 2 + math.cos(x[0])
    x = np.array([0.4, 0.3])
    e0 = energy(x)
    drift = 0.0
    for _ in range(10000):
        x = rk4_step(lambda xs: pendulum_dynamics(xs, [0.0]), x, 1e-3)
        drift = max(drift, abs(energy(x) - e0))
    assert drift < 1e-6


def test_simulated_row_count_and_spacing(pendulum):
    inst = pendulum.make_cbf(ABC)
    traj = simulate(pendulum.system, inst, pendulum.filter_spec(), pendulum.x0, 1.0, 1e-3)
    assert len(traj) == 1001
    assert traj.exit_reason == "completed"
    steps = np.diff(traj.t)
    assert np.allclose(steps, 1e-3, rtol=0.0, atol=1e-15)


def test_abc_run_is_safe(pendulum):
    inst = pendulum.make_cbf(ABC)
    traj = simulate(pendulum.system, inst, pendulum.filter_spec(), pendulum.x0, 10.0, 1e-3)
    assert traj.exit_reason == "completed"
    assert traj.psi.min() >= 0.0
    assert traj.h.min() >= -1e-6
    assert traj.s is not None and traj.s.shape == traj.h.shape


def test_s_column_absent_for_other_kinds(pendulum):
    traj = simulate(
        pendulum.system,
        pendulum.make_cbf("backstepping"),
        pendulum.filter_spec(),
        pendulum.x0,
        0.2,
        1e-3,
    )
    assert traj.s is None


def test_high_order_run_blows_up_crossing_the_upright(pendulum):
    inst = pendulum.make_cbf("hocbf")
    traj = simulate(
        pendulum.system, inst, pendulum.filter_spec(), [0.1, -2.0], 5.0, 1e-3
    )
    assert traj.blew_up
    assert traj.exit_reason == "blow_up"
    assert traj.t[-1] < 5.0
    assert np.abs(traj.u[-1]).max() > 1e3


def test_desired_zero_input_while_inactive(pendulum):
    # start deep inside the safe set moving toward upright: s >= 0 there,
    # the filter cannot and need not act
    inst = pendulum.make_cbf(ABC)
    traj = simulate(pendulum.system, inst, pendulum.filter_spec(), [-0.3, 0.3], 0.5, 1e-3)
    assert np.array_equal(traj.u[:200], np.zeros((200, 1)))


def test_metrics_constant_input():
    traj = simulate_dummy_trajectory(u=np.ones((5, 1)) * 2.0)
    metrics = compute_metrics(traj)
    assert metrics.max_step_delta_u[0] == 0.0
    assert metrics.max_abs_u[0] == 2.0
    assert not metrics.blew_up


def test_metrics_two_row_jump():
    traj = simulate_dummy_trajectory(u=np.array([[0.0], [5.0]]))
    assert compute_metrics(traj).max_step_delta_u[0] == 5.0


def simulate_dummy_trajectory(u):
    from cbftk.sim import Trajectory

    n = u.shape[0]
    return Trajectory(
        dt=0.1,
        t=0.1 * np.arange(n),
        x=np.zeros((n, 2)),
        u=np.asarray(u, dtype=float),
        h=np.linspace(1.0, 0.5, n),
        psi=np.ones(n),
        s=None,
    )


def test_metrics_require_rows():
    from cbftk.sim import Trajectory

    empty = Trajectory(
        dt=0.1,
        t=np.zeros(0),
        x=np.zeros((0, 2)),
        u=np.zeros((0, 1)),
        h=np.zeros(0),
        psi=np.zeros(0),
        s=None,
    )
    with pytest.raises(ValueError):
        compute_metrics(empty)


def test_rectified_small_epsilon_chatters_harder_than_activated(pendulum):
    sharp = pendulum_scenario(params=PendulumParams(epsilon=0.01))
    spec = sharp.filter_spec()
    recbf_traj = simulate(sharp.system, sharp.make_cbf(RECBF), spec, sharp.x0, 10.0, 1e-3)
    abc_traj = simulate(sharp.system, sharp.make_cbf(ABC), spec, sharp.x0, 10.0, 1e-3)
    assert recbf_traj.exit_reason == "completed"
    m_recbf = compute_metrics(recbf_traj)
    m_abc = compute_metrics(abc_traj)
    assert m_recbf.max_step_delta_u[0] > m_abc.max_step_delta_u[0]


def test_closed_loop_matches_independent_adaptive_integrator(pendulum):
    # same controller composition, integrated by scipy's adaptive RK45:
    # an oracle for the fixed-step loop that shares no integration code
    from scipy.integrate import solve_ivp

    from cbftk.safety_filter import safety_filter

    inst = pendulum.make_cbf(ABC)
    spec = pendulum.filter_spec()

    def rhs(_t, x):
        u = safety_filter(spec, inst, pendulum.system, x)
        return pendulum.system.f_vec(x) + pendulum.system.g_mat(x) @ u

    sol = solve_ivp(rhs, (0.0, 3.0), pendulum.x0, rtol=1e-10, atol=1e-12)
    traj = simulate(pendulum.system, inst, spec, pendulum.x0, 3.0, 1e-3)
    assert np.allclose(traj.x[-1], sol.y[:, -1], atol=5e-7)


def test_left_domain_truncation_via_generic_path():
    # drifting cart whose extended set ends at x1 = 2
    system = ControlAffineSystem(
        n=2,
        m=1,
        f=lambda x: [1.0 + 0.0 * x[0], 0.0 * x[0]],
        g=lambda x: [[0.0], [1.0]],
    )
    output = RelDeg2Output(
        p=1,
        y=lambda x: [x[0]],
        ydot=lambda x: [1.0 + 0.0 * x[0]],
        psi=lambda y: 100.0 - y[0] * y[0],
        psi_grad=lambda y: [-2.0 * y[0]],
        in_extended_set=lambda x: x[0] < 2.0,
    )
    inst = hocbf(output, LinearClassK(1.0))
    spec = SafetyFilterSpec(desired=lambda x: np.zeros(1), gamma=np.ones(1), alpha=LinearClassK(1.0))
    traj = simulate(system, inst, spec, [0.0, 0.0], 5.0, 1e-2)
    assert traj.exit_reason == "left_domain"
    assert traj.t[-1] < 2.01
    metrics = compute_metrics(traj)
    assert metrics.exit_reason == "left_domain"
    assert not metrics.blew_up
