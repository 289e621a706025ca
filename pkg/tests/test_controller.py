import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_quat, unit_quaternions, vectors
from finctl.controller import (THETA_LOWER, THETA_UPPER, ConfigError, ControllerError,
                               ControllerGains, HybridControllerState, TrajectoryPoint,
                               config_error, controller_step, hybrid_flow_or_jump, potential,
                               potential_and_gradient, project, reference_velocity, regressor,
                               zeta_update)
from finctl.dynamics import N_THETA, THETA_START, PlantState, RigidBody, model_matrices
from finctl.math_core import (IDENTITY_QUAT, Pose, euler_to_quat, pose_jacobian, quat_mul,
                              quat_to_rot)

GAINS = ControllerGains()


def quat_exp(w, h):
    """Unit quaternion of the body rotation ``w`` held for time ``h``."""
    n = np.linalg.norm(w)
    if n == 0:
        return IDENTITY_QUAT.copy()
    return np.r_[np.cos(0.5 * n * h), np.sin(0.5 * n * h) * w / n]


def test_error_at_target():
    pose = Pose([1, 2, 3], euler_to_quat(0.1, 0.2, 0.3))
    err = config_error(pose, pose)
    assert np.allclose(err.p_e, 0.0) and np.allclose(abs(err.mu), 1.0)


def test_position_error_in_desired_frame():
    qd = euler_to_quat(0.3, -0.1, 1.2)
    pd = np.array([1.0, -2.0, 0.5])
    pose = Pose(pd + quat_to_rot(qd) @ [1, 0, 0], qd)
    assert np.allclose(config_error(pose, Pose(pd, qd)).p_e, [-1, 0, 0])


@given(unit_quaternions(), unit_quaternions())
def test_attitude_error_cancels(qd, dq):
    err = config_error(Pose(np.zeros(3), quat_mul(qd, dq)), Pose(np.zeros(3), qd))
    assert np.allclose(err.q_e, dq, atol=1e-12)


def test_reference_velocity_examples():
    nu, nu_dot = reference_velocity(np.zeros(7), np.zeros(7), IDENTITY_QUAT)
    assert not np.any(nu) and not np.any(nu_dot)
    nu, _ = reference_velocity(np.r_[1.0, 0, 0, np.zeros(4)], np.zeros(7), IDENTITY_QUAT)
    assert np.allclose(nu[:3], [1, 0, 0])


@given(unit_quaternions(), vectors(6, -2, 2))
def test_reference_velocity_reproduces_pose_rate(q, nu):
    j, _ = pose_jacobian(q)
    eta_dot = j @ nu
    nu_r, _ = reference_velocity(eta_dot, np.zeros(7), q)
    assert np.allclose(j @ nu_r, eta_dot, atol=1e-9)


def test_potential_examples():
    err = ConfigError(np.zeros(3), IDENTITY_QUAT.copy())
    v, dv = potential_and_gradient(err, 1, GAINS)
    assert v == 0.0 and not np.any(dv)
    gains = ControllerGains(K_p=[2.0, 1.0, 1.0], k=1.0)
    assert potential(ConfigError(np.array([1.0, 0, 0]), IDENTITY_QUAT.copy()), 1, gains) == 1.0


def flow_potential(p, q, pd, qd, h, gains):
    return potential(config_error(Pose(p, q), Pose(pd, qd)), h, gains)


def directional_gap(rng, step=1e-6):
    """|finite-difference dV/dt - dV . nu| along the error flow of a body twist."""
    gains = ControllerGains(K_p=rng.uniform(0.5, 20, 3), k=rng.uniform(0.5, 20))
    pd, qd = rng.normal(size=3), random_quat(rng)
    p, q = rng.normal(size=3), random_quat(rng)
    nu = rng.normal(size=6)
    h = int(rng.choice([-1, 1]))

    def moved(s):
        return p + quat_to_rot(q) @ nu[:3] * s, quat_mul(q, quat_exp(nu[3:], s))

    fd = (flow_potential(*moved(step), pd, qd, h, gains)
          - flow_potential(*moved(-step), pd, qd, h, gains)) / (2 * step)
    _, dv = potential_and_gradient(config_error(Pose(p, q), Pose(pd, qd)), h, gains)
    return abs(fd - dv @ nu)


def test_gradient_matches_finite_differences(rng):
    assert max(directional_gap(rng) for _ in range(500)) < 1e-5


def test_hysteresis_examples():
    assert hybrid_flow_or_jump(ConfigError(np.zeros(3), np.r_[0.5, 0, 0, np.sqrt(0.75)]), 1) == (1, False)
    q = np.r_[-0.15, 0, 0, np.sqrt(1 - 0.15 ** 2)]
    h, jumped = hybrid_flow_or_jump(ConfigError(np.zeros(3), q), 1, 0.1)
    assert (h, jumped) == (-1, True)
    assert h * q[0] > -0.1
    assert hybrid_flow_or_jump(ConfigError(np.zeros(3), q), h, 0.1) == (-1, False)


@given(st.lists(st.floats(-1.0, 1.0), min_size=2, max_size=200), st.sampled_from([-1, 1]))
def test_no_jump_without_band_crossing(mus, h0):
    """Between two jumps mu must travel from one side of the band to the other."""
    h, last_jump_mu = h0, None
    for mu in mus:
        q = np.r_[mu, 0, 0, np.sqrt(1 - mu * mu)]
        h_new, jumped = hybrid_flow_or_jump(ConfigError(np.zeros(3), q), h, 0.1)
        if jumped:
            assert h_new == -h and h * mu <= -0.1
            if last_jump_mu is not None:
                assert np.sign(mu) != np.sign(last_jump_mu) and abs(mu - last_jump_mu) >= 0.2
            last_jump_mu = mu
        assert h_new * mu > -0.1
        h = h_new


def test_regressor_zero_parameters(rng):
    phi = regressor(rng.normal(size=6), rng.normal(size=6), rng.normal(size=6), random_quat(rng))
    assert not np.any(phi @ np.zeros(N_THETA))


def test_regressor_restoring_column(rng):
    q = random_quat(rng)
    phi = regressor(rng.normal(size=6), rng.normal(size=6), rng.normal(size=6), q)
    assert np.allclose(phi[:, 0], np.r_[-quat_to_rot(q).T @ [0, 0, 1], np.zeros(3)])


def regressor_gap(rng):
    theta = rng.uniform(-50, 50, N_THETA)
    nu, nu_m, nu_m_dot = (rng.uniform(-2, 2, 6) for _ in range(3))
    q = random_quat(rng)
    m, c, d, g = model_matrices(theta, nu, q)
    expected = m @ nu_m_dot + c @ nu_m + d @ nu_m + g
    return np.abs(regressor(nu, nu_m, nu_m_dot, q) @ theta - expected).max()


def test_regressor_matches_model_1000_draws(rng):
    assert max(regressor_gap(rng) for _ in range(1000)) < 1e-9


def target_at(pose, rate=None, accel=None):
    return TrajectoryPoint(pose, np.zeros(7) if rate is None else rate,
                           np.zeros(7) if accel is None else accel)


def test_exact_tracking_is_pure_feedforward(rng):
    q = random_quat(rng)
    pose = Pose(rng.normal(size=3), q)
    nu = rng.normal(size=6)
    j, _ = pose_jacobian(q)
    state = HybridControllerState(theta_hat=THETA_START.copy())
    tau, new, out = controller_step(pose, nu, target_at(pose, j @ nu), state, GAINS, 0.05)
    assert out.V == pytest.approx(0.0, abs=1e-12)
    phi = regressor(nu, nu, np.zeros(6), q)
    assert np.allclose(tau, phi @ THETA_START, atol=1e-9)
    assert np.allclose(new.zeta, 0.0)


def test_position_error_feedback():
    # The target sits ahead of the vehicle, so p_e > 0 and the law pushes
    # forward: -dV = +K_p p_e for an aligned attitude.
    desired = Pose([1.0, -0.5, 0.2], IDENTITY_QUAT)
    state = HybridControllerState()
    dt = 0.05
    tau, _, out = controller_step(Pose(np.zeros(3), IDENTITY_QUAT), np.zeros(6), target_at(desired),
                                  state, GAINS, dt)
    _, dv = potential_and_gradient(out.err, 1, GAINS)
    assert np.allclose(dv, np.r_[-GAINS.K_p * out.err.p_e, np.zeros(3)])
    nu_m_dot = -dv / GAINS.Lambda
    phi = regressor(np.zeros(6), np.zeros(6), nu_m_dot, IDENTITY_QUAT)
    assert np.allclose(tau, phi @ state.theta_hat + np.r_[GAINS.K_p * out.err.p_e, np.zeros(3)])
    assert tau[0] > 0


def test_projection_is_identity_inside():
    theta = 0.5 * (THETA_LOWER + THETA_UPPER)
    upd = np.arange(N_THETA, dtype=float) - 11
    assert np.array_equal(project(theta, upd, GAINS), upd)


@given(st.integers(0, N_THETA - 1), st.floats(0.0, 1.5), st.booleans())
def test_projection_contract(i, depth, upper):
    theta = 0.5 * (THETA_LOWER + THETA_UPPER)
    sign = 1.0 if upper else -1.0
    bound = THETA_UPPER[i] if upper else THETA_LOWER[i]
    theta[i] = bound + sign * depth * GAINS.eps_bar[i]
    upd = np.zeros(N_THETA)
    upd[i] = sign * 1e3
    out = project(theta, upd, GAINS)
    assert sign * out[i] >= 0
    if depth >= 1.0:
        assert out[i] == 0.0


@given(vectors(N_THETA, -1, 1), vectors(6, -3, 3), vectors(3, -2, 2), unit_quaternions())
def test_theta_hat_stays_in_inflated_box(frac, nu, p, q):
    gains = ControllerGains(Gamma=np.full(N_THETA, 1e-3))
    lo, hi = gains.lo, gains.hi
    theta = 0.5 * (lo + hi) + 0.5 * (hi - lo) * frac
    state = HybridControllerState(theta_hat=theta)
    for _ in range(5):
        _, state, _ = controller_step(Pose(p, q), nu, target_at(Pose(np.zeros(3), IDENTITY_QUAT)),
                                      state, gains, 0.05)
        assert np.all(state.theta_hat >= lo) and np.all(state.theta_hat <= hi)


def test_zeta_schemes_agree_for_small_steps(rng):
    zeta, dv = rng.normal(size=6), rng.normal(size=6)
    exact = zeta_update(zeta, dv, GAINS, 1e-5)
    euler = zeta_update(zeta, dv, ControllerGains(zeta_scheme="euler"), 1e-5)
    assert np.allclose(exact, euler, atol=1e-9)


def test_zeta_exact_is_closed_form(rng):
    zeta, dv = rng.normal(size=6), rng.normal(size=6)
    r = GAINS.K_d / GAINS.Lambda
    t = 0.37
    expected = np.exp(-r * t) * (zeta + dv / GAINS.K_d) - dv / GAINS.K_d
    assert np.allclose(zeta_update(zeta, dv, GAINS, t), expected)
    two = zeta_update(zeta_update(zeta, dv, GAINS, t / 2), dv, GAINS, t / 2)
    assert np.allclose(two, expected)


def test_zeta_euler_diverges_on_stiff_gains():
    stiff = ControllerGains.for_method("inv")
    dt = 0.05
    assert np.max(stiff.K_d * dt / stiff.Lambda) > 2
    z_exact = z_euler = np.ones(6)
    euler = ControllerGains.for_method("inv", zeta_scheme="euler")
    for _ in range(200):
        z_exact = zeta_update(z_exact, np.zeros(6), stiff, dt)
        z_euler = zeta_update(z_euler, np.zeros(6), euler, dt)
    assert np.max(np.abs(z_exact)) < 1e-6
    assert np.max(np.abs(z_euler)) > 1e6


def test_gain_validation():
    with pytest.raises(ValueError):
        ControllerGains(k=0.0)
    with pytest.raises(ValueError):
        ControllerGains(varsigma=1.5)
    with pytest.raises(ValueError):
        ControllerGains(zeta_scheme="rk4")
    with pytest.raises(ValueError):
        ControllerGains.for_method("lsq")
    with pytest.raises(ValueError):
        HybridControllerState(h=0)


def test_non_finite_output_raises():
    state = HybridControllerState()
    with pytest.raises(ControllerError):
        controller_step(Pose(), np.full(6, np.nan), target_at(Pose()), state, GAINS, 0.05)


def attitude_regulation(yaw_error, duration=40.0, dt=0.01, every=5):
    """Closed loop of controller and rigid body on the true quaternion.

    Returns the total angle turned, the final attitude and the switch history.
    """
    body = RigidBody(THETA_START)
    q0 = np.r_[np.cos(yaw_error / 2), 0, 0, np.sin(yaw_error / 2)]
    x = PlantState(q=q0).as_vector()
    state = HybridControllerState()
    target = target_at(Pose())
    turned, hs, tau = 0.0, [], np.zeros(6)
    for j in range(int(round(duration / dt))):
        if j % every == 0:
            tau, state, _ = controller_step(Pose(x[:3], x[3:7]), x[7:], target, state, GAINS, dt * every)
            hs.append(state.h)
        x = body.step_vector(x, tau, dt)
        turned += np.linalg.norm(x[10:13]) * dt
    return turned, x[3:7], hs


def test_unwinding_inside_band_takes_the_long_way_at_most_band_extra():
    turned, q, hs = attitude_regulation(np.pi + 0.2)
    assert set(hs) == {1}
    assert abs(q[0]) > 0.999
    assert turned <= np.pi + 0.3


def test_unwinding_outside_band_switches_once_and_takes_the_short_way():
    turned, q, hs = attitude_regulation(np.pi + 0.4)
    assert hs[0] == -1 and set(hs) == {-1}
    assert q[0] < -0.999
    assert turned <= np.pi - 0.3
