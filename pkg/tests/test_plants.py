import numpy as np
import pytest

from blfquad.errors import NonPositiveMass, ZeroThrustDirection
from blfquad.plants import (DisturbanceModel, ELState, Manipulator, ManipulatorParams,
                            PayloadEvent, QuadrotorParams, QuadrotorState, apply_payload_event,
                            coriolis_matrix, eval_disturbance, manipulator_accel,
                            quad_rotational_accel, quad_translational_accel, realize_thrust)
from blfquad.se3 import rotation_zyx
from blfquad.sim import step

ARM = Manipulator(ManipulatorParams())


def test_manipulator_gravity_cancellation():
    q = np.zeros(2)
    tau = ARM.gravity(q) + ARM.friction(np.zeros(2))
    qdd = manipulator_accel(ELState(q, np.zeros(2)), tau, 0.0)
    np.testing.assert_allclose(qdd, 0, atol=1e-14)


def test_manipulator_mass_symmetric():
    rng = np.random.default_rng(0)
    for q in rng.uniform(-np.pi, np.pi, (50, 2)):
        M = ARM.mass_matrix(q)
        np.testing.assert_array_equal(M, M.T)
        assert np.all(np.linalg.eigvalsh(M) > 0)


def test_manipulator_passivity():
    rng = np.random.default_rng(1)
    h = 1e-6
    for _ in range(50):
        q, qd = rng.uniform(-np.pi, np.pi, 2), rng.uniform(-3, 3, 2)
        Mdot = (ARM.mass_matrix(q + h * qd) - ARM.mass_matrix(q - h * qd)) / (2 * h)
        N = Mdot - 2 * ARM.coriolis(q, qd)
        assert abs(qd @ N @ qd) < 1e-9


def test_manipulator_disturbance_enters_accel():
    dist = DisturbanceModel("sinusoid", amplitude=(0.5, 0.5), frequency=0.5)
    arm = Manipulator(ManipulatorParams(), dist)
    q, qd = np.array([0.2, -0.1]), np.array([0.3, 0.1])
    t = 1.3
    qdd = arm.accel(ELState(q, qd), np.array([1.0, 0.5]), t)
    rhs = (np.array([1.0, 0.5]) - arm.coriolis(q, qd) @ qd - arm.gravity(q) - arm.friction(qd)
           - eval_disturbance(dist, t))
    np.testing.assert_allclose(arm.mass_matrix(q) @ qdd, rhs, atol=1e-12)


MG = 1.8 * 9.81
STATE = QuadrotorState()


def test_hover_balance():
    np.testing.assert_allclose(quad_translational_accel(STATE, [0, 0, MG], QuadrotorParams()),
                               0, atol=1e-14)


def test_free_fall():
    np.testing.assert_allclose(quad_translational_accel(STATE, [0, 0, 0], QuadrotorParams()),
                               [0, 0, -9.81], atol=1e-14)


def test_translational_direct_evaluation():
    a = quad_translational_accel(STATE, [1, 0, 19.62 + 2], QuadrotorParams(m=2.0))
    np.testing.assert_allclose(a, [0.5, 0, 1], atol=1e-12)


def test_rotational_equilibrium():
    np.testing.assert_allclose(quad_rotational_accel(STATE, [0, 0, 0], QuadrotorParams()), 0)


def test_rotational_diagonal_solve():
    p = QuadrotorParams(J=(0.02, 0.02, 0.04))
    np.testing.assert_allclose(quad_rotational_accel(STATE, [0.02, 0, 0], p), [1, 0, 0],
                               atol=1e-14)


def test_rotational_energy_rate():
    # with C = -skew(J q'), q'^T C q' = 0, so d/dt (q'^T J q'/2) = q'^T tau
    p = QuadrotorParams(J=(0.02, 0.025, 0.04))
    J = np.array(p.J)
    rng = np.random.default_rng(2)
    for _ in range(20):
        w0, tau = rng.uniform(-2, 2, 3), rng.uniform(-0.05, 0.05, 3)

        def f(t, w):
            return quad_rotational_accel(QuadrotorState(w=w), tau, p)

        h = 1e-4
        wp = step(w0, f, 0.0, h)
        wm = step(w0, lambda t, w: -f(t, w), 0.0, h)
        dE = (0.5 * wp @ (J * wp) - 0.5 * wm @ (J * wm)) / (2 * h)
        assert abs(dE - w0 @ tau) < 1e-8
        qdd = f(0, w0)
        assert abs(w0 @ (J * qdd) - w0 @ tau) < 1e-12


def test_coriolis_skew_structure():
    J = np.array([0.02, 0.02, 0.04])
    w = np.array([0.3, -1.2, 0.7])
    C = coriolis_matrix(J, w)
    np.testing.assert_allclose(C, -C.T)
    np.testing.assert_allclose(C @ w, np.cross(w, J * w), atol=1e-15)


def test_realize_thrust_examples():
    u1, f = realize_thrust([0, 0, 19.62], np.eye(3))
    assert u1 == 19.62 and np.array_equal(f, [0, 0, 19.62])
    _, f = realize_thrust([0, 0, 10], rotation_zyx(0, np.pi / 6, 0))
    np.testing.assert_allclose(f, [5, 0, 10 * np.cos(np.pi / 6)], atol=1e-12)
    with pytest.raises(ZeroThrustDirection):
        realize_thrust([0, 0, 0], np.eye(3))


def test_realize_thrust_aligned():
    from blfquad.controllers import desired_attitude
    tau = np.array([1.0, -2.0, 15.0])
    _, _, Rd = desired_attitude(tau, 0.4)
    np.testing.assert_allclose(realize_thrust(tau, Rd)[1], tau, atol=1e-12)


def test_disturbance_sinusoid():
    d = DisturbanceModel("sinusoid", amplitude=(0.5, 0.5), frequency=0.5)
    np.testing.assert_allclose(eval_disturbance(d, 0.0), 0)
    np.testing.assert_allclose(eval_disturbance(d, np.pi), [0.5, 0.5], atol=1e-15)


def test_disturbance_wind_45_degrees():
    d = DisturbanceModel("wind", direction=np.pi / 4, mean=0.3, gust_amp=(0.05,),
                         gust_freq=(0.4,), gust_phase=(0.1,))
    for t in (0.0, 1.0, 7.3):
        v = eval_disturbance(d, t)
        assert abs(v[0] - v[1]) < 1e-15 and v[2] == 0
    assert np.all(d.bound[:2] >= np.abs(eval_disturbance(d, 2.0)[:2]))


def test_payload_pickup():
    p = apply_payload_event(QuadrotorParams(m=1.4), PayloadEvent(0.0, 0.3))
    assert abs(p.m - 1.7) < 1e-15 and abs(p.payload_mass - 0.3) < 1e-15


def test_payload_round_trip():
    base = QuadrotorParams(m=1.4)
    p = apply_payload_event(base, PayloadEvent(0.0, 0.3, (0.02, 0, 0)))
    assert p.com_offset == (0.02, 0.0, 0.0)
    p = apply_payload_event(p, PayloadEvent(1.0, -0.3))
    assert abs(p.m - base.m) < 1e-15
    assert p.payload_mass == 0.0 and p.com_offset == base.com_offset


def test_payload_overdrop():
    with pytest.raises(NonPositiveMass):
        apply_payload_event(QuadrotorParams(m=1.4), PayloadEvent(0.0, -1.5))


def test_com_offset_torque_sign():
    # weight hanging at +x drives +x down, a positive rotation about body y
    p = apply_payload_event(QuadrotorParams(), PayloadEvent(0.0, 0.4, (0.02, 0, 0)))
    a = quad_rotational_accel(STATE, [0, 0, 0], p)
    assert a[1] > 0 and abs(a[0]) < 1e-15
    np.testing.assert_allclose(a[1] * p.J[1], 0.4 * 9.81 * 0.02, rtol=1e-12)
