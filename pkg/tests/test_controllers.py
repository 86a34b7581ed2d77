import numpy as np
import pytest

from blfquad.controllers import (ConstraintSet, ELErrorState, ErrorState, GainSet, RobustModel,
                                 blf_asym_control, blf_sym_control, desired_attitude,
                                 inner_loop_full_state, inner_loop_rsb, lyapunov_eval,
                                 outer_loop_full_state, outer_loop_rsb, pid_control,
                                 rho_p_gain, rho_q_gain, smc_control, true_eta_p, true_eta_q)
from blfquad.errors import (ConstraintBoundaryReached, DegenerateThrustDirection,
                            InvalidUncertaintyBound, ZeroThrustDirection)
from blfquad.plants import ELState, Manipulator, ManipulatorParams, QuadrotorState
from blfquad.se3 import rotation_zyx, sat

ARM = Manipulator(ManipulatorParams())
EL_GAINS = GainSet(K_1=[500.0, 500.0], K_2=[10.0, 10.0])
CH3 = GainSet(Lambda_1p=0.1, Lambda_2p=6.0, Lambda_1q=[24.0, 24.0, 8.0], Lambda_2q=15.0,
              eps_p=0.1, eps_q=1.0)
CH3_C = ConstraintSet(k_p=[0.3, 0.3, 0.16], k_q=[0.5, 0.5, 0.25])
CH4 = GainSet(Lambda_1p=0.5, Lambda_2p=10.0, Lambda_1q=[20.0, 20.0, 12.0], Lambda_2q=15.0,
              eps_p=0.1, eps_q=1.0)
CH4_C = ConstraintSet(k_p=0.2, k_q=0.174, kdot_p=[0.55, 0.55, 0.7], kdot_q=[0.43, 0.43, 0.174])
ROB = RobustModel()
G = 9.81


# -- Euler-Lagrange laws --------------------------------------------------------

def _ref(t):
    return np.sin([t, t]), np.cos([t, t]), -np.sin([t, t])


def test_blf_sym_zero_error_is_feedforward():
    t = 0.7
    qd, qd_dot, qd_ddot = _ref(t)
    tau = blf_sym_control(ELState(qd, qd_dot), (qd, qd_dot, qd_ddot), EL_GAINS, 0.06, ARM, t)
    expected = ARM.mass_matrix(qd) @ qd_ddot + ARM.bias(qd, qd_dot, t)
    np.testing.assert_allclose(tau, expected, rtol=1e-12, atol=1e-12)


def test_blf_sym_rejects_infeasible_error():
    qd, qd_dot, qd_ddot = _ref(0.0)
    with pytest.raises(ConstraintBoundaryReached):
        blf_sym_control(ELState(qd + 0.06, qd_dot), (qd, qd_dot, qd_ddot), EL_GAINS, 0.06, ARM)


def test_blf_asym_reduces_to_sym():
    rng = np.random.default_rng(4)
    for _ in range(20):
        t = rng.uniform(0, 10)
        ref = _ref(t)
        z = rng.uniform(-0.05, 0.05, 2)
        s = ELState(ref[0] + z, ref[1] + rng.uniform(-0.5, 0.5, 2))
        np.testing.assert_allclose(blf_asym_control(s, ref, EL_GAINS, 0.06, 0.06, ARM, t),
                                   blf_sym_control(s, ref, EL_GAINS, 0.06, ARM, t), rtol=1e-13)


def test_blf_asym_branch_bounds():
    ref = _ref(0.0)
    blf_asym_control(ELState(ref[0] + 0.09, ref[1]), ref, EL_GAINS, 0.06, 0.1, ARM)
    with pytest.raises(ConstraintBoundaryReached):
        blf_asym_control(ELState(ref[0] - 0.061, ref[1]), ref, EL_GAINS, 0.06, 0.1, ARM)


PID = {"K_P": [15.0, 2.0], "K_I": [0.0, 0.0], "K_D": [10.0, 0.6]}


def test_pid_gravity_only_at_zero_error():
    q = np.array([0.3, -0.4])
    tau = pid_control(ELState(q, np.zeros(2)), (q, np.zeros(2)), PID, np.zeros(2), ARM)
    np.testing.assert_allclose(tau, ARM.gravity(q))


def test_pid_proportional_jump():
    q = np.array([0.3, -0.4])
    dz = np.array([0.01, -0.02])
    ref = (q, np.zeros(2))
    t0 = pid_control(ELState(q, np.zeros(2)), ref, PID, np.zeros(2), ARM)
    # the reference steps away; gravity is evaluated at the unchanged q
    t1 = pid_control(ELState(q, np.zeros(2)), (q - dz, np.zeros(2)), PID, np.zeros(2), ARM)
    np.testing.assert_allclose(t1 - t0, -np.array(PID["K_P"]) * dz, atol=1e-14)


# -- quadrotor outer loop ----------------------------------------------------------

def test_outer_rsb_hover_feedforward():
    s = QuadrotorState(p=np.array([1.0, 2.0, 1.5]))
    tau, alpha, alphadot, rho, nubar = outer_loop_rsb(s, s.p, np.zeros(3), np.zeros(3), CH3,
                                                      CH3_C, ROB)
    np.testing.assert_allclose(tau, [0, 0, ROB.m_bar * G], atol=1e-12)
    assert rho > 0


def test_outer_rsb_nominal_control_expansion():
    z = np.array([0.1, 0.0, 0.0])
    pd_ddot = np.array([0.3, -0.1, 0.2])
    L1 = CH3.Lambda_1p
    s = QuadrotorState(p=z.copy(), v=-L1 * z)
    *_, nubar = outer_loop_rsb(s, np.zeros(3), np.zeros(3), pd_ddot, CH3, CH3_C, ROB)
    expected = pd_ddot[0] + L1[0] ** 2 * z[0] - z[0] / (0.09 - 0.01)
    assert abs(nubar[0] - expected) < 1e-12


def test_outer_rsb_alpha_dot_matches_difference():
    rng = np.random.default_rng(5)
    for _ in range(10):
        p, v, a = rng.uniform(-0.1, 0.1, 3), rng.uniform(-0.5, 0.5, 3), rng.uniform(-1, 1, 3)
        pd, pdd, pddd = rng.uniform(-0.05, 0.05, 3), rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
        h = 1e-6
        al = [outer_loop_rsb(QuadrotorState(p=p + s * h * v, v=v + s * h * a), pd + s * h * pdd,
                             pdd + s * h * pddd, pddd, CH3, CH3_C, ROB)[1] for s in (1, -1)]
        ad = outer_loop_rsb(QuadrotorState(p=p, v=v), pd, pdd, pddd, CH3, CH3_C, ROB)[2]
        np.testing.assert_allclose((al[0] - al[1]) / (2 * h), ad, rtol=1e-6, atol=1e-9)


def test_full_state_bounds():
    np.testing.assert_allclose(CH4_C.k_2p(CH4), [0.65, 0.65, 0.8], rtol=1e-12)
    np.testing.assert_allclose(CH4_C.k_2q(CH4), [3.91, 3.91, 2.262], rtol=1e-12)


def test_outer_full_state_zero_error():
    pdd = np.array([0.2, -0.3, 0.1])
    s = QuadrotorState(p=np.zeros(3), v=np.array([0.5, 0.0, 0.0]))
    tau, rho, nubar = outer_loop_full_state(s, np.zeros(3), s.v, pdd, CH4, CH4_C, ROB)
    np.testing.assert_allclose(nubar, pdd, atol=1e-15)
    np.testing.assert_allclose(tau, ROB.m_bar * pdd + [0, 0, ROB.m_bar * G], atol=1e-12)


def test_outer_full_state_guards_z2():
    s = QuadrotorState(v=np.array([0.0, 0.0, 0.81]))
    with pytest.raises(ConstraintBoundaryReached) as ei:
        outer_loop_full_state(s, np.zeros(3), np.zeros(3), np.zeros(3), CH4, CH4_C, ROB)
    assert ei.value.family == "z_2p"


# -- robust gains ----------------------------------------------------------------

def test_rho_p_zero_without_uncertainty():
    rob = RobustModel(m_bar=2.0, E_p=0.0, d_p_bound=[0, 0, 0])
    assert rho_p_gain([1.0, 2.0, 3.0], rob) == 0.0


def test_rho_p_dominates_direct_evaluation():
    rob = RobustModel(m_bar=2.0, E_p=0.3, d_p_bound=[0, 0, 0.5])
    rho = rho_p_gain([2.0, 0.0, 0.0], rob)
    ref = (0.6 + (3.924 + 0.5) / 2.4) / 0.7
    assert abs(ref - 3.4905) < 1e-4
    assert rho >= ref


def test_rho_monotone():
    base = dict(m_bar=2.0, E_p=0.2, E_q=0.2, d_p_bound=[0, 0, 0.5], d_q_bound=[0.01, 0.01, 0.02])
    r0 = RobustModel(**base)
    for key, val in (("E_p", 0.3), ("d_p_bound", [0, 0, 0.8])):
        assert rho_p_gain([1, 1, 1], RobustModel(**{**base, key: val})) >= rho_p_gain([1, 1, 1], r0)
    assert rho_p_gain([2, 2, 2], r0) >= rho_p_gain([1, 1, 1], r0)
    for key, val in (("E_q", 0.3), ("d_q_bound", [0.02, 0.02, 0.02])):
        assert (rho_q_gain([1, 1, 1], [1, 0, 0], RobustModel(**{**base, key: val}))
                >= rho_q_gain([1, 1, 1], [1, 0, 0], r0))
    assert rho_q_gain([2, 2, 2], [1, 0, 0], r0) >= rho_q_gain([1, 1, 1], [1, 0, 0], r0)
    assert rho_q_gain([1, 1, 1], [2, 0, 0], r0) >= rho_q_gain([1, 1, 1], [1, 0, 0], r0)


def test_invalid_uncertainty_bound():
    with pytest.raises(InvalidUncertaintyBound):
        RobustModel(E_p=1.0)


def test_rho_bounds_true_uncertainty_over_envelope():
    rob = RobustModel(m_bar=2.0, E_p=0.3, E_q=0.3, d_p_bound=[0.1, 0.1, 0.5],
                      d_q_bound=[0.01, 0.01, 0.02])
    lo, hi = rob.mass_range()
    rng = np.random.default_rng(6)
    for _ in range(2000):
        m = rng.uniform(lo, hi)
        J = rob.J_bar / (1 + rng.uniform(-0.3, 0.3, 3))
        nubar, w = rng.normal(0, 5, 3), rng.normal(0, 3, 3)
        z2 = rng.normal(0, 0.2, 3)
        rho = rho_p_gain(nubar, rob)
        nu = nubar - rho * sat(z2, 0.1)
        dp = rob.d_p_bound * rng.uniform(-1, 1, 3)
        assert np.linalg.norm(true_eta_p(nu, m, rob, dp)) <= rho + 1e-12
        rq = rho_q_gain(nubar, w, rob)
        nq = nubar - rq * sat(z2, 1.0)
        dq = rob.d_q_bound * rng.uniform(-1, 1, 3)
        assert np.linalg.norm(true_eta_q(nq, w, J, rob, dq)) <= rq + 1e-12


# -- desired attitude --------------------------------------------------------------

def test_desired_attitude_hover():
    phi, theta, Rd = desired_attitude([0, 0, 1.8 * G], 0.0)
    assert phi == 0 and theta == 0
    np.testing.assert_allclose(Rd, np.eye(3), atol=1e-15)


def test_desired_attitude_pitch_quarter():
    phi, theta, Rd = desired_attitude([3.0, 0, 3.0], 0.0)
    assert abs(theta - np.pi / 4) < 1e-14 and abs(phi) < 1e-14


def test_desired_attitude_construction():
    rng = np.random.default_rng(7)
    for _ in range(200):
        tau = rng.normal(0, 3, 3)
        tau[2] = abs(tau[2]) + 1.0
        psi = rng.uniform(-np.pi, np.pi)
        phi, theta, Rd = desired_attitude(tau, psi)
        np.testing.assert_allclose(Rd.T @ Rd, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(Rd[:, 2], tau / np.linalg.norm(tau), atol=1e-12)
        np.testing.assert_allclose(rotation_zyx(phi, theta, psi), Rd, atol=1e-12)


def test_desired_attitude_degenerate():
    with pytest.raises(ZeroThrustDirection):
        desired_attitude([0, 0, 0], 0.0)
    with pytest.raises(DegenerateThrustDirection):
        desired_attitude([0, 1.0, 0], 0.0)


# -- inner loop ---------------------------------------------------------------------

def test_inner_rsb_equilibrium():
    q = np.array([0.1, -0.05, 0.3])
    s = QuadrotorState(q=q)
    tau, rho = inner_loop_rsb(s, q, np.zeros(3), np.zeros(3), CH3, CH3_C, ROB)
    np.testing.assert_allclose(tau, 0, atol=1e-15)


def test_inner_full_state_equilibrium():
    q = np.array([0.02, -0.05, 0.3])
    tau, rho = inner_loop_full_state(QuadrotorState(q=q), q, np.zeros(3), np.zeros(3), CH4,
                                     CH4_C, ROB)
    np.testing.assert_allclose(tau, 0, atol=1e-15)


def test_inner_alpha_dot_uses_exact_error_rate():
    from blfquad.controllers.quad import _inner
    rng = np.random.default_rng(8)
    gp = CH3
    for _ in range(10):
        q, w = rng.uniform(-0.2, 0.2, 3), rng.uniform(-1, 1, 3)
        qd, qdd, qddd = rng.uniform(-0.2, 0.2, 3), rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
        h = 1e-6

        def alpha(s):
            return _inner(0, q + s * h * w, w, qd + s * h * qdd, qdd + s * h * qddd, qddd,
                          gp.Lambda_1q, gp.Lambda_2q, np.full(3, 10.0), np.ones(3), 1.0,
                          ROB.packed())[7]

        res = _inner(0, q, w, qd, qdd, qddd, gp.Lambda_1q, gp.Lambda_2q, np.full(3, 10.0),
                     np.ones(3), 1.0, ROB.packed())
        # alpha depends on q, q_d and q'_d only, so w is held while q moves along it
        fd = (alpha(1) - alpha(-1)) / (2 * h)
        np.testing.assert_allclose(fd, res[8], rtol=1e-5, atol=1e-8)


# -- sliding mode ------------------------------------------------------------------

def test_smc_feedforward():
    pdd = np.array([0.1, 0.2, -0.3])
    s = QuadrotorState(p=np.ones(3), v=np.array([0.2, 0, 0]))
    tau = smc_control(s, (np.ones(3), s.v, pdd), CH3, ROB, "position")
    np.testing.assert_allclose(tau, ROB.m_bar * pdd + [0, 0, ROB.m_bar * G], atol=1e-12)
    q = np.array([0.1, 0.0, 0.2])
    tq = smc_control(QuadrotorState(q=q), (q, np.zeros(3), np.zeros(3)), CH3, ROB, "attitude")
    np.testing.assert_allclose(tq, 0, atol=1e-15)


def test_smc_boundary_layer_edge():
    s_vec = np.array([0.06, 0.08, 0.0])  # |s| = eps_p
    st = QuadrotorState(v=s_vec)
    tau = smc_control(st, (np.zeros(3), np.zeros(3), np.zeros(3)), CH3, ROB, "position")
    nubar = -CH3.Lambda_1p * s_vec
    rho = rho_p_gain(nubar, ROB)
    robust = tau - ROB.m_bar * nubar - [0, 0, ROB.m_bar * G]
    assert abs(np.linalg.norm(robust) - ROB.m_bar * rho) < 1e-12


# -- Lyapunov functions ---------------------------------------------------------------

def _err(zp=(0, 0, 0), z2p=(0, 0, 0), zq=(0, 0, 0), z2q=(0, 0, 0)):
    z = np.zeros(3)
    return ErrorState(np.array(zp, float), np.array(z2p, float), z, np.array(zq, float),
                      np.array(z2q, float), z)


def test_lyapunov_zero():
    assert lyapunov_eval(_err(), CH3_C, "ch3") == 0.0
    assert lyapunov_eval(_err(), CH4_C, "ch4", CH4) == 0.0
    c = ConstraintSet(k_a=0.06, k_b=0.1)
    assert lyapunov_eval(ELErrorState(np.zeros(2), np.zeros(2)), c, "ch2_asym") == 0.0


def test_lyapunov_ch3_value():
    V = lyapunov_eval(_err(zp=(0.15, 0, 0)), CH3_C, "ch3")
    assert abs(V - 0.5 * np.log(0.09 / 0.0675)) < 1e-15
    assert abs(V - 0.14384) < 1e-5


def test_lyapunov_monotone():
    for which, c, g in (("ch3", CH3_C, None), ("ch4", CH4_C, CH4)):
        vals = [lyapunov_eval(_err(zp=(z, 0, 0), z2q=(z, 0, 0)), c, which, g)
                for z in np.linspace(0, 0.19, 20)]
        assert np.all(np.diff(vals) > 0)
    c = ConstraintSet(k_a=0.06, k_b=0.1)
    vals = [lyapunov_eval(ELErrorState(np.array([z, 0.0]), np.zeros(2)), c, "ch2_asym")
            for z in np.linspace(-0.059, 0, 20)]
    assert np.all(np.diff(vals) < 0)
