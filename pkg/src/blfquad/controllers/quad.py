"""Quadrotor position/attitude controllers.

Three variants share one cascade (outer position loop, flatness-based
desired attitude, inner attitude loop):

* ``rsb``        barrier on z_p and z_q, quadratic in z_2p and z_2q;
* ``full_state`` barriers on z and z_2 in both loops (D_3 = D_2^-1 D);
* ``smc``        boundary-layer sliding mode on s = z_2, no barrier.

All of them add ``-rho sat(z_2, eps)`` with rho from the robust synthesizers.
"""

import numpy as np
from numba import njit

from ..errors import ConstraintBoundaryReached, DegenerateThrustDirection, ZeroThrustDirection
from ..se3 import (_attitude_error, _attitude_error_rate, _cross, _log_barrier, _rot, _rot_dot,
                   _sat)
from .attitude import CommandFilter, _desired_attitude, _filter_advance, _filter_outputs
from .robust import _rho_p, _rho_q
from .types import ControlOutput, ErrorState

MODES = {"rsb": 0, "full_state": 1, "smc": 2}

# constraint families in the order used by violation codes
FAMILIES = ("z_p", "z_q", "zdot_p", "zdot_q", "z_2p", "z_2q")

CONTROL_COLUMNS = (
    [f"q_d_{a}" for a in "xyz"] + [f"qdot_d_{a}" for a in "xyz"] + [f"qddot_d_{a}" for a in "xyz"]
    + [f"{n}_{a}" for n in ("z_p", "zdot_p", "z_2p", "alpha_p", "alphadot_p",
                            "z_q", "zdot_q", "z_2q", "alpha_q", "alphadot_q", "zqdot_vee")
       for a in "xyz"]
    + [f"tau_p_{a}" for a in "xyz"] + ["u1"] + [f"tau_q_{a}" for a in "xyz"]
    + [f"{n}_{a}" for n in ("nu_p", "nu_q", "nubar_p", "nubar_q") for a in "xyz"]
    + ["rho_p", "rho_q", "phi_raw", "theta_raw", "V", "violation"])
COL = {name: i for i, name in enumerate(CONTROL_COLUMNS)}


def _slice(name):
    i = COL[name + "_x"]
    return slice(i, i + 3)


@njit(cache=True)
def _outer(mode, p, v, ref, L1, L2, kp, k2p, eps, rob):
    pd, pd_dot, pd_ddot = ref[0:3], ref[3:6], ref[6:9]
    z = p - pd
    zdot = v - pd_dot
    alpha = -L1 * z + pd_dot
    z2 = v - alpha
    alphadot = -L1 * zdot + pd_ddot
    if mode == 0:
        nubar = alphadot - z / (kp * kp - z * z) - L2 * z2
    elif mode == 1:
        nubar = alphadot - (k2p * k2p - z2 * z2) / (kp * kp - z * z) * z - L2 * z2
    else:
        nubar = alphadot.copy()
    rho = _rho_p(np.sqrt(np.sum(nubar * nubar)), rob)
    nu = nubar - rho * _sat(z2, eps)
    tau = rob[0] * nu
    tau[2] += rob[0] * rob[8]
    return tau, nu, nubar, rho, z, zdot, z2, alpha, alphadot


@njit(cache=True)
def _inner(mode, q, w, qd, qd_dot, qd_ddot, L1, L2, kq, k2q, eps, rob):
    R = _rot(q[0], q[1], q[2])
    Rd = _rot(qd[0], qd[1], qd[2])
    zq = _attitude_error(R, Rd)
    zq_rate = _attitude_error_rate(R, Rd, _rot_dot(q, w), _rot_dot(qd, qd_dot))
    zdot = w - qd_dot
    alpha = -L1 * zq + qd_dot
    z2 = w - alpha
    alphadot = -L1 * zq_rate + qd_ddot
    if mode == 0:
        nubar = alphadot - zq / (kq * kq - zq * zq) - L2 * z2
    elif mode == 1:
        nubar = alphadot - (k2q * k2q - z2 * z2) / (kq * kq - zq * zq) * zq - L2 * z2
    else:
        nubar = alphadot.copy()
    rho = _rho_q(np.sqrt(np.sum(nubar * nubar)), np.sqrt(np.sum(w * w)), rob)
    nu = nubar - rho * _sat(z2, eps)
    Jb = rob[1:4]
    tau = Jb * nu + _cross(w, Jb * w)
    return tau, nu, nubar, rho, zq, zdot, z2, alpha, alphadot, zq_rate


@njit(cache=True)
def _lyap(mode, zp, z2p, zq, z2q, kp, kq, k2p, k2q):
    if mode == 2:
        return 0.5 * (np.sum(zp * zp) + np.sum(z2p * z2p) + np.sum(zq * zq) + np.sum(z2q * z2q))
    V = _log_barrier(zp, kp)
    V += _log_barrier(zq, kq)
    if mode == 0:
        V += 0.5 * (np.sum(z2p * z2p) + np.sum(z2q * z2q))
    else:
        V += _log_barrier(z2p, k2p)
        V += _log_barrier(z2q, k2q)
    return V


@njit(cache=True)
def _violation(zp, zq, zdp, zdq, z2p, z2q, limits):
    """First breached (family, axis) as ``1 + 3*family + axis``, 0 if none."""
    for f in range(6):
        if f == 0:
            e = zp
        elif f == 1:
            e = zq
        elif f == 2:
            e = zdp
        elif f == 3:
            e = zdq
        elif f == 4:
            e = z2p
        else:
            e = z2q
        for a in range(3):
            if not np.abs(e[a]) < limits[3 * f + a]:
                return 1 + 3 * f + a
    return 0


@njit(cache=True)
def _put(out, i, v):
    for j in range(v.shape[0]):
        out[i + j] = v[j]
    return i + v.shape[0]


@njit(cache=True)
def _quad_step(mode, x, ref, fs, wn, Phi, Gam, gp, kp, kq, k2p, k2q, rob, limits):
    tau_p, nu_p, nubar_p, rho_p, zp, zdp, z2p, ap, adp = _outer(
        mode, x[0:3], x[3:6], ref, gp[0:3], gp[3:6], kp, k2p, gp[12], rob)
    phi_r, th_r, Rd_raw, flag = _desired_attitude(tau_p, ref[9])
    u = np.array([phi_r, th_r])
    ang, rate, acc = _filter_outputs(fs, u, wn)
    qd = np.array([ang[0], ang[1], ref[9]])
    qd_dot = np.array([rate[0], rate[1], ref[10]])
    qd_ddot = np.array([acc[0], acc[1], ref[11]])
    tau_q, nu_q, nubar_q, rho_q, zq, zdq, z2q, aq, adq, zq_rate = _inner(
        mode, x[6:9], x[9:12], qd, qd_dot, qd_ddot, gp[6:9], gp[9:12], kq, k2q, gp[13], rob)
    code = _violation(zp, zq, zdp, zdq, z2p, z2q, limits)
    V = np.nan
    if code == 0:
        V = _lyap(mode, zp, z2p, zq, z2q, kp, kq, k2p, k2q)
    out = np.empty(67)
    i = _put(out, 0, qd)
    i = _put(out, i, qd_dot)
    i = _put(out, i, qd_ddot)
    for v in (zp, zdp, z2p, ap, adp, zq, zdq, z2q, aq, adq, zq_rate, tau_p):
        i = _put(out, i, v)
    out[i] = np.sqrt(np.sum(tau_p * tau_p))
    i += 1
    for v in (tau_q, nu_p, nu_q, nubar_p, nubar_q):
        i = _put(out, i, v)
    out[i] = rho_p
    out[i + 1] = rho_q
    out[i + 2] = phi_r
    out[i + 3] = th_r
    out[i + 4] = V
    out[i + 5] = code
    return out, _filter_advance(fs, u, Phi, Gam), flag


@njit(cache=True)
def _quad_V(mode, x, ref, qd, qd_dot, gp, kp, kq, k2p, k2q):
    """Lyapunov value at state x for given desired attitude and its rate."""
    zp = x[0:3] - ref[0:3]
    z2p = x[3:6] - (-gp[0:3] * zp + ref[3:6])
    R = _rot(x[6], x[7], x[8])
    Rd = _rot(qd[0], qd[1], qd[2])
    zq = _attitude_error(R, Rd)
    z2q = x[9:12] - (-gp[6:9] * zq + qd_dot)
    return _lyap(mode, zp, z2p, zq, z2q, kp, kq, k2p, k2q)


assert len(CONTROL_COLUMNS) == 67


# ---------------------------------------------------------------------------
# public single-call API
# ---------------------------------------------------------------------------

def _check(name, e, k):
    bad = np.flatnonzero(~(np.abs(e) < k))
    if bad.size:
        raise ConstraintBoundaryReached("%s[%d]=%.6g reached bound %.6g"
                                        % (name, bad[0], e[bad[0]], k[bad[0]]),
                                        family=name, index=int(bad[0]))


def _ref_vec(p_d, pd_dot, pd_ddot, psi=(0.0, 0.0, 0.0)):
    return np.concatenate([np.asarray(p_d, float), np.asarray(pd_dot, float),
                           np.asarray(pd_ddot, float), np.asarray(psi, float)])


def _outer_api(mode, state, p_d, pd_dot, pd_ddot, gains, constraints, robust):
    ref = _ref_vec(p_d, pd_dot, pd_ddot)
    k2p = constraints.k_2p(gains) if mode == 1 else np.ones(3)
    kp = constraints.k_p if mode != 2 else np.ones(3)
    res = _outer(mode, np.asarray(state.p, float), np.asarray(state.v, float), ref,
                 gains.Lambda_1p, gains.Lambda_2p, kp, k2p, gains.eps_p, robust.packed())
    tau, nu, nubar, rho, z, zdot, z2, alpha, alphadot = res
    if mode != 2:
        _check("z_p", z, constraints.k_p)
    if mode == 1:
        _check("z_2p", z2, k2p)
    return res


def outer_loop_rsb(state, p_d, pd_dot, pd_ddot, gains, constraints, robust):
    """Position loop with a barrier on z_p.

    Returns
    -------
    tau_p : ndarray
        ``m_bar nu_p + [0, 0, m_bar g]``.
    alpha_p, alphadot_p : ndarray
        Virtual velocity and its analytic derivative.
    rho_p : float
    nu_bar_p : ndarray
        Nominal virtual control before the robust term.
    """
    tau, nu, nubar, rho, z, zdot, z2, alpha, alphadot = _outer_api(
        0, state, p_d, pd_dot, pd_ddot, gains, constraints, robust)
    return tau, alpha, alphadot, rho, nubar


def outer_loop_full_state(state, p_d, pd_dot, pd_ddot, gains, constraints, robust):
    """Position loop with barriers on z_p and z_2p; returns ``(tau_p, rho_p, nu_bar_p)``."""
    tau, nu, nubar, rho, *_ = _outer_api(1, state, p_d, pd_dot, pd_ddot, gains,
                                         constraints, robust)
    return tau, rho, nubar


def _inner_api(mode, state, q_d, qd_dot, qd_ddot, gains, constraints, robust):
    k2q = constraints.k_2q(gains) if mode == 1 else np.ones(3)
    kq = constraints.k_q if mode != 2 else np.ones(3)
    res = _inner(mode, np.asarray(state.q, float), np.asarray(state.w, float),
                 np.asarray(q_d, float), np.asarray(qd_dot, float), np.asarray(qd_ddot, float),
                 gains.Lambda_1q, gains.Lambda_2q, kq, k2q, gains.eps_q, robust.packed())
    if mode != 2:
        _check("z_q", res[4], constraints.k_q)
    if mode == 1:
        _check("z_2q", res[6], k2q)
    return res


def inner_loop_rsb(state, q_d, qd_dot, qd_ddot, gains, constraints, robust):
    """Attitude loop with a barrier on z_q; returns ``(tau_q, rho_q)``.

    The desired rotation is ``rotation_zyx(*q_d)``.
    """
    res = _inner_api(0, state, q_d, qd_dot, qd_ddot, gains, constraints, robust)
    return res[0], res[3]


def inner_loop_full_state(state, q_d, qd_dot, qd_ddot, gains, constraints, robust):
    """Attitude loop with barriers on z_q and z_2q; returns ``(tau_q, rho_q)``."""
    res = _inner_api(1, state, q_d, qd_dot, qd_ddot, gains, constraints, robust)
    return res[0], res[3]


def smc_control(state, ref, gains, robust, loop="position"):
    """Boundary-layer sliding-mode law for one loop.

    Parameters
    ----------
    ref : tuple
        ``(p_d, pd_dot, pd_ddot)`` for the position loop or
        ``(q_d, qd_dot, qd_ddot)`` for the attitude loop.
    loop : {"position", "attitude"}

    Returns
    -------
    ndarray
        Force ``m_bar (p''_d - L1 zdot - rho sat(s, eps)) + g_bar`` or the
        analogous torque with ``C_bar q'`` feedforward.
    """
    if loop == "position":
        res = _outer(2, np.asarray(state.p, float), np.asarray(state.v, float), _ref_vec(*ref),
                     gains.Lambda_1p, gains.Lambda_2p, np.ones(3), np.ones(3), gains.eps_p,
                     robust.packed())
        return res[0]
    if loop == "attitude":
        res = _inner(2, np.asarray(state.q, float), np.asarray(state.w, float),
                     *(np.asarray(r, float) for r in ref), gains.Lambda_1q, gains.Lambda_2q,
                     np.ones(3), np.ones(3), gains.eps_q, robust.packed())
        return res[0]
    raise ValueError("loop must be 'position' or 'attitude'")


# ---------------------------------------------------------------------------
# stateful controller used by the simulator
# ---------------------------------------------------------------------------

class QuadController:
    """Cascade controller instance holding the desired-attitude filter.

    One instance serves exactly one simulation run.

    Parameters
    ----------
    kind : {"rsb", "full_state", "smc"}
    gains : GainSet
    constraints : ConstraintSet
    robust : RobustModel
    dt : float
        Control period (filter discretization).
    filter_tc : float
        Time constant of the desired-angle command filter.
    """

    def __init__(self, kind, gains, constraints, robust, dt=1e-3, filter_tc=0.005):
        if kind not in MODES:
            raise ValueError("unknown quadrotor controller %r" % kind)
        self.kind = kind
        self.mode = MODES[kind]
        self.barrier = kind != "smc"
        self.gains = gains
        self.constraints = constraints
        self.robust = robust
        self.filter = CommandFilter(filter_tc, dt)
        self._gp = gains.packed()
        self._rob = robust.packed()
        ones = np.ones(3)
        self._kp = constraints.k_p if constraints.k_p is not None else ones
        self._kq = constraints.k_q if constraints.k_q is not None else ones
        full = self.mode == 1
        self._k2p = constraints.k_2p(gains) if full else ones
        self._k2q = constraints.k_2q(gains) if full else ones
        self.limits = self.monitored_limits()
        self._pending = None

    @property
    def which(self):
        return {0: "ch3", 1: "ch4", 2: "quadratic"}[self.mode]

    def monitored_limits(self):
        """Bounds checked every step, flattened in ``FAMILIES`` order."""
        c = self.constraints
        inf = np.full(3, np.inf)
        fam = [c.k_p, c.k_q, c.kdot_p, c.kdot_q,
               self._k2p if self.mode == 1 else None, self._k2q if self.mode == 1 else None]
        return np.concatenate([inf if f is None else np.asarray(f, float) for f in fam])

    def stability_rate(self):
        """Decay rate of the Lyapunov bound outside the boundary layers."""
        g = self.gains
        return float(min(g.Lambda_1p.min(), g.Lambda_1q.min(), g.Lambda_2p.min(),
                         g.Lambda_2q.min()))

    def reset(self, x, ref):
        """Initialize the filter at the raw desired angles with zero rate."""
        res = _outer(self.mode, x[0:3], x[3:6], ref, self._gp[0:3], self._gp[3:6], self._kp,
                     self._k2p, self._gp[12], self._rob)
        phi, theta, _, flag = _desired_attitude(res[0], ref[9])
        self._raise_flag(flag)
        self.filter.reset((phi, theta))

    def step(self, x, ref):
        """Control for state ``x`` and packed reference ``ref``.

        Returns the flat output vector laid out as ``CONTROL_COLUMNS``. The
        filter advance is deferred until :meth:`commit`.
        """
        f = self.filter
        out, fs_next, flag = _quad_step(self.mode, x, ref, f.state, f.wn, f.Phi, f.Gam, self._gp,
                                        self._kp, self._kq, self._k2p, self._k2q, self._rob,
                                        self.limits)
        self._raise_flag(flag)
        self._pending = fs_next
        return out

    def commit(self):
        self.filter.state = self._pending

    def desired_at(self, out, h):
        """Desired attitude and rate a time ``h`` along the filter flow."""
        qd = out[COL["q_d_x"]:COL["q_d_x"] + 3] + h * out[COL["qdot_d_x"]:COL["qdot_d_x"] + 3]
        qdd = out[COL["qdot_d_x"]:COL["qdot_d_x"] + 3] + h * out[COL["qddot_d_x"]:COL["qddot_d_x"] + 3]
        return qd, qdd

    def lyapunov_at(self, x, ref, qd, qd_dot):
        return _quad_V(self.mode, x, ref, qd, qd_dot, self._gp, self._kp, self._kq,
                       self._k2p, self._k2q)

    @staticmethod
    def _raise_flag(flag):
        if flag == 1:
            raise ZeroThrustDirection("commanded force is zero")
        if flag == 2:
            raise DegenerateThrustDirection("thrust axis parallel to the heading axis")

    @staticmethod
    def unpack(out):
        """Split a flat output vector into ``(ControlOutput, ErrorState)``."""
        s = _slice
        ctl = ControlOutput(tau_p=out[s("tau_p")].copy(), u1=float(out[COL["u1"]]),
                            tau_q=out[s("tau_q")].copy(), rho_p=float(out[COL["rho_p"]]),
                            rho_q=float(out[COL["rho_q"]]),
                            diagnostics={"nu_p": out[s("nu_p")].copy(),
                                         "nu_q": out[s("nu_q")].copy()})
        err = ErrorState(z_p=out[s("z_p")].copy(), z_2p=out[s("z_2p")].copy(),
                         zdot_p=out[s("zdot_p")].copy(), z_q=out[s("z_q")].copy(),
                         z_2q=out[s("z_2q")].copy(), zdot_q=out[s("zdot_q")].copy(),
                         alpha_p=out[s("alpha_p")].copy(), alpha_q=out[s("alpha_q")].copy(),
                         alphadot_p=out[s("alphadot_p")].copy(),
                         alphadot_q=out[s("alphadot_q")].copy())
        return ctl, err
