"""Forward dynamics: two-link manipulator and 6-DoF quadrotor.

Both plants expose small dataclasses for parameters and state plus compiled
RK4 kernels that take the control held constant over one step and evaluate
disturbances at the Runge-Kutta stage times.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .errors import NonPositiveMass, SingularInertia, ZeroThrustDirection
from .se3 import _cross, _rot

GRAVITY = 9.81

# ---------------------------------------------------------------------------
# disturbances
# ---------------------------------------------------------------------------

_KIND_CODES = {"none": 0, "sinusoid": 1, "wind": 2}


@dataclass(frozen=True)
class DisturbanceModel:
    """Bounded exogenous disturbance.

    ``sinusoid``: ``d_i(t) = amplitude_i * sin(frequency * t + phase_i)``.

    ``wind``: a force of magnitude ``F(t) = mean + sum_j a_j sin(w_j t + p_j)``
    blowing along azimuth ``direction``. The returned disturbance is the
    negative of that force, since it enters as ``m p'' + g + d = tau``.

    Parameters
    ----------
    kind : {"none", "sinusoid", "wind"}
    amplitude : array_like
        Per-axis amplitude (sinusoid). Its length sets the dimension.
    frequency : float
        Angular frequency in rad/s (sinusoid).
    phase : array_like, optional
        Per-axis phase (sinusoid).
    direction : float
        Wind azimuth in rad, measured from +x.
    mean : float
        Mean wind force in N.
    gust_amp, gust_freq, gust_phase : array_like
        Gust harmonics added to the mean force.
    """

    kind: str = "none"
    amplitude: tuple = (0.0, 0.0, 0.0)
    frequency: float = 0.0
    phase: tuple = None
    direction: float = 0.0
    mean: float = 0.0
    gust_amp: tuple = ()
    gust_freq: tuple = ()
    gust_phase: tuple = ()

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError("unknown disturbance kind %r" % self.kind)
        if len(self.gust_amp) != len(self.gust_freq) or len(self.gust_amp) != len(self.gust_phase):
            raise ValueError("gust harmonics need matching amp/freq/phase lengths")

    @property
    def dim(self):
        return len(self.amplitude)

    @property
    def bound(self):
        """Per-axis envelope ``|d_i(t)| <= bound_i``."""
        n = self.dim
        if self.kind == "sinusoid":
            return np.abs(np.asarray(self.amplitude, dtype=float))
        if self.kind == "wind":
            peak = abs(self.mean) + float(np.sum(np.abs(self.gust_amp)))
            return peak * np.abs(_wind_axis(self.direction, n))
        return np.zeros(n)

    def packed(self):
        """Flat float array consumed by the compiled evaluator."""
        n = self.dim
        amp = np.asarray(self.amplitude, dtype=float)
        ph = np.zeros(n) if self.phase is None else np.asarray(self.phase, dtype=float)
        head = [_KIND_CODES[self.kind], n, self.frequency, self.mean, len(self.gust_amp)]
        return np.concatenate([
            np.asarray(head, dtype=float), amp, ph, _wind_axis(self.direction, n),
            np.asarray(self.gust_amp, dtype=float), np.asarray(self.gust_freq, dtype=float),
            np.asarray(self.gust_phase, dtype=float)])


def _wind_axis(direction, n):
    a = np.zeros(n)
    if n >= 2:
        a[0] = np.cos(direction)
        a[1] = np.sin(direction)
    return a


@njit(cache=True)
def _disturbance(pk, t):
    kind = int(pk[0])
    n = int(pk[1])
    out = np.zeros(n)
    if kind == 1:
        w = pk[2]
        for i in range(n):
            out[i] = pk[5 + i] * np.sin(w * t + pk[5 + n + i])
    elif kind == 2:
        ng = int(pk[4])
        base = 5 + 3 * n
        f = pk[3]
        for j in range(ng):
            f += pk[base + j] * np.sin(pk[base + ng + j] * t + pk[base + 2 * ng + j])
        for i in range(n):
            out[i] = -f * pk[5 + 2 * n + i]
    return out


def eval_disturbance(model, t):
    """Disturbance vector of ``model`` at time ``t``."""
    return _disturbance(model.packed(), float(t))


NO_DISTURBANCE = DisturbanceModel()

# ---------------------------------------------------------------------------
# two-link manipulator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ManipulatorParams:
    """Two-link arm with point masses and viscous-sign friction."""

    m1: float = 10.0
    m2: float = 5.0
    l1: float = 0.2
    l2: float = 0.1
    fv1: float = 0.5
    fv2: float = 0.5
    g: float = GRAVITY
    friction_width: float = 0.01

    def __post_init__(self):
        if min(self.m1, self.m2, self.l1, self.l2) <= 0:
            raise ValueError("masses and lengths must be positive")

    def packed(self):
        return np.array([self.m1, self.m2, self.l1, self.l2, self.fv1, self.fv2,
                         self.g, self.friction_width])


@dataclass(frozen=True)
class ELState:
    """Generalized coordinates and velocities."""

    q: np.ndarray
    qdot: np.ndarray

    def as_array(self):
        return np.concatenate([np.asarray(self.q, float), np.asarray(self.qdot, float)])


@njit(cache=True)
def _manip_M(q, par):
    m1, m2, l1, l2 = par[0], par[1], par[2], par[3]
    c2 = np.cos(q[1])
    M = np.empty((2, 2))
    M[0, 0] = (m1 + m2) * l1 * l1 + m2 * l2 * (l2 + 2.0 * l1 * c2)
    M[0, 1] = m2 * l2 * (l2 + l1 * c2)
    M[1, 0] = M[0, 1]
    M[1, 1] = m2 * l2 * l2
    return M


@njit(cache=True)
def _manip_C(q, qd, par):
    h = par[1] * par[2] * par[3] * np.sin(q[1])
    C = np.empty((2, 2))
    C[0, 0] = -h * qd[1]
    C[0, 1] = -h * (qd[0] + qd[1])
    C[1, 0] = h * qd[0]
    C[1, 1] = 0.0
    return C


@njit(cache=True)
def _manip_gravity(q, par):
    m1, m2, l1, l2, g = par[0], par[1], par[2], par[3], par[6]
    c1 = np.cos(q[0])
    c12 = np.cos(q[0] + q[1])
    out = np.empty(2)
    out[0] = m1 * l1 * g * c1 + m2 * g * (l2 * c12 + l1 * c1)
    out[1] = m2 * g * l2 * c12
    return out


@njit(cache=True)
def _manip_friction(qd, par):
    out = np.empty(2)
    out[0] = par[4] * np.tanh(qd[0] / par[7])
    out[1] = par[5] * np.tanh(qd[1] / par[7])
    return out


@njit(cache=True)
def _manip_H(q, qd, d, par):
    """Everything except the inertial term: ``C qdot + g + f + d``."""
    return _manip_C(q, qd, par) @ qd + _manip_gravity(q, par) + _manip_friction(qd, par) + d


@njit(cache=True)
def _manip_accel(q, qd, tau, d, par):
    M = _manip_M(q, par)
    rhs = tau - _manip_H(q, qd, d, par)
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    out = np.empty(2)
    out[0] = (M[1, 1] * rhs[0] - M[0, 1] * rhs[1]) / det
    out[1] = (M[0, 0] * rhs[1] - M[1, 0] * rhs[0]) / det
    return out


@njit(cache=True)
def _manip_deriv(x, tau, t, par, dist):
    d = _disturbance(dist, t)
    dx = np.empty(4)
    dx[:2] = x[2:]
    dx[2:] = _manip_accel(x[:2], x[2:], tau, d, par)
    return dx


@njit(cache=True)
def _manip_rk4(x, tau, t, dt, par, dist):
    k1 = _manip_deriv(x, tau, t, par, dist)
    k2 = _manip_deriv(x + 0.5 * dt * k1, tau, t + 0.5 * dt, par, dist)
    k3 = _manip_deriv(x + 0.5 * dt * k2, tau, t + 0.5 * dt, par, dist)
    k4 = _manip_deriv(x + dt * k3, tau, t + dt, par, dist)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def _manip_euler(x, tau, t, dt, par, dist):
    return x + dt * _manip_deriv(x, tau, t, par, dist)


class Manipulator:
    """Two-link planar arm ``M q'' + C q' + g + f + d = tau``."""

    n = 2

    def __init__(self, params=None, disturbance=None):
        self.params = params or ManipulatorParams()
        self.disturbance = disturbance or DisturbanceModel("none", amplitude=(0.0, 0.0))
        self._par = self.params.packed()
        self._dist = self.disturbance.packed()

    def mass_matrix(self, q):
        return _manip_M(np.asarray(q, float), self._par)

    def coriolis(self, q, qdot):
        return _manip_C(np.asarray(q, float), np.asarray(qdot, float), self._par)

    def gravity(self, q):
        return _manip_gravity(np.asarray(q, float), self._par)

    def friction(self, qdot):
        return _manip_friction(np.asarray(qdot, float), self._par)

    def disturbance_at(self, t):
        return _disturbance(self._dist, float(t))

    def bias(self, q, qdot, t):
        """Nonlinear terms ``H = C q' + g + f + d(t)``."""
        return _manip_H(np.asarray(q, float), np.asarray(qdot, float),
                        self.disturbance_at(t), self._par)

    def accel(self, state, torque, t):
        q = np.asarray(state.q, float)
        M = _manip_M(q, self._par)
        if np.linalg.cond(M) > 1e12:
            raise SingularInertia("manipulator mass matrix is singular")
        return _manip_accel(q, np.asarray(state.qdot, float), np.asarray(torque, float),
                            self.disturbance_at(t), self._par)


def manipulator_accel(state, torque, t, params=None, dist=None):
    """Joint accelerations ``M^-1 (tau - C q' - g - f - d)``."""
    return Manipulator(params, dist).accel(state, torque, t)


# ---------------------------------------------------------------------------
# quadrotor
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadrotorState:
    """Position, velocity, Euler angles (roll, pitch, yaw) and their rates."""

    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q: np.ndarray = field(default_factory=lambda: np.zeros(3))
    w: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def as_array(self):
        return np.concatenate([np.asarray(a, float) for a in (self.p, self.v, self.q, self.w)])

    @classmethod
    def from_array(cls, x):
        x = np.asarray(x, float)
        return cls(x[0:3].copy(), x[3:6].copy(), x[6:9].copy(), x[9:12].copy())


@dataclass(frozen=True)
class QuadrotorParams:
    """True vehicle parameters.

    ``J`` is the diagonal of a constant inertia matrix and the Coriolis term
    is ``C(q') = -skew(J q')``, so ``C q' = q' x (J q')`` and ``J' - 2C`` is
    skew-symmetric. ``payload_mass`` and ``com_offset`` describe the
    attached payload whose weight acts at the offset point.
    """

    m: float = 1.8
    J: tuple = (0.02, 0.02, 0.04)
    g: float = GRAVITY
    payload_mass: float = 0.0
    com_offset: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.m > 0:
            raise NonPositiveMass("vehicle mass must be positive")
        if min(self.J) <= 0:
            raise SingularInertia("inertia must be positive definite")

    @property
    def J_matrix(self):
        return np.diag(np.asarray(self.J, float))

    def packed(self):
        return np.concatenate([[self.m, self.g], np.asarray(self.J, float),
                               np.asarray(self.com_offset, float), [self.payload_mass]])


@dataclass(frozen=True)
class PayloadEvent:
    """Mass change at ``time``: positive ``delta_mass`` picks up, negative drops."""

    time: float
    delta_mass: float
    offset: tuple = (0.0, 0.0, 0.0)


def apply_payload_event(params, ev):
    """Return new plant parameters after a payload event.

    The nominal model held by the controller is untouched by design.
    """
    m = params.m + ev.delta_mass
    if m <= 0:
        raise NonPositiveMass("payload event leaves mass %.6g" % m)
    pm = max(params.payload_mass + ev.delta_mass, 0.0)
    if pm <= 1e-12:
        pm = 0.0
    offset = tuple(float(o) for o in ev.offset) if pm > 0 else (0.0, 0.0, 0.0)
    return replace(params, m=m, payload_mass=pm, com_offset=offset)


@njit(cache=True)
def _com_torque(q, phys):
    """Torque of the payload weight acting at the COM offset (body frame)."""
    R = _rot(q[0], q[1], q[2])
    fw = np.zeros(3)
    fw[2] = -phys[8] * phys[1]
    return _cross(phys[5:8], R.T @ fw)


@njit(cache=True)
def _quad_lin_accel(force, dp, phys):
    a = (force - dp) / phys[0]
    a[2] -= phys[1]
    return a


@njit(cache=True)
def _quad_ang_accel(w, tau_q, dq, phys):
    J = phys[2:5]
    return (tau_q - _cross(w, J * w) - dq) / J


@njit(cache=True)
def _quad_deriv(x, u1, tau_q, t, phys, dist_p, dist_q):
    R = _rot(x[6], x[7], x[8])
    force = R[:, 2] * u1
    dp = _disturbance(dist_p, t)
    dq = _disturbance(dist_q, t)
    if phys[8] > 0.0:
        dq = dq - _com_torque(x[6:9], phys)
    dx = np.empty(12)
    dx[0:3] = x[3:6]
    dx[3:6] = _quad_lin_accel(force, dp, phys)
    dx[6:9] = x[9:12]
    dx[9:12] = _quad_ang_accel(x[9:12], tau_q, dq, phys)
    return dx


@njit(cache=True)
def _quad_rk4(x, u1, tau_q, t, dt, phys, dist_p, dist_q):
    k1 = _quad_deriv(x, u1, tau_q, t, phys, dist_p, dist_q)
    k2 = _quad_deriv(x + 0.5 * dt * k1, u1, tau_q, t + 0.5 * dt, phys, dist_p, dist_q)
    k3 = _quad_deriv(x + 0.5 * dt * k2, u1, tau_q, t + 0.5 * dt, phys, dist_p, dist_q)
    k4 = _quad_deriv(x + dt * k3, u1, tau_q, t + dt, phys, dist_p, dist_q)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def _quad_euler(x, u1, tau_q, t, dt, phys, dist_p, dist_q):
    return x + dt * _quad_deriv(x, u1, tau_q, t, phys, dist_p, dist_q)


def _quad_disturbances(state, params, dist, t):
    """Translational and rotational disturbance at time t (COM torque included)."""
    dist_p, dist_q = (dist if dist is not None else (None, None))
    dp = np.zeros(3) if dist_p is None else eval_disturbance(dist_p, t)
    dq = np.zeros(3) if dist_q is None else eval_disturbance(dist_q, t)
    if params.payload_mass > 0:
        dq = dq - _com_torque(np.asarray(state.q, float), params.packed())
    return dp, dq


def quad_translational_accel(state, tau_p, params, dist=None, t=0.0):
    """``p'' = (tau_p - [0, 0, m g] - d_p) / m``.

    ``dist`` is a ``(translational, rotational)`` pair of disturbance models.
    """
    dp, _ = _quad_disturbances(state, params, dist, t)
    return _quad_lin_accel(np.asarray(tau_p, float), dp, params.packed())


def quad_rotational_accel(state, tau_q, params, dist=None, t=0.0):
    """``q'' = J^-1 (tau_q - C(q') q' - d_q)``."""
    _, dq = _quad_disturbances(state, params, dist, t)
    return _quad_ang_accel(np.asarray(state.w, float), np.asarray(tau_q, float), dq,
                           params.packed())


def coriolis_matrix(J, qdot):
    """``C(q') = -skew(J q')`` for a diagonal inertia ``J``."""
    from .se3 import skew
    return -skew(np.asarray(J, float) * np.asarray(qdot, float))


def realize_thrust(tau_p, R):
    """Collective thrust ``u1 = |tau_p|`` and the force it produces, ``R e3 u1``."""
    tau_p = np.asarray(tau_p, float)
    u1 = float(np.linalg.norm(tau_p))
    if u1 < 1e-9:
        raise ZeroThrustDirection("commanded force is zero")
    return u1, np.asarray(R, float)[:, 2] * u1
