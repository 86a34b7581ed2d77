"""Barrier tracking controllers for fully actuated Euler-Lagrange plants,
plus the PID baseline.

With ``z1 = q - q_d``, ``alpha = -D^-1 K1 z1 + q'_d`` and ``z2 = q' - alpha``,
the law ``tau = M (alpha' - K2 z2 - D z1) + H`` gives
``V' = -z1^T K1 z1 - z2^T K2 z2`` for ``V = sum 1/2 log(k^2/(k^2 - z1^2)) + |z2|^2/2``.
"""

import numpy as np
from numba import njit

from ..errors import ConstraintBoundaryReached
from ..plants import _disturbance, _manip_gravity, _manip_H, _manip_M
from ..se3 import _asym_select, _log_barrier

EL_COLUMNS = ([f"{n}_{i}" for n in ("z1", "z1dot", "z2", "alpha", "alphadot", "tau")
               for i in (1, 2)] + ["V", "violation"])


@njit(cache=True)
def _blf_el(asym, verbatim, q, qd, ref, K1, K2, k_a, k_b):
    """Return ``(u, z1, z1dot, z2, alpha, alphadot, V)`` for the barrier law.

    ``ref`` packs ``q_d, q'_d, q''_d``. The active bound is ``k_b`` for
    positive errors and ``k_a`` otherwise (``k_b`` everywhere if symmetric).
    """
    n = q.shape[0]
    q_d, qd_d, qdd_d = ref[0:n], ref[n:2 * n], ref[2 * n:3 * n]
    z1 = q - q_d
    z1dot = qd - qd_d
    if asym:
        ks = _asym_select(z1, k_a, k_b, verbatim)
    else:
        ks = k_b.copy()
    dinv = ks * ks - z1 * z1
    kz = K1 @ z1
    alpha = -dinv * kz + qd_d
    z2 = qd - alpha
    # d/dt[(k^2 - z^2) K1 z] = -2 z z' (K1 z) + (k^2 - z^2) K1 z'
    alphadot = -(-2.0 * z1 * z1dot * kz + dinv * (K1 @ z1dot)) + qdd_d
    u = alphadot - K2 @ z2 - z1 / dinv
    V = _log_barrier(z1, ks) + 0.5 * np.sum(z2 * z2)
    return u, z1, z1dot, z2, alpha, alphadot, V


@njit(cache=True)
def _pack_el(z1, z1dot, z2, alpha, alphadot, tau, V, code):
    n = z1.shape[0]
    out = np.empty(6 * n + 2)
    out[0:n] = z1
    out[n:2 * n] = z1dot
    out[2 * n:3 * n] = z2
    out[3 * n:4 * n] = alpha
    out[4 * n:5 * n] = alphadot
    out[5 * n:6 * n] = tau
    out[6 * n] = V
    out[6 * n + 1] = code
    return out


@njit(cache=True)
def _el_violation(z1, lower, upper):
    for i in range(z1.shape[0]):
        if not (z1[i] < upper[i] and z1[i] > -lower[i]):
            return 1 + i
    return 0


@njit(cache=True)
def _blf_step(asym, verbatim, x, ref, t, par, dist, K1, K2, k_a, k_b, lower, upper):
    q, qd = x[0:2], x[2:4]
    u, z1, z1dot, z2, alpha, alphadot, V = _blf_el(asym, verbatim, q, qd, ref, K1, K2, k_a, k_b)
    tau = _manip_M(q, par) @ u + _manip_H(q, qd, _disturbance(dist, t), par)
    code = _el_violation(z1, lower, upper)
    if code != 0:
        V = np.nan
    return _pack_el(z1, z1dot, z2, alpha, alphadot, tau, V, code)


@njit(cache=True)
def _pid_step(x, ref, par, KP, KI, KD, integ, lower, upper):
    z1 = x[0:2] - ref[0:2]
    z1dot = x[2:4] - ref[2:4]
    tau = -(KP @ z1 + KI @ integ + KD @ z1dot) + _manip_gravity(x[0:2], par)
    V = 0.5 * (np.sum(z1 * z1) + np.sum(z1dot * z1dot))
    code = _el_violation(z1, lower, upper)
    return _pack_el(z1, z1dot, z1dot, ref[2:4].copy(), ref[4:6].copy(), tau, V, code)


def _diag(K, n):
    K = np.asarray(K, dtype=float)
    return np.diag(np.broadcast_to(K, (n,)).astype(float)) if K.ndim < 2 else K


def _bounds_check(z1, lower, upper):
    bad = np.flatnonzero(~((z1 < upper) & (z1 > -lower)))
    if bad.size:
        raise ConstraintBoundaryReached("joint error %d at %.6g outside (-%.6g, %.6g)"
                                        % (bad[0], z1[bad[0]], lower[bad[0]], upper[bad[0]]),
                                        family="z_1", index=int(bad[0]))


def _el_control(asym, state, ref, gains, k_a, k_b, plant_model, t, verbatim):
    q = np.asarray(state.q, float)
    qd = np.asarray(state.qdot, float)
    n = q.shape[0]
    k_b = np.broadcast_to(np.asarray(k_b, float), (n,)).copy()
    k_a = k_b.copy() if k_a is None else np.broadcast_to(np.asarray(k_a, float), (n,)).copy()
    ref = np.concatenate([np.asarray(r, float) for r in ref])
    _bounds_check(q - ref[:n], k_b if (verbatim or not asym) else k_a, k_b)
    u = _blf_el(asym, verbatim, q, qd, ref, gains.K_1, gains.K_2, k_a, k_b)[0]
    return plant_model.mass_matrix(q) @ u + plant_model.bias(q, qd, t)


def blf_sym_control(state, ref, gains, k_b, plant_model, t=0.0):
    """Symmetric barrier tracking law ``tau = M u + H``.

    Parameters
    ----------
    state : ELState
    ref : tuple of arrays
        ``(q_d, q'_d, q''_d)``.
    gains : GainSet
        Uses ``K_1`` and ``K_2``.
    k_b : array_like
        Bounds on ``|q - q_d|``.
    plant_model : Manipulator
        Exact model providing ``M(q)`` and ``H(q, q', t)``.
    """
    return _el_control(False, state, ref, gains, None, k_b, plant_model, t, False)


def blf_asym_control(state, ref, gains, k_a, k_b, plant_model, t=0.0, verbatim=False):
    """Asymmetric barrier law enforcing ``-k_a < q - q_d < k_b``."""
    return _el_control(True, state, ref, gains, k_a, k_b, plant_model, t, verbatim)


def pid_control(state, ref, pid_gains, integral, plant_model):
    """PID with gravity feedforward, ``tau = -(KP z + KI int z + KD z') + g(q)``.

    ``integral`` is the running integral of the joint error.
    """
    q = np.asarray(state.q, float)
    n = q.shape[0]
    z1 = q - np.asarray(ref[0], float)
    z1dot = np.asarray(state.qdot, float) - np.asarray(ref[1], float)
    KP, KI, KD = (_diag(pid_gains[k], n) for k in ("K_P", "K_I", "K_D"))
    return -(KP @ z1 + KI @ np.asarray(integral, float) + KD @ z1dot) + plant_model.gravity(q)


class ELController:
    """Stateful wrapper used by the simulator for the manipulator.

    Parameters
    ----------
    kind : {"blf_sym", "blf_asym", "pid"}
    plant : Manipulator
        Exact model (barrier laws) or gravity source (PID).
    constraints : ConstraintSet
        Uses ``k_b`` and, for asymmetric bounds, ``k_a``.
    gains : GainSet, optional
    pid_gains : dict, optional
        ``K_P, K_I, K_D`` and ``integral_limit``.
    verbatim : bool
        Use the printed asymmetric gain with ``k_b`` in both branches.
    """

    def __init__(self, kind, plant, constraints, gains=None, pid_gains=None, dt=1e-3,
                 verbatim=False):
        if kind not in ("blf_sym", "blf_asym", "pid"):
            raise ValueError("unknown manipulator controller %r" % kind)
        self.kind = kind
        self.barrier = kind != "pid"
        self.plant = plant
        self.dt = dt
        self.verbatim = bool(verbatim)
        n = plant.n
        self.k_b = np.broadcast_to(np.asarray(constraints.k_b, float), (n,)).copy()
        self.k_a = (self.k_b.copy() if constraints.k_a is None
                    else np.broadcast_to(np.asarray(constraints.k_a, float), (n,)).copy())
        # monitored bounds follow the constraint set, not the controller
        self.upper = self.k_b
        self.lower = self.k_a
        if kind == "blf_sym" or (kind == "blf_asym" and self.verbatim):
            self.lower = np.minimum(self.k_a, self.k_b)
        self.gains = gains
        if pid_gains is not None:
            self.KP, self.KI, self.KD = (_diag(pid_gains[k], n) for k in ("K_P", "K_I", "K_D"))
            self.ilim = float(pid_gains.get("integral_limit", np.inf))
        self.integral = np.zeros(n)
        self._last_z = None

    @property
    def which(self):
        return {"blf_sym": "ch2_sym", "blf_asym": "ch2_asym", "pid": "quadratic"}[self.kind]

    def reset(self, x, ref):
        self.integral = np.zeros(self.plant.n)

    def step(self, x, ref, t):
        if self.kind == "pid":
            out = _pid_step(x, ref, self.plant._par, self.KP, self.KI, self.KD, self.integral,
                            self.lower, self.upper)
        else:
            out = _blf_step(self.kind == "blf_asym", self.verbatim, x, ref, t, self.plant._par,
                            self.plant._dist, self.gains.K_1, self.gains.K_2, self.k_a,
                            self.k_b, self.lower, self.upper)
        self._last_z = out[0:2]
        return out

    def commit(self):
        if self.kind == "pid":
            self.integral = np.clip(self.integral + self.dt * self._last_z, -self.ilim, self.ilim)

    def lyapunov_at(self, x, ref):
        if self.kind == "pid":
            z1 = x[0:2] - ref[0:2]
            z1dot = x[2:4] - ref[2:4]
            return 0.5 * (z1 @ z1 + z1dot @ z1dot)
        return _blf_el(self.kind == "blf_asym", self.verbatim, x[0:2], x[2:4], ref,
                       self.gains.K_1, self.gains.K_2, self.k_a, self.k_b)[6]
