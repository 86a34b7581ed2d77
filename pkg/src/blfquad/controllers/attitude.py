"""Desired attitude from the commanded force, and the command filter that
supplies consistent desired angles, rates and accelerations."""

import numpy as np
from numba import njit
from scipy.linalg import expm

from ..errors import DegenerateThrustDirection, ZeroThrustDirection
from ..se3 import _cross

NORM_GUARD = 1e-9


@njit(cache=True)
def _desired_attitude(tau_p, psi):
    """Return ``(phi_d, theta_d, R_d, flag)``; flag 1: zero force, 2: degenerate."""
    Rd = np.eye(3)
    n = np.sqrt(np.sum(tau_p * tau_p))
    if n < NORM_GUARD:
        return 0.0, 0.0, Rd, 1
    zb = tau_p / n
    ya = np.array([-np.sin(psi), np.cos(psi), 0.0])
    xb = _cross(ya, zb)
    nx = np.sqrt(np.sum(xb * xb))
    if nx < NORM_GUARD:
        return 0.0, 0.0, Rd, 2
    xb = xb / nx
    yb = _cross(zb, xb)
    for i in range(3):
        Rd[i, 0] = xb[i]
        Rd[i, 1] = yb[i]
        Rd[i, 2] = zb[i]
    s = min(1.0, max(-1.0, Rd[2, 0]))
    theta = -np.arcsin(s)
    phi = np.arctan2(Rd[2, 1], Rd[2, 2])
    return phi, theta, Rd, 0


def desired_attitude(tau_p, psi_d):
    """Desired roll, pitch and rotation aligning body z with ``tau_p``.

    Parameters
    ----------
    tau_p : array_like, shape (3,)
        Commanded force.
    psi_d : float
        Desired yaw.

    Returns
    -------
    phi_d, theta_d : float
    R_d : ndarray, shape (3, 3)
        Columns ``x_B, y_B, z_B`` with ``z_B = tau_p/|tau_p|``.
    """
    phi, theta, Rd, flag = _desired_attitude(np.asarray(tau_p, float), float(psi_d))
    if flag == 1:
        raise ZeroThrustDirection("commanded force is zero")
    if flag == 2:
        raise DegenerateThrustDirection("thrust axis parallel to the heading axis")
    return phi, theta, Rd


class CommandFilter:
    """Critically damped second-order filter on the desired roll and pitch.

    The filter output is used as the desired angle itself, so angle, rate and
    acceleration are mutually consistent. The input is held over each step
    and the update is the exact zero-order-hold discretization.

    Parameters
    ----------
    time_constant : float
        ``1/omega_n`` in seconds.
    dt : float
        Update period.
    """

    def __init__(self, time_constant, dt):
        self.wn = 1.0 / time_constant
        self.dt = dt
        wn = self.wn
        A = np.array([[0.0, 1.0], [-wn * wn, -2.0 * wn]])
        B = np.array([0.0, wn * wn])
        aug = np.zeros((3, 3))
        aug[:2, :2] = A
        aug[:2, 2] = B
        E = expm(aug * dt)
        self.Phi = E[:2, :2].copy()
        self.Gam = E[:2, 2].copy()
        self.state = np.zeros(4)  # phi, theta, phi_dot, theta_dot

    def reset(self, angles):
        self.state = np.array([angles[0], angles[1], 0.0, 0.0])

    def outputs(self, u):
        """Filtered angles, rates and accelerations for held input ``u``."""
        return _filter_outputs(self.state, np.asarray(u, float), self.wn)

    def advance(self, u):
        self.state = _filter_advance(self.state, np.asarray(u, float), self.Phi, self.Gam)

    def packed(self):
        return np.concatenate([[self.wn], self.Phi.ravel(), self.Gam])


@njit(cache=True)
def _filter_outputs(fs, u, wn):
    ang = fs[0:2].copy()
    rate = fs[2:4].copy()
    acc = wn * wn * (u - ang) - 2.0 * wn * rate
    return ang, rate, acc


@njit(cache=True)
def _filter_advance(fs, u, Phi, Gam):
    out = np.empty(4)
    for i in range(2):
        x0, x1 = fs[i], fs[2 + i]
        out[i] = Phi[0, 0] * x0 + Phi[0, 1] * x1 + Gam[0] * u[i]
        out[2 + i] = Phi[1, 0] * x0 + Phi[1, 1] * x1 + Gam[1] * u[i]
    return out
