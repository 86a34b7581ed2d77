"""Robust gain synthesis and the true lumped uncertainty used for auditing.

The gains bound the lumped uncertainty

    eta_p = (m_bar/m - 1) nu_p + (g_bar - g - d_p)/m
    eta_q = (J^-1 J_bar - I) nu_q - J^-1 (dC q' + d_q)

over every plant admitted by the envelope ``|m_bar/m - 1| <= E_p`` and
``|J_bar_i/J_i - 1| <= E_q``. Since ``|nu| <= |nu_bar| + rho``, a gain with
``rho (1 - E) >= E |nu_bar| + (other terms)`` dominates ``|eta|``.
"""

import numpy as np
from numba import njit

from ..errors import InvalidUncertaintyBound
from ..se3 import _cross

# layout of RobustModel.packed()
_MB, _JB, _EP, _EQ, _DPN, _DQN, _G = 0, 1, 4, 5, 6, 7, 8


@njit(cache=True)
def _rho_p(nubar_norm, rob):
    E = rob[_EP]
    # |g_bar - g|/m = |m_bar/m - 1| g <= E g and 1/m <= (1 + E)/m_bar
    rest = E * rob[_G] + (1.0 + E) / rob[_MB] * rob[_DPN]
    return (E * nubar_norm + rest) / (1.0 - E)


@njit(cache=True)
def _rho_q(nubar_norm, w_norm, rob):
    E = rob[_EQ]
    jmin = min(rob[_JB], min(rob[_JB + 1], rob[_JB + 2]))
    jmax = max(rob[_JB], max(rob[_JB + 1], rob[_JB + 2]))
    jinv = (1.0 + E) / jmin
    # |(J - J_bar) q'| <= max_i |J_i - J_bar_i| |q'| and |J_i - J_bar_i| <= J_bar_i E/(1-E)
    dC = E / (1.0 - E) * jmax * w_norm
    return (E * nubar_norm + jinv * (dC * w_norm + rob[_DQN])) / (1.0 - E)


@njit(cache=True)
def _eta_p(nu_p, m, m_bar, g, d_p):
    eta = (m_bar / m - 1.0) * nu_p - d_p / m
    eta[2] += (m_bar - m) * g / m
    return eta


@njit(cache=True)
def _eta_q(nu_q, w, J, J_bar, d_q):
    # C(q') = -skew(J q')  =>  dC q' = q' x ((J - J_bar) q')
    dCw = _cross(w, (J - J_bar) * w)
    return (J_bar / J - 1.0) * nu_q - (dCw + d_q) / J


def rho_p_gain(nu_bar_p, robust):
    """Position-loop robust gain.

    Parameters
    ----------
    nu_bar_p : array_like, shape (3,)
        Nominal virtual control.
    robust : RobustModel

    Returns
    -------
    float
        ``(E_p |nu_bar| + E_p g + (1+E_p)|d_p|/m_bar) / (1 - E_p)``.
    """
    if robust.E_p >= 1.0:
        raise InvalidUncertaintyBound("E_p must be below 1")
    return float(_rho_p(float(np.linalg.norm(nu_bar_p)), robust.packed()))


def rho_q_gain(nu_bar_q, qdot, robust):
    """Attitude-loop robust gain for nominal virtual control ``nu_bar_q`` at rate ``qdot``."""
    if robust.E_q >= 1.0:
        raise InvalidUncertaintyBound("E_q must be below 1")
    return float(_rho_q(float(np.linalg.norm(nu_bar_q)), float(np.linalg.norm(qdot)),
                        robust.packed()))


def true_eta_p(nu_p, m, robust, d_p):
    """Lumped position uncertainty for true mass ``m`` and disturbance ``d_p``."""
    return _eta_p(np.asarray(nu_p, float), float(m), robust.m_bar, robust.g,
                  np.asarray(d_p, float))


def true_eta_q(nu_q, qdot, J, robust, d_q):
    """Lumped attitude uncertainty for true inertia diagonal ``J`` and torque ``d_q``."""
    return _eta_q(np.asarray(nu_q, float), np.asarray(qdot, float), np.asarray(J, float),
                  robust.J_bar, np.asarray(d_q, float))
