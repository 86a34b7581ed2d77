"""Lyapunov functions of the closed loops."""

from dataclasses import dataclass

import numpy as np

from ..errors import ConstraintBoundaryReached


@dataclass
class ELErrorState:
    """Manipulator errors ``z_1 = q - q_d`` and ``z_2 = q' - alpha``."""

    z_1: np.ndarray
    z_2: np.ndarray


def _log_barrier(name, z, k):
    z = np.asarray(z, float)
    k = np.broadcast_to(np.asarray(k, float), z.shape)
    bad = np.flatnonzero(~(np.abs(z) < k))
    if bad.size:
        raise ConstraintBoundaryReached("%s[%d] outside its barrier" % (name, bad[0]),
                                        family=name, index=int(bad[0]))
    return -0.5 * float(np.sum(np.log1p(-(z / k) ** 2)))


def lyapunov_eval(errors, constraints, which, gains=None):
    """Barrier Lyapunov value.

    Parameters
    ----------
    errors : ErrorState or ELErrorState
    constraints : ConstraintSet
    which : {"ch2_sym", "ch2_asym", "ch3", "ch4"}
        ``ch2_*``: log barrier on z_1 plus ``|z_2|^2/2``.
        ``ch3``: log barriers on z_p, z_q plus ``(|z_2p|^2 + |z_2q|^2)/2``.
        ``ch4``: log barriers on z_p, z_q, z_2p and z_2q.
    gains : GainSet, optional
        Needed for ``ch4`` (derived bounds on z_2).
    """
    if which in ("ch2_sym", "ch2_asym"):
        z1 = np.asarray(errors.z_1, float)
        z2 = np.asarray(errors.z_2, float)
        k_b = np.broadcast_to(np.asarray(constraints.k_b, float), z1.shape)
        if which == "ch2_asym":
            k_a = np.broadcast_to(np.asarray(constraints.k_a, float), z1.shape)
            ks = np.where(z1 > 0, k_b, k_a)
        else:
            ks = k_b
        return _log_barrier("z_1", z1, ks) + 0.5 * float(z2 @ z2)
    if which == "ch3":
        V = _log_barrier("z_p", errors.z_p, constraints.k_p)
        V += _log_barrier("z_q", errors.z_q, constraints.k_q)
        z2p = np.asarray(errors.z_2p, float)
        z2q = np.asarray(errors.z_2q, float)
        return V + 0.5 * float(z2p @ z2p + z2q @ z2q)
    if which == "ch4":
        if gains is None:
            raise ValueError("ch4 Lyapunov function needs the gains for k_2p, k_2q")
        V = _log_barrier("z_p", errors.z_p, constraints.k_p)
        V += _log_barrier("z_q", errors.z_q, constraints.k_q)
        V += _log_barrier("z_2p", errors.z_2p, constraints.k_2p(gains))
        V += _log_barrier("z_2q", errors.z_2q, constraints.k_2q(gains))
        return V
    raise ValueError("unknown Lyapunov function %r" % which)
