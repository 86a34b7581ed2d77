"""Rotation, skew/vee, saturation and barrier-gain primitives.

Each public function validates its input and then calls a compiled kernel
(leading underscore) that the simulation loop uses directly.
"""

import numpy as np
from numba import njit

from .errors import ConstraintBoundaryReached, NonOrthonormalInput, NotSkewSymmetric

SKEW_TOL = 1e-9
ORTHO_TOL = 1e-9


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _rot(phi, theta, psi):
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(psi), np.sin(psi)
    R = np.empty((3, 3))
    R[0, 0] = cp * ct
    R[0, 1] = cp * st * sf - sp * cf
    R[0, 2] = cp * st * cf + sp * sf
    R[1, 0] = sp * ct
    R[1, 1] = sp * st * sf + cp * cf
    R[1, 2] = sp * st * cf - cp * sf
    R[2, 0] = -st
    R[2, 1] = sf * ct
    R[2, 2] = ct * cf
    return R


@njit(cache=True)
def _skew(v):
    S = np.zeros((3, 3))
    S[0, 1] = -v[2]
    S[0, 2] = v[1]
    S[1, 0] = v[2]
    S[1, 2] = -v[0]
    S[2, 0] = -v[1]
    S[2, 1] = v[0]
    return S


@njit(cache=True)
def _vee(M):
    out = np.empty(3)
    out[0] = M[2, 1]
    out[1] = M[0, 2]
    out[2] = M[1, 0]
    return out


@njit(cache=True)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def _euler_to_body(phi, theta, rates):
    """Body angular velocity for ZYX Euler rates, so that dR/dt = R skew(w)."""
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    w = np.empty(3)
    w[0] = rates[0] - st * rates[2]
    w[1] = cf * rates[1] + sf * ct * rates[2]
    w[2] = -sf * rates[1] + cf * ct * rates[2]
    return w


@njit(cache=True)
def _rot_dot(q, qdot):
    R = _rot(q[0], q[1], q[2])
    return R @ _skew(_euler_to_body(q[0], q[1], qdot))


@njit(cache=True)
def _sat(x, k):
    n = np.sqrt(np.sum(x * x))
    if n >= k:
        return x / n
    return x / k


@njit(cache=True)
def _log_barrier(z, k):
    """``sum 1/2 log(k^2/(k^2 - z^2))``, accurate for small ``z/k``."""
    r = z / k
    return -0.5 * np.sum(np.log1p(-r * r))


@njit(cache=True)
def _barrier_diag(z, k):
    return 1.0 / (k * k - z * z)


@njit(cache=True)
def _asym_select(z, k_a, k_b, verbatim):
    """Per-coordinate active bound: k_b for z > 0, k_a otherwise."""
    ks = np.empty(z.shape[0])
    for i in range(z.shape[0]):
        if z[i] > 0.0 or verbatim:
            ks[i] = k_b[i]
        else:
            ks[i] = k_a[i]
    return ks


@njit(cache=True)
def _asym_barrier_diag(z, k_a, k_b, verbatim):
    ks = _asym_select(z, k_a, k_b, verbatim)
    return 1.0 / (ks * ks - z * z)


@njit(cache=True)
def _attitude_error(R, Rd):
    return _vee(Rd.T @ R - R.T @ Rd)


@njit(cache=True)
def _attitude_error_rate(R, Rd, Rdot, Rd_dot):
    """Exact time derivative of ``vee(Rd^T R - R^T Rd)``."""
    A = Rd_dot.T @ R + Rd.T @ Rdot
    return _vee(A - A.T)


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def rotation_zyx(phi, theta, psi):
    """Z-Y-X Euler rotation from body to world frame.

    Parameters
    ----------
    phi, theta, psi : float
        Roll, pitch and yaw in radians.

    Returns
    -------
    ndarray, shape (3, 3)
        ``Rz(psi) @ Ry(theta) @ Rx(phi)``.
    """
    return _rot(float(phi), float(theta), float(psi))


def rotation_rate(q, qdot):
    """Time derivative of ``rotation_zyx(*q)`` for Euler-angle rates ``qdot``."""
    return _rot_dot(_vec(q, 3), _vec(qdot, 3))


def skew(v):
    """Cross-product matrix, ``skew(v) @ x == cross(v, x)``."""
    return _skew(_vec(v, 3))


def vee(M, tol=SKEW_TOL):
    """Inverse of :func:`skew`.

    Raises
    ------
    NotSkewSymmetric
        If ``max|M + M^T| > tol``.
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3):
        raise ValueError("vee expects a 3x3 matrix")
    if np.max(np.abs(M + M.T)) > tol:
        raise NotSkewSymmetric("matrix is not skew-symmetric within %g" % tol)
    return _vee(M)


def sat(x, k):
    """Vector saturation: ``x/|x|`` outside the ball of radius k, ``x/k`` inside."""
    if not k > 0:
        raise ValueError("boundary layer width must be positive")
    return _sat(np.asarray(x, dtype=float), float(k))


def barrier_gain(z, k):
    """Diagonal of the symmetric barrier gain, ``1/(k_i^2 - z_i^2)``.

    Returns the diagonal entries as a 1-D array.

    Raises
    ------
    ConstraintBoundaryReached
        If any ``|z_i| >= k_i``.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    k = np.broadcast_to(np.asarray(k, dtype=float), z.shape).copy()
    bad = np.flatnonzero(np.abs(z) >= k)
    if bad.size:
        raise ConstraintBoundaryReached(
            "error %d at %.6g reached bound %.6g" % (bad[0], z[bad[0]], k[bad[0]]),
            index=int(bad[0]))
    return _barrier_diag(z, k)


def asym_barrier_gain(z, k_a, k_b, verbatim=False):
    """Diagonal of the asymmetric barrier gain.

    Entry i is ``1/(k_b^2 - z^2)`` when ``z_i > 0`` and ``1/(k_a^2 - z^2)``
    otherwise. With ``verbatim=True`` the printed form is used, which has
    ``k_b`` in both branches.

    Raises
    ------
    ConstraintBoundaryReached
        If any coordinate leaves ``(-k_a, k_b)``.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    k_a = np.broadcast_to(np.asarray(k_a, dtype=float), z.shape).copy()
    k_b = np.broadcast_to(np.asarray(k_b, dtype=float), z.shape).copy()
    lower = k_b if verbatim else k_a
    bad = np.flatnonzero((z >= k_b) | (z <= -lower))
    if bad.size:
        raise ConstraintBoundaryReached(
            "error %d at %.6g left (-%.6g, %.6g)" % (bad[0], z[bad[0]], lower[bad[0]], k_b[bad[0]]),
            index=int(bad[0]))
    return _asym_barrier_diag(z, k_a, k_b, bool(verbatim))


def attitude_error(R, R_d):
    """Attitude error ``vee(R_d^T R - R^T R_d)`` (no 1/2 factor).

    Raises
    ------
    NonOrthonormalInput
        If either argument fails ``|M^T M - I| <= 1e-9``.
    """
    R = _check_rotation(R)
    R_d = _check_rotation(R_d)
    return _attitude_error(R, R_d)


def _check_rotation(R):
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or np.max(np.abs(R.T @ R - np.eye(3))) > ORTHO_TOL:
        raise NonOrthonormalInput("rotation matrix is not orthonormal")
    return R


def _vec(v, n):
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != n:
        raise ValueError("expected a vector of length %d" % n)
    return np.ascontiguousarray(v)
