"""Parameter containers shared by the controllers."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidUncertaintyBound
from ..plants import GRAVITY


def _arr(x, n=None):
    a = np.array(x, dtype=float).reshape(-1)
    if n is not None and a.size == 1:
        a = np.full(n, a[0])
    if n is not None and a.size != n:
        raise ValueError("expected %d entries, got %d" % (n, a.size))
    return a


@dataclass
class ConstraintSet:
    """Error bounds.

    ``k_p``/``k_q`` bound position and attitude errors, ``kdot_p``/``kdot_q``
    bound their rates (full-state problem only). ``k_a``/``k_b`` are the
    lower/upper joint-error bounds of the manipulator problem.
    """

    k_p: np.ndarray = None
    k_q: np.ndarray = None
    kdot_p: np.ndarray = None
    kdot_q: np.ndarray = None
    k_a: np.ndarray = None
    k_b: np.ndarray = None

    def __post_init__(self):
        for name in ("k_p", "k_q", "kdot_p", "kdot_q"):
            val = getattr(self, name)
            if val is not None:
                setattr(self, name, _arr(val, 3))
        for name in ("k_a", "k_b"):
            val = getattr(self, name)
            if val is not None:
                setattr(self, name, _arr(val))
        for name in ("k_p", "k_q", "kdot_p", "kdot_q", "k_a", "k_b"):
            val = getattr(self, name)
            if val is not None and np.any(val <= 0):
                raise ValueError("constraint %s must be strictly positive" % name)

    def k_2p(self, gains):
        """Compatibility bound ``kdot_p + gamma_p * k_p`` on z_2p."""
        return self.kdot_p + gains.Lambda_1p * self.k_p

    def k_2q(self, gains):
        """Compatibility bound ``kdot_q + gamma_q * k_q`` on z_2q."""
        return self.kdot_q + gains.Lambda_1q * self.k_q


@dataclass
class RobustModel:
    """Nominal quadrotor model and uncertainty envelope.

    ``E_p``/``E_q`` bound the relative mass/inertia mismatch,
    ``|m_bar/m - 1| <= E_p`` and ``|J_bar_i/J_i - 1| <= E_q``. Disturbance
    bounds are used through their Euclidean norms. ``com_torque_bound`` is
    an extra norm allowance for payload offset torques.
    """

    m_bar: float = 2.0
    J_bar: np.ndarray = field(default_factory=lambda: np.array([0.02, 0.02, 0.04]))
    E_p: float = 0.3
    E_q: float = 0.3
    d_p_bound: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.5]))
    d_q_bound: np.ndarray = field(default_factory=lambda: np.array([0.01, 0.01, 0.02]))
    com_torque_bound: float = 0.0
    g: float = GRAVITY

    def __post_init__(self):
        self.J_bar = _arr(self.J_bar, 3)
        self.d_p_bound = _arr(self.d_p_bound, 3)
        self.d_q_bound = _arr(self.d_q_bound, 3)
        if not self.m_bar > 0:
            raise ValueError("nominal mass must be positive")
        if np.any(self.J_bar <= 0):
            raise ValueError("nominal inertia must be positive definite")
        for name in ("E_p", "E_q"):
            e = getattr(self, name)
            if not 0.0 <= e < 1.0:
                raise InvalidUncertaintyBound("%s=%g outside [0, 1)" % (name, e))

    @property
    def g_bar(self):
        return np.array([0.0, 0.0, self.m_bar * self.g])

    @property
    def d_p_norm(self):
        return float(np.linalg.norm(self.d_p_bound))

    @property
    def d_q_norm(self):
        return float(np.linalg.norm(self.d_q_bound)) + self.com_torque_bound

    def mass_range(self):
        """Admissible true masses, ``[m_bar/(1+E_p), m_bar/(1-E_p)]``."""
        return self.m_bar / (1.0 + self.E_p), self.m_bar / (1.0 - self.E_p)

    def packed(self):
        return np.concatenate([[self.m_bar], self.J_bar, [self.E_p, self.E_q, self.d_p_norm,
                                                          self.d_q_norm, self.g]])


@dataclass
class GainSet:
    """Controller gains. Diagonal gains are stored as their diagonals."""

    Lambda_1p: np.ndarray = None
    Lambda_2p: np.ndarray = None
    Lambda_1q: np.ndarray = None
    Lambda_2q: np.ndarray = None
    eps_p: float = 0.1
    eps_q: float = 1.0
    K_1: np.ndarray = None
    K_2: np.ndarray = None

    def __post_init__(self):
        for name in ("Lambda_1p", "Lambda_2p", "Lambda_1q", "Lambda_2q"):
            val = getattr(self, name)
            if val is not None:
                val = _arr(val, 3)
                if np.any(val <= 0):
                    raise ValueError("%s must be positive" % name)
                setattr(self, name, val)
        for name in ("K_1", "K_2"):
            val = getattr(self, name)
            if val is not None:
                val = np.array(val, dtype=float)
                if val.ndim == 1:
                    val = np.diag(val)
                if np.any(np.linalg.eigvalsh(0.5 * (val + val.T)) <= 0):
                    raise ValueError("%s must be positive definite" % name)
                setattr(self, name, val)
        if not (self.eps_p > 0 and self.eps_q > 0):
            raise ValueError("boundary layers must be positive")

    def packed(self):
        return np.concatenate([self.Lambda_1p, self.Lambda_2p, self.Lambda_1q, self.Lambda_2q,
                               [self.eps_p, self.eps_q]])


@dataclass
class ControlOutput:
    """Quadrotor control signals and robust gains."""

    tau_p: np.ndarray
    u1: float
    tau_q: np.ndarray
    rho_p: float
    rho_q: float
    diagnostics: dict = field(default_factory=dict)


@dataclass
class ErrorState:
    """Tracking errors and virtual controls of both loops."""

    z_p: np.ndarray
    z_2p: np.ndarray
    zdot_p: np.ndarray
    z_q: np.ndarray
    z_2q: np.ndarray
    zdot_q: np.ndarray
    alpha_p: np.ndarray = None
    alpha_q: np.ndarray = None
    alphadot_p: np.ndarray = None
    alphadot_q: np.ndarray = None
