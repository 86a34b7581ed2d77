"""Control laws: manipulator barrier laws, quadrotor cascades and baselines."""

from .attitude import CommandFilter, desired_attitude
from .el import ELController, blf_asym_control, blf_sym_control, pid_control
from .lyapunov import ELErrorState, lyapunov_eval
from .quad import (QuadController, inner_loop_full_state, inner_loop_rsb, outer_loop_full_state,
                   outer_loop_rsb, smc_control)
from .robust import rho_p_gain, rho_q_gain, true_eta_p, true_eta_q
from .types import ConstraintSet, ControlOutput, ErrorState, GainSet, RobustModel
from ..se3 import attitude_error

__all__ = [
    "CommandFilter", "ConstraintSet", "ControlOutput", "ELController", "ELErrorState",
    "ErrorState", "GainSet", "QuadController", "RobustModel", "attitude_error",
    "blf_asym_control", "blf_sym_control", "desired_attitude", "inner_loop_full_state",
    "inner_loop_rsb", "lyapunov_eval", "outer_loop_full_state", "outer_loop_rsb",
    "pid_control", "rho_p_gain", "rho_q_gain", "smc_control", "true_eta_p", "true_eta_q",
]
