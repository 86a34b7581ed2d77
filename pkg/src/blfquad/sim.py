"""Fixed-step closed-loop simulation and the Lyapunov monitor.

The control is computed once per step at the step start and held while the
plant is advanced with classical RK4 (or Euler). Disturbances are evaluated
at the Runge-Kutta stage times.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .controllers.el import EL_COLUMNS
from .controllers.quad import CONTROL_COLUMNS, COL, FAMILIES, _outer
from .controllers.attitude import _desired_attitude
from .controllers.robust import _eta_p, _eta_q
from .errors import (ConfigError, DegenerateThrustDirection, InfeasibleInitialCondition,
                     NumericFailure, ZeroThrustDirection)
from .plants import (_com_torque, _disturbance, _manip_deriv, _manip_euler, _manip_rk4, _quad_deriv,
                     _quad_euler, _quad_rk4, apply_payload_event)
from .scenarios import Scenario, load_scenario

STATUSES = ("completed", "aborted_violation", "numeric_failure")

QUAD_STATE = ["x", "y", "z", "vx", "vy", "vz", "phi", "theta", "psi", "p_rate", "q_rate", "r_rate"]
QUAD_REF = ([f"p_d_{a}" for a in "xyz"] + [f"pdot_d_{a}" for a in "xyz"]
            + [f"pddot_d_{a}" for a in "xyz"] + ["psi_d", "psidot_d", "psiddot_d"])
EL_STATE = ["q_1", "q_2", "qdot_1", "qdot_2"]
EL_REF = ["q_d_1", "q_d_2", "qdot_d_1", "qdot_d_2", "qddot_d_1", "qddot_d_2"]

_QUAD_CTRL = CONTROL_COLUMNS[:-2]
QUAD_COLUMNS = (["t"] + QUAD_STATE + QUAD_REF + _QUAD_CTRL
                + ["eta_p", "eta_q"] + [f"d_p_{a}" for a in "xyz"] + [f"d_q_{a}" for a in "xyz"]
                + ["mass", "V", "Vdot", "violation"])
EL_COLUMNS_LOG = (["t"] + EL_STATE + EL_REF + EL_COLUMNS[:-2] + ["d_1", "d_2"]
                  + ["V", "Vdot", "violation"])


# ---------------------------------------------------------------------------
# one step of a generic ODE
# ---------------------------------------------------------------------------

def step(state, f, t, dt, method="rk4"):
    """Advance ``x' = f(t, x)`` by one step.

    Parameters
    ----------
    state : ndarray
    f : callable
        ``f(t, x)``; the caller holds the control fixed inside it.
    method : {"rk4", "euler"}

    Raises
    ------
    NumericFailure
        If the new state is not finite.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(state, float)
    if method == "euler":
        out = x + dt * np.asarray(f(t, x), float)
    elif method == "rk4":
        k1 = np.asarray(f(t, x), float)
        k2 = np.asarray(f(t + 0.5 * dt, x + 0.5 * dt * k1), float)
        k3 = np.asarray(f(t + 0.5 * dt, x + 0.5 * dt * k2), float)
        k4 = np.asarray(f(t + dt, x + dt * k3), float)
        out = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    else:
        raise ValueError("unknown integrator %r" % method)
    if not np.all(np.isfinite(out)):
        raise NumericFailure("non-finite state after integration step")
    return out


# ---------------------------------------------------------------------------
# configuration and log containers
# ---------------------------------------------------------------------------

@dataclass
class SimConfig:
    """Run description.

    ``dt`` and ``horizon`` default to the scenario's ``sim`` section.
    ``lyapunov_probe`` logs V' as a central difference along the closed-loop
    vector field at each sample (step ``probe_h``).
    """

    scenario: object = "ch2_sym"
    controller: str = None
    seed: int = 0
    dt: float = None
    horizon: float = None
    integrator: str = None
    overrides: dict = None
    lyapunov_probe: bool = False
    probe_h: float = 3e-6
    initial_offsets: dict = None

    def resolve(self):
        sc = self.scenario
        if not isinstance(sc, Scenario):
            sc = load_scenario(sc, self.overrides)
        sim = sc.cfg["sim"]
        dt = float(self.dt if self.dt is not None else sim["dt"])
        horizon = float(self.horizon if self.horizon is not None else sc.horizon)
        integ = self.integrator or sim.get("integrator", "rk4")
        if not dt > 0:
            raise ConfigError("dt must be positive")
        if horizon < dt:
            raise ConfigError("horizon must be at least one step")
        if integ not in ("rk4", "euler"):
            raise ConfigError("integrator must be rk4 or euler")
        ctrl = self.controller or sc.default_controller
        if ctrl not in sc.controllers:
            raise ConfigError("controller %r does not apply to scenario %r" % (ctrl, sc.name))
        return sc, ctrl, dt, horizon, integ


@dataclass
class SimLog:
    """Time-indexed record of one run.

    ``data`` holds one row per logged step with columns named in
    ``columns``. ``status`` is one of ``completed``, ``aborted_violation``
    or ``numeric_failure``.
    """

    columns: list
    data: np.ndarray
    status: str
    events: list = field(default_factory=list)
    violation: dict = None
    violations: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self._index = {c: i for i, c in enumerate(self.columns)}

    def __getitem__(self, name):
        return self.data[:, self._index[name]]

    def __contains__(self, name):
        return name in self._index

    def block(self, prefix, axes="xyz"):
        """Stack ``prefix_<axis>`` columns into an (n, len(axes)) array."""
        return np.column_stack([self[f"{prefix}_{a}"] for a in axes])

    @property
    def t(self):
        return self["t"]

    def __len__(self):
        return self.data.shape[0]

    def to_csv(self, path):
        """Write the log with a header row and 17 significant digits."""
        with open(path, "w", newline="") as fh:
            fh.write(",".join(self.columns) + "\n")
            if len(self):
                np.savetxt(fh, self.data, fmt="%.17g", delimiter=",")


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------

def run(config):
    """Simulate one scenario/controller pair and return its :class:`SimLog`.

    Raises
    ------
    InfeasibleInitialCondition
        If the initial errors are outside a constrained channel.
    """
    sc, ctrl_kind, dt, horizon, integ = config.resolve()
    real = sc.realize(config.seed)
    if config.initial_offsets:
        real.offsets.update(config.initial_offsets)
    ctrl = sc.make_controller(ctrl_kind, dt)
    t0 = time.perf_counter()
    if sc.plant_kind == "manipulator":
        log = _run_el(sc, ctrl, real, dt, horizon, integ, config)
    else:
        log = _run_quad(sc, ctrl, real, dt, horizon, integ, config)
    _fill_vdot(log, config.lyapunov_probe)
    log.meta.update({
        "scenario": sc.name, "controller": ctrl_kind, "seed": config.seed, "dt": dt,
        "horizon": horizon, "integrator": integ, "wall_time": time.perf_counter() - t0,
        "barrier": ctrl.barrier, "which": ctrl.which})
    return log


def _fill_vdot(log, probed):
    """Without the probe, V' is the central difference of the logged V."""
    log.meta["vdot_source"] = "flow_probe" if probed else "log_difference"
    if not probed and len(log):
        log.data[:, log._index["Vdot"]] = _log_difference(log["V"], log.t)


def _log_difference(V, t):
    if len(V) < 2:
        return np.zeros_like(V)
    return np.gradient(V, t, edge_order=1)


def _n_steps(horizon, dt):
    return int(round(horizon / dt))


def _violation_record(t, family, axis, value, bound):
    return {"t": float(t), "family": family, "axis": int(axis), "value": float(value),
            "bound": float(bound)}


def _run_el(sc, ctrl, real, dt, horizon, integ, config):
    plant = sc.make_plant(real)
    par, dist = plant._par, plant._dist
    off = real.offsets
    x = np.concatenate([np.asarray(off.get("q", [0, 0]), float),
                        np.asarray(off.get("qdot", [0, 0]), float)])
    stepper = _manip_rk4 if integ == "rk4" else _manip_euler
    N = _n_steps(horizon, dt)
    cols = EL_COLUMNS_LOG
    data = np.empty((N + 1, len(cols)))
    nc = len(EL_COLUMNS) - 2
    ref0 = sc.reference(0.0)
    ctrl.reset(x, ref0)
    status, violation, nviol = "completed", None, 0
    h = config.probe_h
    g = ctrl.gains
    meta = {"K_1": g.K_1.tolist() if g is not None else None,
            "K_2": g.K_2.tolist() if g is not None else None,
            "plant": {"m1": plant.params.m1, "m2": plant.params.m2}}
    k_last = N
    for k in range(N + 1):
        t = k * dt
        ref = sc.reference(t)
        out = ctrl.step(x, ref, t)
        code = int(out[-1])
        if k == 0 and code and ctrl.barrier:
            raise InfeasibleInitialCondition("initial joint error outside its bounds")
        tau = out[5 * 2:6 * 2]
        row = data[k]
        row[0] = t
        row[1:5] = x
        row[5:11] = ref
        row[11:11 + nc] = out[:nc]
        row[11 + nc:13 + nc] = _disturbance(dist, t)
        row[13 + nc] = out[-2]
        vdot = np.nan
        if config.lyapunov_probe and not code:
            f = _manip_deriv(x, tau, t, par, dist)
            vp = ctrl.lyapunov_at(x + h * f, sc.reference(t + h))
            vm = ctrl.lyapunov_at(x - h * f, sc.reference(t - h))
            vdot = (vp - vm) / (2.0 * h)
        row[14 + nc] = vdot
        row[15 + nc] = code
        if code:
            nviol += 1
            if violation is None:
                i = code - 1
                violation = _violation_record(t, "z_1", i, out[i],
                                              ctrl.upper[i] if out[i] > 0 else -ctrl.lower[i])
            if ctrl.barrier:
                status, k_last = "aborted_violation", k
                break
        if k == N:
            break
        x_new = stepper(x, tau, t, dt, par, dist)
        if not (_all_finite(x_new) and _all_finite(out[:nc])):
            status, k_last = "numeric_failure", k
            break
        ctrl.commit()
        x = x_new
    return SimLog(list(cols), data[:k_last + 1], status, [], violation, nviol, meta)


@njit(cache=True)
def _all_finite(x):
    for v in x:
        if not np.isfinite(v):
            return False
    return True


@njit(cache=True)
def _within(d, bound):
    for i in range(d.shape[0]):
        if abs(d[i]) > bound[i]:
            return False
    return True


@njit(cache=True)
def _quad_audit(x, t, nu_p, nu_q, phys, dist_p, dist_q, rob, bound_p, bound_q):
    """True disturbances and lumped uncertainties at a sample.

    The last output is False when a disturbance leaves its declared envelope.
    """
    dp = _disturbance(dist_p, t)
    dq_ext = _disturbance(dist_q, t)
    dq = dq_ext.copy()
    if phys[8] > 0.0:
        dq = dq - _com_torque(x[6:9], phys)
    ep = _eta_p(nu_p, phys[0], rob[0], phys[1], dp)
    eq = _eta_q(nu_q, x[9:12], phys[2:5], rob[1:4], dq)
    ok = _within(dp, bound_p) and _within(dq_ext, bound_q)
    return np.sqrt(np.sum(ep * ep)), np.sqrt(np.sum(eq * eq)), dp, dq, ok


def initial_quad_state(sc, ctrl, offsets):
    """State on the reference at t=0 (attitude aligned with the commanded force),
    shifted by the configured offsets."""
    ref = sc.reference(0.0)
    o = {k: np.asarray(offsets.get(k, [0.0, 0.0, 0.0]), float) for k in ("p", "v", "q", "w")}
    x = np.zeros(12)
    x[0:3] = ref[0:3] + o["p"]
    x[3:6] = ref[3:6] + o["v"]
    gp = ctrl._gp
    tau = _outer(ctrl.mode, x[0:3], x[3:6], ref, gp[0:3], gp[3:6], ctrl._kp, ctrl._k2p, gp[12],
                 ctrl._rob)[0]
    phi, theta, _, flag = _desired_attitude(tau, ref[9])
    if flag:
        raise DegenerateThrustDirection("initial commanded force has no valid direction")
    x[6:9] = np.array([phi, theta, ref[9]]) + o["q"]
    x[9:12] = np.array([0.0, 0.0, ref[10]]) + o["w"]
    return x


def _run_quad(sc, ctrl, real, dt, horizon, integ, config):
    params = real.plant_params
    dist_p, dist_q = (d.packed() for d in real.disturbance)
    bound_p = real.disturbance[0].bound + 1e-12
    bound_q = real.disturbance[1].bound + 1e-12
    rob = ctrl._rob
    stepper = _quad_rk4 if integ == "rk4" else _quad_euler
    x = initial_quad_state(sc, ctrl, real.offsets)
    ctrl.reset(x, sc.reference(0.0))
    N = _n_steps(horizon, dt)
    cols = QUAD_COLUMNS
    data = np.empty((N + 1, len(cols)))
    nctl = len(_QUAD_CTRL)
    i_ctl = 1 + 12 + 12
    i_aud = i_ctl + nctl
    i_nu_p, i_nu_q = COL["nu_p_x"], COL["nu_q_x"]
    i_u1, i_tq = COL["u1"], COL["tau_q_x"]
    events = list(sc.events)
    ei = 0
    event_log = []
    status, violation, nviol = "completed", None, 0
    h = config.probe_h
    phys = params.packed()
    k_last = N
    limits = ctrl.limits
    for k in range(N + 1):
        t = k * dt
        while ei < len(events) and events[ei].time < t + dt - 1e-9:
            ev = events[ei]
            before = params.m
            params = apply_payload_event(params, ev)
            phys = params.packed()
            event_log.append({"time": ev.time, "applied_at": t, "delta_mass": ev.delta_mass,
                              "mass_before": before, "mass_after": params.m,
                              "label": sc.cfg["events"][ei].get("label", "")})
            ei += 1
        ref = sc.reference(t)
        try:
            out = ctrl.step(x, ref)
        except (ZeroThrustDirection, DegenerateThrustDirection):
            status, k_last = "numeric_failure", k - 1
            break
        code = int(out[-1])
        if k == 0 and code and ctrl.barrier:
            raise InfeasibleInitialCondition(
                "initial %s error outside its bound" % FAMILIES[(code - 1) // 3])
        u1 = out[i_u1]
        tau_q = out[i_tq:i_tq + 3]
        eta_p, eta_q, dp, dq, ok = _quad_audit(x, t, out[i_nu_p:i_nu_p + 3],
                                               out[i_nu_q:i_nu_q + 3], phys, dist_p, dist_q,
                                               rob, bound_p, bound_q)
        if not ok:
            raise NumericFailure("disturbance exceeded its declared bound at t=%g" % t)
        row = data[k]
        row[0] = t
        row[1:13] = x
        row[13:25] = ref
        row[i_ctl:i_aud] = out[:nctl]
        row[i_aud] = eta_p
        row[i_aud + 1] = eta_q
        row[i_aud + 2:i_aud + 5] = dp
        row[i_aud + 5:i_aud + 8] = dq
        row[i_aud + 8] = params.m
        row[i_aud + 9] = out[-2]
        vdot = np.nan
        if config.lyapunov_probe and not code:
            f = _quad_deriv(x, u1, tau_q, t, phys, dist_p, dist_q)
            qd_p, qdd_p = ctrl.desired_at(out, h)
            qd_m, qdd_m = ctrl.desired_at(out, -h)
            vp = ctrl.lyapunov_at(x + h * f, sc.reference(t + h), qd_p, qdd_p)
            vm = ctrl.lyapunov_at(x - h * f, sc.reference(t - h), qd_m, qdd_m)
            vdot = (vp - vm) / (2.0 * h)
        row[i_aud + 10] = vdot
        row[i_aud + 11] = code
        if code:
            nviol += 1
            if violation is None:
                fam, ax = divmod(code - 1, 3)
                name = FAMILIES[fam]
                val = out[COL[f"{name}_{'xyz'[ax]}"]]
                violation = _violation_record(t, name, ax, val, limits[code - 1])
            if ctrl.barrier:
                status, k_last = "aborted_violation", k
                break
        if k == N:
            break
        x_new = stepper(x, u1, tau_q, t, dt, phys, dist_p, dist_q)
        if not _all_finite(x_new):
            status, k_last = "numeric_failure", k
            break
        ctrl.commit()
        x = x_new
    meta = {"mass0": real.plant_params.m, "J": list(real.plant_params.J),
            "eps_p": ctrl.gains.eps_p, "eps_q": ctrl.gains.eps_q,
            "rate": ctrl.stability_rate(), "limits": limits.tolist()}
    return SimLog(list(cols), data[:max(k_last, 0) + 1], status, event_log, violation, nviol,
                  meta)


# ---------------------------------------------------------------------------
# Lyapunov monitor
# ---------------------------------------------------------------------------

@dataclass
class LyapunovReport:
    """Outcome of the Lyapunov check.

    Attributes
    ----------
    vdot : ndarray
        Per-step V' estimate.
    checked : ndarray of bool
        Steps subject to the inequality.
    flagged : ndarray of int
        Indices of checked steps that fail it.
    c_measured : float
        ``max(V' + rate V)`` over all steps, the measured ultimate-bound constant.
    tol : float
    rate : float
    rel_error : ndarray or None
        Relative mismatch against the exact-cancellation identity (manipulator).
    """

    vdot: np.ndarray
    checked: np.ndarray
    flagged: np.ndarray
    c_measured: float
    tol: float
    rate: float
    rel_error: np.ndarray = None

    @property
    def n_checked(self):
        return int(np.count_nonzero(self.checked))

    @property
    def ok(self):
        return self.flagged.size == 0


def _vdot_estimate(log):
    if "Vdot" in log and log.meta.get("vdot_source") == "flow_probe":
        return log["Vdot"].copy()
    return _log_difference(log["V"], log.t)


def monitor_lyapunov(log, which=None, tol=None, rel_tol=1e-5):
    """Check the Lyapunov decrease conditions along a log.

    Parameters
    ----------
    log : SimLog
    which : {"ch2_sym", "ch2_asym", "ch3", "ch4"}, optional
        Defaults to the log's controller family.
    tol : float, optional
        Additive tolerance; default ``1e-3 max|V'|``.
    rel_tol : float
        Relative tolerance for the manipulator cancellation identity.

    Returns
    -------
    LyapunovReport
        For ``ch2_*`` a step is flagged when V' departs from
        ``-z1^T K1 z1 - z2^T K2 z2`` by more than ``rel_tol`` (relative).
        For ``ch3``/``ch4`` steps outside both boundary layers are flagged
        when ``V' > -rate V + tol``.
    """
    which = which or log.meta.get("which")
    vdot = _vdot_estimate(log)
    V = log["V"]
    if tol is None:
        fin = np.abs(vdot[np.isfinite(vdot)])
        tol = 1e-3 * float(fin.max()) if fin.size else 0.0
    if which in ("ch2_sym", "ch2_asym"):
        K1 = np.asarray(log.meta["K_1"], float)
        K2 = np.asarray(log.meta["K_2"], float)
        z1 = np.column_stack([log["z1_1"], log["z1_2"]])
        z2 = np.column_stack([log["z2_1"], log["z2_2"]])
        expected = -np.einsum("ni,ij,nj->n", z1, K1, z1) - np.einsum("ni,ij,nj->n", z2, K2, z2)
        rel = np.abs(vdot - expected) / np.maximum(np.abs(expected), 1e-300)
        checked = np.isfinite(vdot)
        flagged = np.flatnonzero(checked & ~(rel < rel_tol))
        c = float(np.nanmax(vdot - expected)) if checked.any() else 0.0
        return LyapunovReport(vdot, checked, flagged, c, rel_tol, 0.0, rel)
    rate = float(log.meta.get("rate", 0.0))
    z2p = log.block("z_2p")
    z2q = log.block("z_2q")
    checked = ((np.linalg.norm(z2p, axis=1) >= log.meta["eps_p"])
               & (np.linalg.norm(z2q, axis=1) >= log.meta["eps_q"]) & np.isfinite(vdot))
    slack = vdot + rate * V
    flagged = np.flatnonzero(checked & ~(slack <= tol))
    c = float(np.nanmax(slack)) if len(slack) else 0.0
    return LyapunovReport(vdot, checked, flagged, c, tol, rate)
