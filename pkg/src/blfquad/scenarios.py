"""Reference trajectories, scenario presets and per-seed realizations.

Scenario presets are JSON documents shipped in ``blfquad/presets``. A
scenario bundles the reference, constraints, nominal model, gains,
disturbances, payload schedule and obstacle geometry.
"""

import copy
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from numba import njit

from .controllers import ConstraintSet, ELController, GainSet, QuadController, RobustModel
from .errors import ConfigError
from .plants import (DisturbanceModel, Manipulator, ManipulatorParams, PayloadEvent,
                     QuadrotorParams)

PRESETS = ("ch2_sym", "ch2_asym", "ch3_pipe", "ch3_ring", "ch4_circle")
ALIASES = {"pipe": "ch3_pipe", "ring": "ch3_ring", "circle": "ch4_circle"}
QUAD_CONTROLLERS = ("rsb", "full_state", "smc")
EL_CONTROLLERS = ("blf_sym", "blf_asym", "pid")

# ---------------------------------------------------------------------------
# references
# ---------------------------------------------------------------------------


@njit(cache=True)
def _min_jerk(tau):
    """Rest-to-rest quintic blend and its first two derivatives on [0, 1]."""
    t2 = tau * tau
    t3 = t2 * tau
    s = t3 * (10.0 - 15.0 * tau + 6.0 * t2)
    ds = 30.0 * t2 * (1.0 - 2.0 * tau + t2)
    dds = 60.0 * tau * (1.0 - 3.0 * tau + 2.0 * t2)
    return s, ds, dds


@njit(cache=True)
def _waypoint_eval(t, t0, T, P0, P1, psi):
    out = np.zeros(12)
    k = np.searchsorted(t0, t, side="right") - 1
    if k < 0:
        out[0:3] = P0[0]
    elif t >= t0[k] + T[k]:
        out[0:3] = P1[k]
    else:
        s, ds, dds = _min_jerk((t - t0[k]) / T[k])
        d = P1[k] - P0[k]
        out[0:3] = P0[k] + s * d
        out[3:6] = ds / T[k] * d
        out[6:9] = dds / (T[k] * T[k]) * d
    out[9] = psi
    return out


@njit(cache=True)
def _circle_eval(t, center, radius, omega, phase, psi):
    out = np.zeros(12)
    a = omega * t + phase
    c, s = np.cos(a), np.sin(a)
    out[0] = center[0] + radius * c
    out[1] = center[1] + radius * s
    out[2] = center[2]
    out[3] = -radius * omega * s
    out[4] = radius * omega * c
    out[6] = -radius * omega * omega * c
    out[7] = -radius * omega * omega * s
    out[9] = psi
    return out


@njit(cache=True)
def _sine_eval(t, offset, amp, omega):
    n = offset.shape[0]
    out = np.empty(3 * n)
    s, c = np.sin(omega * t), np.cos(omega * t)
    out[0:n] = offset + amp * s
    out[n:2 * n] = amp * omega * c
    out[2 * n:3 * n] = -amp * omega * omega * s
    return out


class WaypointReference:
    """Chain of rest-to-rest quintic segments.

    Parameters
    ----------
    start : array_like, shape (3,)
    segments : list of (target, duration)
        A segment whose target equals the current point is a hover.
    psi : float
        Constant desired yaw.

    Calling the object returns the packed vector
    ``[p_d, p'_d, p''_d, psi_d, psi'_d, psi''_d]``.
    """

    def __init__(self, start, segments, psi=0.0):
        P0, P1, t0, T = [], [], [], []
        p = np.asarray(start, float)
        t = 0.0
        for target, dur in segments:
            if not dur > 0:
                raise ConfigError("segment durations must be positive")
            target = np.asarray(target, float)
            P0.append(p)
            P1.append(target)
            t0.append(t)
            T.append(float(dur))
            p, t = target, t + float(dur)
        self.P0, self.P1 = np.array(P0), np.array(P1)
        self.t0, self.T = np.array(t0), np.array(T)
        self.psi = float(psi)
        self.duration = t

    def __call__(self, t):
        return _waypoint_eval(float(t), self.t0, self.T, self.P0, self.P1, self.psi)

    def max_accel(self):
        """Peak ``|p''_d|``: a quintic blend peaks at ``10/sqrt(3) |d|/T^2``."""
        d = np.linalg.norm(self.P1 - self.P0, axis=1)
        return float(np.max(10.0 / np.sqrt(3.0) * d / self.T ** 2))


class CircleReference:
    """Constant-speed horizontal circle at fixed altitude."""

    def __init__(self, center, radius, period, phase=0.0, psi=0.0):
        self.center = np.asarray(center, float)
        self.radius = float(radius)
        self.omega = 2.0 * np.pi / float(period)
        self.phase = float(phase)
        self.psi = float(psi)

    def __call__(self, t):
        return _circle_eval(float(t), self.center, self.radius, self.omega, self.phase, self.psi)

    def max_accel(self):
        return self.radius * self.omega ** 2


class SineReference:
    """Joint reference ``offset + amplitude sin(frequency t)``; returns ``[q_d, q'_d, q''_d]``."""

    def __init__(self, offset, amplitude, frequency):
        self.offset = np.asarray(offset, float)
        self.amplitude = np.broadcast_to(np.asarray(amplitude, float), self.offset.shape).copy()
        self.omega = float(frequency)

    def __call__(self, t):
        return _sine_eval(float(t), self.offset, self.amplitude, self.omega)


def make_reference(cfg):
    kind = cfg["kind"]
    if kind == "waypoints":
        return WaypointReference(cfg["start"], [(s["to"], s["duration"]) for s in cfg["segments"]],
                                 np.deg2rad(cfg.get("psi_deg", 0.0)))
    if kind == "circle":
        return CircleReference(cfg["center"], cfg["radius"], cfg["period"],
                               np.deg2rad(cfg.get("phase_deg", 0.0)),
                               np.deg2rad(cfg.get("psi_deg", 0.0)))
    if kind == "sine":
        return SineReference(cfg["offset"], cfg["amplitude"], cfg["frequency"])
    raise ConfigError("unknown reference kind %r" % kind)


# ---------------------------------------------------------------------------
# presets and configuration merging
# ---------------------------------------------------------------------------


def load_preset(name):
    """Return the preset document ``name`` (aliases ``pipe``, ``ring``, ``circle``)."""
    name = ALIASES.get(name, name)
    if name not in PRESETS:
        raise ConfigError("unknown scenario %r (known: %s)" % (name, ", ".join(PRESETS)))
    text = resources.files("blfquad.presets").joinpath(name + ".json").read_text()
    return json.loads(text)


def merge_config(base, overrides, path=""):
    """Deep-merge ``overrides`` into a copy of ``base``.

    Keys must already exist in ``base`` and keep their JSON type, so the
    preset itself acts as the schema. Lists and numbers are interchangeable
    only where ``base`` already holds a number.
    """
    out = copy.deepcopy(base)
    for key, val in overrides.items():
        where = path + "." + key if path else key
        if key not in out:
            raise ConfigError("unknown configuration key %r" % where)
        cur = out[key]
        if isinstance(cur, dict):
            if not isinstance(val, dict):
                raise ConfigError("%s must be a section" % where)
            out[key] = merge_config(cur, val, where)
        elif isinstance(cur, bool) or isinstance(val, bool):
            if not (isinstance(cur, bool) and isinstance(val, bool)):
                raise ConfigError("%s must be a boolean" % where)
            out[key] = val
        elif isinstance(cur, (int, float)) and cur is not None:
            if not isinstance(val, (int, float)):
                raise ConfigError("%s must be a number" % where)
            out[key] = val
        elif isinstance(cur, list):
            if not isinstance(val, list):
                raise ConfigError("%s must be a list" % where)
            if cur and all(isinstance(c, (int, float)) for c in cur) and len(val) != len(cur):
                raise ConfigError("%s must have %d entries" % (where, len(cur)))
            out[key] = val
        elif isinstance(cur, str):
            if not isinstance(val, str):
                raise ConfigError("%s must be a string" % where)
            out[key] = val
        else:
            out[key] = val
    return out


# ---------------------------------------------------------------------------
# scenario objects
# ---------------------------------------------------------------------------


@dataclass
class Realization:
    """Seed-dependent pieces of a run: true plant, disturbances, initial offsets."""

    plant_params: object
    disturbance: tuple
    offsets: dict = field(default_factory=dict)


@dataclass
class Scenario:
    """A fully specified tracking task.

    Attributes
    ----------
    name : str
    plant_kind : {"manipulator", "quadrotor"}
    reference : callable
        ``t -> packed reference`` with analytic derivatives.
    constraints : ConstraintSet
    events : list of PayloadEvent
    horizon : float
    geometry : dict
        Clearance data used to check ``max k_p <= clearance - vehicle radius``.
    cfg : dict
        The configuration document the scenario was built from.
    """

    name: str
    plant_kind: str
    reference: object
    constraints: ConstraintSet
    events: list
    horizon: float
    geometry: dict
    cfg: dict

    @classmethod
    def from_config(cls, cfg):
        plant_kind = cfg["plant"]["kind"]
        c = cfg["constraints"]
        constraints = ConstraintSet(**{k: v for k, v in c.items() if v is not None})
        events = [PayloadEvent(e["time"], e["delta_mass"], tuple(e.get("offset", (0, 0, 0))))
                  for e in cfg.get("events", [])]
        events.sort(key=lambda e: e.time)
        sc = cls(cfg["name"], plant_kind, make_reference(cfg["reference"]), constraints, events,
                 float(cfg["sim"]["horizon"]), cfg.get("geometry", {}), cfg)
        sc.validate()
        return sc

    @property
    def controllers(self):
        return EL_CONTROLLERS if self.plant_kind == "manipulator" else QUAD_CONTROLLERS

    @property
    def default_controller(self):
        return self.cfg.get("default_controller", self.controllers[0])

    # -- checks --------------------------------------------------------------
    def validate(self):
        geo = self.geometry
        if self.plant_kind == "quadrotor":
            if "clearance_radius" in geo:
                margin = geo["clearance_radius"] - geo.get("vehicle_radius", 0.3)
                if np.max(self.constraints.k_p) > margin + 1e-12:
                    raise ConfigError("position bound %.3g exceeds clearance margin %.3g"
                                      % (np.max(self.constraints.k_p), margin))
            limit = self.cfg["reference"].get("max_accel", np.inf)
            if self.reference.max_accel() >= limit:
                raise ConfigError("reference acceleration %.3g exceeds %.3g"
                                  % (self.reference.max_accel(), limit))

    def robust_model(self):
        r = self.cfg["robust"]
        return RobustModel(m_bar=r["m_bar"], J_bar=r["J_bar"], E_p=r["E_p"], E_q=r["E_q"],
                           d_p_bound=r["d_p_bound"], d_q_bound=r["d_q_bound"],
                           com_torque_bound=r.get("com_torque_bound", 0.0),
                           g=self.cfg["plant"].get("g", 9.81))

    def gains(self):
        g = self.cfg["gains"]
        if self.plant_kind == "manipulator":
            return GainSet(K_1=g["K_1"], K_2=g["K_2"])
        return GainSet(Lambda_1p=g["Lambda_1p"], Lambda_2p=g["Lambda_2p"],
                       Lambda_1q=g["Lambda_1q"], Lambda_2q=g["Lambda_2q"],
                       eps_p=g["eps_p"], eps_q=g["eps_q"])

    def mass_schedule(self, base_mass):
        """Total mass after each payload event, starting from ``base_mass``."""
        masses = [base_mass]
        for ev in self.events:
            masses.append(masses[-1] + ev.delta_mass)
        return masses

    # -- per-run pieces ------------------------------------------------------
    def realize(self, seed):
        """Draw the true plant and disturbance phases for ``seed``."""
        rng = np.random.default_rng(seed)
        p = self.cfg["plant"]
        dcfg = self.cfg.get("disturbance", {})
        if self.plant_kind == "manipulator":
            params = ManipulatorParams(p["m1"], p["m2"], p["l1"], p["l2"], p["fv1"], p["fv2"],
                                       p.get("g", 9.81), p.get("friction_width", 0.01))
            return Realization(params, (_disturbance_from(dcfg.get("joint"), rng, 2),),
                               dict(self.cfg.get("initial", {})))
        m = p["mass"] + rng.uniform(-1.0, 1.0) * p.get("mass_spread", 0.0)
        J = np.asarray(p["inertia"], float)
        s = p.get("inertia_ratio_spread", 0.0)
        J = J / (1.0 + s * rng.uniform(-1.0, 1.0, 3))
        params = QuadrotorParams(m=float(m), J=tuple(J), g=p.get("g", 9.81))
        dist = (_disturbance_from(dcfg.get("translational"), rng, 3),
                _disturbance_from(dcfg.get("rotational"), rng, 3))
        offsets = dict(self.cfg.get("initial", {}))
        return Realization(params, dist, offsets)

    def make_controller(self, kind, dt):
        if kind not in self.controllers:
            raise ConfigError("controller %r does not apply to scenario %r" % (kind, self.name))
        if self.plant_kind == "manipulator":
            plant = self.make_plant(self.realize(0))
            return ELController(kind, plant, self.constraints, self.gains(),
                                self.cfg.get("pid"), dt,
                                self.cfg["gains"].get("asym_gain_verbatim", False))
        return QuadController(kind, self.gains(), self.constraints, self.robust_model(), dt,
                              self.cfg["gains"].get("filter_time_constant", 0.005))

    def make_plant(self, real):
        if self.plant_kind == "manipulator":
            return Manipulator(real.plant_params, real.disturbance[0])
        return real.plant_params


def _disturbance_from(cfg, rng, dim):
    """Build a disturbance model; random phases are drawn from ``rng``."""
    if not cfg or cfg.get("kind", "none") == "none":
        return DisturbanceModel("none", amplitude=tuple([0.0] * dim))
    kind = cfg["kind"]
    if kind == "sinusoid":
        amp = tuple(float(a) for a in cfg["amplitude"])
        phase = (tuple(rng.uniform(0, 2 * np.pi, dim)) if cfg.get("random_phase")
                 else tuple(cfg.get("phase", [0.0] * dim)))
        return DisturbanceModel("sinusoid", amplitude=amp, frequency=float(cfg["frequency"]),
                                phase=phase)
    if kind == "wind":
        mean = cfg["drag_coefficient"] * cfg["speed"] ** 2
        ga = tuple(float(a) for a in cfg.get("gust_amp", []))
        gf = tuple(float(f) for f in cfg.get("gust_freq", []))
        gp = tuple(rng.uniform(0, 2 * np.pi, len(ga)))
        return DisturbanceModel("wind", amplitude=tuple([0.0] * dim),
                                direction=np.deg2rad(cfg["direction_deg"]), mean=mean,
                                gust_amp=ga, gust_freq=gf, gust_phase=gp)
    raise ConfigError("unknown disturbance kind %r" % kind)


def load_scenario(name, overrides=None):
    """Scenario from a preset name plus optional override document."""
    cfg = load_preset(name)
    if overrides:
        cfg = merge_config(cfg, overrides)
    return Scenario.from_config(cfg)


def pipe_scenario():
    """Two pipes, two payloads: O, pipe 1, pick B1, pipe 2, drop B1, pick B2, pipe 1, drop B2."""
    return load_scenario("ch3_pipe")


def ring_scenario():
    """Square loop through four rings in a 45 degree wind, repeated with each payload."""
    return load_scenario("ch3_ring")


def circle_follow_scenario():
    """Two rounds of a 1 m circle at 1.2 m, 0.3 kg payload dropped after the first."""
    return load_scenario("ch4_circle")
