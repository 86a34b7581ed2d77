"""RMS and peak tracking-error metrics and comparison tables."""

import csv
import io
from dataclasses import asdict, dataclass, field

import numpy as np

BLOCKS = {
    "position": (("x", "y", "z"), "m"),
    "attitude": (("phi", "theta", "psi"), "deg"),
    "velocity": (("vx", "vy", "vz"), "m/s"),
    "rate": (("phi_dot", "theta_dot", "psi_dot"), "deg/s"),
    "joint": (("q1", "q2"), "rad"),
}


def rms_peak(err):
    """Per-column RMS and peak absolute value of an (n, k) error array."""
    e = np.asarray(err, float)
    if e.ndim == 1:
        e = e[:, None]
    if e.shape[0] == 0:
        raise ValueError("empty error series")
    return np.sqrt(np.mean(e * e, axis=0)), np.max(np.abs(e), axis=0)


@dataclass
class MetricsReport:
    """Per-axis RMS and peak errors for each block present in a log.

    ``rms`` and ``peak`` map a block name (``position``, ``attitude``,
    ``velocity``, ``rate`` or ``joint``) to per-axis lists. ``drop_accuracy``
    holds ``|z_p|`` at each payload drop.
    """

    rms: dict = field(default_factory=dict)
    peak: dict = field(default_factory=dict)
    violations: int = 0
    status: str = "completed"
    drop_accuracy: list = field(default_factory=list)
    first_violation: dict = None
    info: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _wrap(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def error_blocks(log):
    """Error arrays per block, attitude and rates in degrees."""
    if "z1_1" in log:
        return {"joint": np.column_stack([log["z1_1"], log["z1_2"]])}
    att = np.column_stack([log["phi"], log["theta"], log["psi"]])
    att_d = np.column_stack([log["q_d_x"], log["q_d_y"], log["q_d_z"]])
    return {
        "position": log.block("z_p"),
        "attitude": np.rad2deg(_wrap(att - att_d)),
        "velocity": log.block("zdot_p"),
        "rate": np.rad2deg(log.block("zdot_q")),
    }


def compute_metrics(log):
    """Metrics over the whole log.

    Parameters
    ----------
    log : SimLog

    Returns
    -------
    MetricsReport
    """
    rep = MetricsReport(violations=int(np.count_nonzero(log["violation"])), status=log.status,
                        first_violation=log.violation)
    for name, err in error_blocks(log).items():
        r, p = rms_peak(err)
        rep.rms[name] = r.tolist()
        rep.peak[name] = p.tolist()
    if "z_p_x" in log:
        zp = log.block("z_p")
        t = log.t
        for ev in log.events:
            if ev["delta_mass"] < 0:
                k = int(np.searchsorted(t, ev["applied_at"]))
                if k < len(t):
                    rep.drop_accuracy.append({"time": ev["time"],
                                              "z_p_norm": float(np.linalg.norm(zp[k]))})
    rep.info = {k: log.meta[k] for k in ("scenario", "controller", "seed", "dt", "horizon")
                if k in log.meta}
    rep.info["duration"] = float(log.t[-1]) if len(log) else 0.0
    return rep


def comparison_rows(reports, blocks=None):
    """Rows ``(block, axis, unit, rms_1, peak_1, rms_2, peak_2, ...)``.

    ``reports`` maps a run label to its MetricsReport (or None for a failed
    run, rendered as ``nan``).
    """
    labels = list(reports)
    if blocks is None:
        blocks = []
        for rep in reports.values():
            for b in (rep.rms if rep else {}):
                if b not in blocks:
                    blocks.append(b)
    rows = []
    for b in blocks:
        axes, unit = BLOCKS[b]
        for i, ax in enumerate(axes):
            row = [b, ax, unit]
            for lab in labels:
                rep = reports[lab]
                if rep is None or b not in rep.rms:
                    row += [float("nan"), float("nan")]
                else:
                    row += [rep.rms[b][i], rep.peak[b][i]]
            rows.append(row)
    return rows


def comparison_table(reports, blocks=None, notes=None):
    """Text and CSV renderings of the side-by-side comparison.

    Returns
    -------
    text, csv_text : str
    """
    labels = list(reports)
    rows = comparison_rows(reports, blocks)
    header = ["block", "axis", "unit"]
    for lab in labels:
        header += [f"{lab}_rms", f"{lab}_peak"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r[:3] + ["%.17g" % v for v in r[3:]])
    width = max(14, max(len(l) for l in labels) + 2) if labels else 14
    lines = ["%-10s %-10s %-6s" % ("block", "axis", "unit")
             + "".join("%*s" % (2 * width, lab) for lab in labels),
             "%-28s" % "" + "".join("%*s%*s" % (width, "RMS", width, "peak") for _ in labels)]
    for r in rows:
        lines.append("%-10s %-10s %-6s" % tuple(r[:3])
                     + "".join("%*.5g" % (width, v) for v in r[3:]))
    for lab in labels:
        rep = reports[lab]
        if rep is None:
            lines.append(f"{lab}: run failed" + (f" ({notes[lab]})" if notes and lab in notes else ""))
        else:
            lines.append(f"{lab}: status={rep.status} violations={rep.violations}")
    return "\n".join(lines) + "\n", buf.getvalue()


def summarize_run(config):
    """Run one configuration and keep only scalar outcomes.

    Large logs are dropped so that many seeds can be swept cheaply.

    Returns
    -------
    dict
        Status, violation count, metrics, per-family worst ratio
        ``max |e| / bound`` and the robust-gain audit fractions.
    """
    from .sim import run

    simlog = run(config)
    rep = compute_metrics(simlog)
    out = {"scenario": simlog.meta["scenario"], "controller": simlog.meta["controller"],
           "seed": simlog.meta["seed"], "status": simlog.status,
           "violations": rep.violations, "first_violation": simlog.violation,
           "wall_time": simlog.meta["wall_time"], "metrics": rep.to_dict(),
           "duration": rep.info["duration"]}
    if "z_p_x" in simlog:
        from .controllers.quad import FAMILIES

        limits = np.asarray(simlog.meta["limits"], float).reshape(6, 3)
        out["worst_ratio"] = {}
        for f, lim in zip(FAMILIES, limits):
            e = np.abs(simlog.block(f))
            out["worst_ratio"][f] = (np.max(e, axis=0) / lim).tolist()
        out["rho_p_ok"] = float(np.mean(simlog["rho_p"] >= simlog["eta_p"]))
        out["rho_q_ok"] = float(np.mean(simlog["rho_q"] >= simlog["eta_q"]))
        drops = [ev for ev in simlog.events if ev["delta_mass"] < 0]
        if drops:
            after = simlog.t >= drops[0]["applied_at"]
            out["post_drop_zdot_peak"] = np.max(np.abs(simlog.block("zdot_p")[after]),
                                                axis=0).tolist()
    else:
        out["joint_range"] = [[float(simlog[f"z1_{i}"].min()), float(simlog[f"z1_{i}"].max())]
                              for i in (1, 2)]
    return out


def run_batch(configs, jobs=1):
    """``summarize_run`` over many configurations, optionally in worker processes."""
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(summarize_run, configs))
    return [summarize_run(c) for c in configs]
