"""Command-line entry point.

``blfquad run`` simulates one scenario/controller pair and writes
``trajectory.csv``, ``metrics.json`` and ``summary.txt``. ``blfquad compare``
runs several controllers on one scenario and writes a side-by-side RMS/peak
table as text and CSV.

Exit codes: 0 completed without violations, 2 a constraint was violated
(aborted barrier run, or a baseline that logged violations), 1 configuration
or numeric error.
"""

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .errors import BLFError
from .metrics import compute_metrics, comparison_table
from .scenarios import ALIASES, PRESETS, load_scenario
from .sim import SimConfig, run

ENV_CONFIG = "BLFQUAD_CONFIG"
log = logging.getLogger("blfquad")


@dataclass
class RunSpec:
    """One requested run: scenario, controller, overrides and output directory."""

    scenario: str
    controller: str = None
    overrides: dict = field(default_factory=dict)
    seed: int = 0
    dt: float = None
    horizon: float = None
    out: str = "."


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_csv(path, simlog):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_")
    os.close(fd)
    try:
        simlog.to_csv(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_config(path):
    """Read a JSON config document; ``None`` gives an empty document."""
    if not path:
        return {}
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise BLFError("config root must be an object")
    return doc


def exit_code(simlog):
    if simlog.status == "numeric_failure":
        return 1
    if simlog.status == "aborted_violation" or simlog.violations:
        return 2
    return 0


def summary_text(spec, simlog, rep):
    lines = [f"scenario   {simlog.meta['scenario']}",
             f"controller {simlog.meta['controller']}",
             f"seed       {spec.seed}",
             f"dt         {simlog.meta['dt']}",
             f"status     {simlog.status}",
             f"steps      {len(simlog)}",
             f"violations {rep.violations}"]
    if simlog.violation:
        v = simlog.violation
        lines.append("first violation: %s[%d] = %.6g (bound %.6g) at t = %.4f s"
                     % (v["family"], v["axis"], v["value"], v["bound"], v["t"]))
    for ev in simlog.events:
        lines.append("event t=%.3f  mass %.4g -> %.4g kg" % (ev["time"], ev["mass_before"],
                                                           ev["mass_after"]))
    for b in rep.rms:
        lines.append("%-9s rms  " % b + "  ".join("%.5g" % v for v in rep.rms[b]))
        lines.append("%-9s peak " % b + "  ".join("%.5g" % v for v in rep.peak[b]))
    for d in rep.drop_accuracy:
        lines.append("drop t=%.3f  |z_p| = %.4g m" % (d["time"], d["z_p_norm"]))
    return "\n".join(lines) + "\n"


def cmd_run(spec):
    """Run one spec and write its outputs. Returns ``(exit_code, report or None)``."""
    try:
        cfg = SimConfig(spec.scenario, spec.controller, seed=spec.seed, dt=spec.dt,
                        horizon=spec.horizon, overrides=spec.overrides or None)
        simlog = run(cfg)
    except BLFError as exc:
        log.error("%s", exc)
        return 1, None
    os.makedirs(spec.out, exist_ok=True)
    rep = compute_metrics(simlog)
    _atomic_csv(os.path.join(spec.out, "trajectory.csv"), simlog)
    doc = rep.to_dict()
    doc["events"] = simlog.events
    _atomic_write(os.path.join(spec.out, "metrics.json"), json.dumps(doc, indent=2) + "\n")
    _atomic_write(os.path.join(spec.out, "summary.txt"), summary_text(spec, simlog, rep))
    return exit_code(simlog), rep


def _run_member(spec):
    code, rep = cmd_run(spec)
    return code, rep


def cmd_compare(specs, out, jobs=1):
    """Run each spec and write ``comparison.txt`` and ``comparison.csv`` to ``out``.

    Failed runs are kept in the table and annotated.
    """
    if len(specs) < 2:
        raise BLFError("compare needs at least two runs")
    labels = [s.controller for s in specs]
    if len(set(labels)) < len(labels):
        labels = [f"{s.scenario}_{s.controller}" for s in specs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_member, specs))
    else:
        results = [_run_member(s) for s in specs]
    reports = {lab: rep for lab, (_, rep) in zip(labels, results)}
    notes = {lab: "exit %d" % code for lab, (code, _) in zip(labels, results)}
    text, csv_text = comparison_table(reports, notes=notes)
    os.makedirs(out, exist_ok=True)
    _atomic_write(os.path.join(out, "comparison.txt"), text)
    _atomic_write(os.path.join(out, "comparison.csv"), csv_text)
    sys.stdout.write(text)
    return max(code for code, _ in results)


def _parser():
    p = argparse.ArgumentParser(prog="blfquad", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--scenario", help="preset name: " + ", ".join(list(PRESETS) + list(ALIASES)))
        sp.add_argument("--config", default=os.environ.get(ENV_CONFIG),
                        help=f"JSON override document (default: ${ENV_CONFIG})")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--dt", type=float, default=None)
        sp.add_argument("--horizon", type=float, default=None)
        sp.add_argument("--out", default=".")
        sp.add_argument("-v", "--verbose", action="store_true")

    r = sub.add_parser("run", help="simulate one scenario/controller pair")
    common(r)
    r.add_argument("--controller", default=None)
    c = sub.add_parser("compare", help="compare controllers on one scenario")
    common(c)
    c.add_argument("--controller", nargs="+", required=True)
    c.add_argument("--jobs", type=int, default=1)
    return p


def _specs(args):
    doc = load_config(args.config)
    scenario = args.scenario or doc.pop("scenario", None)
    doc.pop("scenario", None)
    controller = doc.pop("controller", None)
    seed = args.seed if args.seed is not None else int(doc.pop("seed", 0))
    doc.pop("seed", None)
    if scenario is None:
        raise BLFError("no scenario given (--scenario or 'scenario' in the config)")
    ctrls = (args.controller if isinstance(args.controller, list)
             else [args.controller or controller])
    out = args.out
    specs = []
    for ctrl in ctrls:
        sub_out = os.path.join(out, ctrl) if len(ctrls) > 1 else out
        specs.append(RunSpec(scenario, ctrl, doc, seed, args.dt, args.horizon, sub_out))
    return specs


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        specs = _specs(args)
        if args.command == "run":
            code, rep = cmd_run(specs[0])
            if rep is not None:
                with open(os.path.join(specs[0].out, "summary.txt")) as fh:
                    sys.stdout.write(fh.read())
            return code
        return cmd_compare(specs, args.out, args.jobs)
    except (BLFError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
