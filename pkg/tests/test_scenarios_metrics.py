import numpy as np
import pytest

from blfquad.errors import ConfigError
from blfquad.metrics import MetricsReport, comparison_rows, comparison_table, rms_peak
from blfquad.scenarios import (circle_follow_scenario, load_preset, load_scenario, merge_config,
                               pipe_scenario, ring_scenario)


def _sample(ref, T, n=4001):
    return np.array([ref(t) for t in np.linspace(0.0, T, n)])


def test_pipe_events_in_order():
    sc = pipe_scenario()
    assert [e.delta_mass for e in sc.events] == [0.4, -0.4, 0.8, -0.8]
    assert all(a.time < b.time for a, b in zip(sc.events, sc.events[1:]))
    assert sc.events[-1].time < sc.horizon


def test_pipe_reference_starts_at_origin():
    sc = pipe_scenario()
    r0 = sc.reference(0.0)
    np.testing.assert_array_equal(r0[:9], 0.0)


def test_pipe_reference_acceleration_bounded():
    sc = pipe_scenario()
    r = _sample(sc.reference, sc.horizon)
    assert np.max(np.linalg.norm(r[:, 6:9], axis=1)) < 2.0
    assert sc.reference.max_accel() < 2.0


def test_waypoint_reference_derivatives_consistent():
    ref = pipe_scenario().reference
    h = 1e-5
    for t in (2.0, 9.3, 20.1, 40.7):
        fd = (ref(t + h) - ref(t - h)) / (2 * h)
        np.testing.assert_allclose(fd[:3], ref(t)[3:6], atol=1e-8)
        np.testing.assert_allclose(fd[3:6], ref(t)[6:9], atol=1e-6)


def test_ring_events_and_wind():
    sc = ring_scenario()
    drops = [e for e in sc.events if e.delta_mass < 0]
    assert drops[0].time == 60.0
    assert all(tuple(e.offset) == (0.02, 0.0, 0.0) for e in sc.events)
    real = sc.realize(3)
    from blfquad.plants import eval_disturbance
    d = np.array([eval_disturbance(real.disturbance[0], t) for t in (0.0, 11.0, 57.3)])
    np.testing.assert_allclose(d[:, 0], d[:, 1], atol=1e-15)
    # gusts ride on the mean, so the push never reverses
    assert np.all(np.sign(d[:, 0]) == np.sign(d[0, 0])) and d[0, 0] != 0


def test_circle_layout():
    sc = circle_follow_scenario()
    r = _sample(sc.reference, sc.horizon)
    np.testing.assert_allclose(r[:, 2], 1.2)
    speed = np.linalg.norm(r[:, 3:6], axis=1)
    np.testing.assert_allclose(speed, speed[0], rtol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(r[:, :2], axis=1), 1.0, rtol=1e-12)
    drop = [e for e in sc.events if e.delta_mass < 0]
    assert len(drop) == 1 and drop[0].time == 37.0 and drop[0].delta_mass == -0.3


def test_clearance_check():
    with pytest.raises(ConfigError):
        load_scenario("pipe", {"constraints": {"k_p": [0.5, 0.5, 0.16]}})


def test_acceleration_check():
    seg = load_preset("pipe")["reference"]["segments"]
    seg[2]["duration"] = 2
    with pytest.raises(ConfigError):
        load_scenario("pipe", {"reference": {"segments": seg}})


def test_merge_config_schema():
    base = load_preset("circle")
    with pytest.raises(ConfigError):
        merge_config(base, {"gains": {"no_such": 1.0}})
    with pytest.raises(ConfigError):
        merge_config(base, {"gains": {"eps_p": "large"}})
    with pytest.raises(ConfigError):
        merge_config(base, {"gains": {"Lambda_1p": [1.0, 1.0]}})
    out = merge_config(base, {"gains": {"eps_p": 0.2}})
    assert out["gains"]["eps_p"] == 0.2 and base["gains"]["eps_p"] == 0.1


def test_unknown_scenario():
    with pytest.raises(ConfigError):
        load_preset("ch9")


def test_rms_peak_constant():
    r, p = rms_peak(np.full(100, 0.1))
    assert r[0] == pytest.approx(0.1, rel=1e-14) and p[0] == 0.1


def test_rms_peak_sine():
    t = np.linspace(0, 2 * np.pi, 100001)[:-1]
    r, p = rms_peak(0.3 * np.sin(t))
    assert r[0] == pytest.approx(0.3 / np.sqrt(2), rel=1e-9)
    assert p[0] == pytest.approx(0.3, rel=1e-9)


def test_rms_peak_properties():
    rng = np.random.default_rng(4)
    e = rng.normal(size=(500, 3))
    r, p = rms_peak(e)
    assert np.all(p >= r)
    r2, p2 = rms_peak(rng.permutation(e))
    np.testing.assert_allclose(r, r2, rtol=1e-12)
    np.testing.assert_array_equal(p, p2)
    with pytest.raises(ValueError):
        rms_peak(np.zeros((0, 3)))


def _report(v):
    rep = MetricsReport()
    for b in ("position", "attitude", "velocity", "rate"):
        rep.rms[b] = [v] * 3
        rep.peak[b] = [2 * v] * 3
    return rep


def test_comparison_table_shape():
    reps = {"rsb": _report(0.1), "smc": _report(0.2)}
    rows = comparison_rows(reps, ["position", "attitude"])
    assert len(rows) == 6 and all(len(r) == 3 + 2 * 2 for r in rows)
    assert len(comparison_rows(reps)) == 12
    text, csv_text = comparison_table(reps)
    assert len(csv_text.strip().splitlines()) == 13
    assert "rsb: status=completed" in text


def test_comparison_table_failed_run():
    text, csv_text = comparison_table({"rsb": _report(0.1), "smc": None}, notes={"smc": "boom"})
    assert "smc: run failed (boom)" in text
    assert "nan" in csv_text
