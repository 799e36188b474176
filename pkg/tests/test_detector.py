import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdlescan import detector
from tdlescan.config import ConfigError
from tdlescan.detector import (
    PAIR_SYNCHRONIZED,
    THRESHOLD_CROSSED,
    TIME_LIMIT,
    CalibrationError,
    CrossingMonitor,
    ThresholdFunction,
    calibrate,
    calibrate_threshold,
    calibration_seed,
    delta_dle_max,
    detect,
    first_crossing,
    gap_series,
    run_baseline,
)
from tdlescan.model import NetworkSpec, RunOptions, near_manifold_state
from tdlescan.tdle import TdleSpectrum

finite = st.floats(-5, 5, allow_nan=False)


def test_gap_examples():
    assert delta_dle_max([-0.1, -0.1, -0.1]) == 0
    assert delta_dle_max([0.0, -0.001, -0.002, -0.05, -0.051]) == pytest.approx(0.048)
    assert delta_dle_max([-0.05, 0.0, -0.051, -0.002, -0.001]) == pytest.approx(0.048)
    with pytest.raises(ValueError):
        delta_dle_max([1.0])


def test_gap_skips_frozen_pairs():
    sp = TdleSpectrum(3)
    sp.dle[:] = [0.0, -0.01, -5.0]
    assert delta_dle_max(sp) == pytest.approx(4.99)
    sp.frozen[2] = True
    assert delta_dle_max(sp) == pytest.approx(0.01)
    sp.frozen[1] = True
    with pytest.raises(ValueError):
        delta_dle_max(sp)


@given(st.lists(finite, min_size=2, max_size=30), st.randoms(), finite)
def test_gap_permutation_and_translation_invariant(values, rnd, shift):
    base = delta_dle_max(values)
    shuffled = list(values)
    rnd.shuffle(shuffled)
    assert delta_dle_max(shuffled) == base
    assert delta_dle_max([v + shift for v in values]) == pytest.approx(base, abs=1e-9)
    assert base >= 0


def test_threshold_function_shape_and_roundtrip(tmp_path):
    thr = ThresholdFunction(0.2, 0.9, 1e-4, 92.5, 4, 30, "2026-01-01")
    t = np.array([1.0, 10.0, 100.0])
    np.testing.assert_allclose(thr(t), 0.2 * t ** -0.9 + 1e-4)
    assert np.all(np.diff(thr(np.linspace(1, 2000, 500))) <= 0)
    thr.save(tmp_path / "t.cfg")
    back = ThresholdFunction.load(tmp_path / "t.cfg")
    assert (back.a, back.b, back.c, back.percentile, back.source_n, back.runs, back.created) == \
        (thr.a, thr.b, thr.c, thr.percentile, thr.source_n, thr.runs, thr.created)
    with pytest.raises(ValueError):
        ThresholdFunction(-1.0, 1.0, 0.0, 90)
    with pytest.raises(ValueError):
        ThresholdFunction(1.0, 0.0, 0.0, 90)


def test_threshold_load_errors(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("a = 1\nc = 0\n")
    with pytest.raises(ConfigError) as err:
        ThresholdFunction.load(p)
    assert err.value.key == "b"
    p.write_text("a = x\nb = 1\nc = 0\n")
    with pytest.raises(ConfigError):
        ThresholdFunction.load(p)


def test_calibration_identical_runs_give_common_curve():
    t = np.arange(1, 501, dtype=float)
    curve = 0.3 * t ** -0.8 + 0.002
    runs = np.tile(curve, (7, 1))
    for p in (90, 50, 99):
        thr = calibrate_threshold(runs, p)
        np.testing.assert_allclose(thr.envelope, curve)
        np.testing.assert_allclose(thr(t), curve, rtol=1e-6)


def test_calibration_failures():
    with pytest.raises(CalibrationError):
        calibrate_threshold(np.empty((0, 10)), 90)
    with pytest.raises(CalibrationError):
        calibrate_threshold(-np.ones((4, 50)), 90)
    with pytest.raises(CalibrationError):
        calibrate_threshold(np.ones((4, 50)), 90, times=np.arange(10))


def test_calibrate_without_incoherent_runs_fails(monkeypatch):
    fake = [detector.GapSeries(1, 1.0, 0, False, np.full(10, np.nan))]
    monkeypatch.setattr(detector, "collect_incoherent", lambda *a, **k: fake)
    with pytest.raises(CalibrationError):
        calibrate(4, 90, 1, 0, [1.0])


def test_thresholds_ordered_by_percentile(thresholds):
    t = np.linspace(1, 2000, 4000)
    assert np.all(thresholds[95.0](t) >= thresholds[92.5](t))
    assert np.all(thresholds[92.5](t) >= thresholds[90.0](t))
    for thr in thresholds.values():
        assert thr.a > 0 and thr.b > 0 and thr.c >= 0


series = st.lists(st.tuples(st.floats(0, 1), st.floats(0.01, 1)), min_size=1, max_size=60)


@given(series, st.integers(1, 6))
def test_crossing_invariants(data, confirm):
    gaps = [g for g, _ in data]
    bounds = [b for _, b in data]
    times = list(range(1, len(data) + 1))
    tc = first_crossing(times, gaps, bounds, confirm)
    if tc is None:
        return
    k = times.index(tc)
    assert all(g > b for g, b in zip(gaps[k:k + confirm], bounds[k:k + confirm]))
    if confirm == 1:
        assert all(g <= b for g, b in zip(gaps[:k], bounds[:k]))


@given(series, st.floats(1.0, 5.0), st.integers(1, 6))
def test_raising_threshold_never_crosses_earlier(data, factor, confirm):
    gaps = [g for g, _ in data]
    bounds = [b for _, b in data]
    times = list(range(1, len(data) + 1))
    low = first_crossing(times, gaps, bounds, confirm)
    high = first_crossing(times, gaps, [b * factor for b in bounds], confirm)
    if high is not None:
        assert low is not None and low <= high


def test_monitor_requires_consecutive_samples():
    mon = CrossingMonitor(3)
    flags = [mon.update(t, g, 0.5) for t, g in enumerate([1, 1, 0, 1, 1, 1, 0], start=1)]
    assert flags == [False, False, False, False, False, True, True]
    assert mon.crossing == 4
    with pytest.raises(ValueError):
        CrossingMonitor(0)


@pytest.fixture(scope="module")
def threshold90(thresholds):
    return thresholds[90.0]


def test_detect_flags_partial_synchronization_early(threshold90):
    spec = NetworkSpec(6, 1, 2.75)
    opts = RunOptions(confirm_samples=1)
    res = detect(spec, 1, threshold90, opts)
    assert res.flagged and res.termination_reason == THRESHOLD_CROSSED
    k = int(np.searchsorted(res.times, res.crossing_time))
    assert res.gaps[k] > res.thresholds[k]
    assert np.all(res.gaps[:k] <= res.thresholds[:k])
    base = run_baseline(spec, 1, opts)
    assert base.synchronized and res.crossing_time <= base.time


def test_detect_and_baseline_on_incoherent_run(threshold90):
    spec = NetworkSpec(6, 1, 0.5)
    res = detect(spec, 0, threshold90)
    assert not res.flagged and res.crossing_time is None
    assert res.termination_reason == TIME_LIMIT and res.elapsed_periods == 2000
    assert res.status == "ok" and res.wall_time > 0
    base = run_baseline(spec, 0)
    assert not base.synchronized and base.time == 2000


def test_complete_synchronization_run(threshold90):
    spec = NetworkSpec(6, 1, 10.0)
    x0 = near_manifold_state(spec, 4)
    res = detect(spec, 0, threshold90, x0=x0)
    assert res.termination_reason in (PAIR_SYNCHRONIZED, THRESHOLD_CROSSED)
    base = run_baseline(spec, 0, x0=x0)
    assert base.synchronized and 0 < base.time < 2000
    if res.termination_reason == PAIR_SYNCHRONIZED:
        assert res.elapsed_periods == pytest.approx(np.ceil(base.time))


def test_divergence_is_reported(threshold90):
    spec = NetworkSpec(4, 1, 1.0)
    opts = RunOptions(diverge_limit=0.5)
    assert detect(spec, 0, threshold90, opts).status == "diverged"
    assert run_baseline(spec, 0, opts).status == "diverged"


def test_gap_series_and_seeds_are_deterministic():
    opts = RunOptions(time_limit=20)
    spec = NetworkSpec(4, 1, 0.4)
    a = gap_series(spec, 9, opts)
    b = gap_series(spec, 9, opts)
    np.testing.assert_array_equal(a.gaps, b.gaps)
    assert a.incoherent and a.gaps.shape == (20,) and np.all(np.isfinite(a.gaps))
    assert calibration_seed(1, 1, 0.4, 0) == calibration_seed(1, 1, 0.4, 0)
    assert calibration_seed(1, 1, 0.4, 0) != calibration_seed(1, 2, 0.4, 0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 20), st.floats(0.3, 2.0), st.floats(0, 0.05))
def test_calibration_recovers_power_law(a, b, c):
    t = np.arange(1, 2001, dtype=float)
    scales = np.linspace(0.5, 1.5, 11)
    runs = np.outer(scales, a * t ** -b) + c
    thr = calibrate_threshold(runs, 50)
    assert thr.a == pytest.approx(a, rel=1e-3)
    assert thr.b == pytest.approx(b, abs=1e-3)
    assert thr.c == pytest.approx(c, abs=1e-4)
