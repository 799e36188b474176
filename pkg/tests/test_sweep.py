import csv

import numpy as np
import pytest

from tdlescan import sweep as sweep_mod
from tdlescan.detector import ThresholdFunction
from tdlescan.model import NetworkSpec, RunOptions, near_manifold_state
from tdlescan.sweep import (
    CSV_HEADER,
    SweepPoint,
    SweepRecord,
    build_grid,
    efficiency_report,
    format_report,
    point_seed,
    read_records,
    run_point,
    sweep,
    write_manifest,
    write_records,
)

THR = ThresholdFunction(0.2, 0.9, 1e-4, 90.0)


def strip_wall(records):
    return [r.csv_row() for r in records]


def test_point_seed_depends_on_coordinates_only():
    grid = build_grid(6, [1, 2], [0.5, 1.0], 2, 7)
    bigger = build_grid(6, [1, 2, 3], [0.25, 0.5, 1.0], 3, 7)
    assert set(grid) <= set(bigger)
    assert point_seed(7, 6, 1, 0.5, 0) != point_seed(8, 6, 1, 0.5, 0)
    assert len({p.seed for p in bigger}) == len(bigger)


def test_record_csv_roundtrip(tmp_path):
    recs = [SweepRecord(6, 1, 0.5, 3, 0.0314159265358979, True, 12.0, "threshold-crossed",
                        100.0, 0.0588235294117647, 2, 2, 2, "ok", 1.0, 2.0),
            SweepRecord(6, 1, 1.0, 4, 0.0314159265358979, status="diverged")]
    write_records(tmp_path / "r.csv", recs)
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert tuple(rows[0]) == CSV_HEADER
    assert rows[1] == ["6", "1", "0.5", "3", "0.0314159265", "true", "12", "threshold-crossed",
                       "100", "0.0588235294", "2", "2", "2", "ok"]
    assert rows[2][5:13] == [""] * 8 and rows[2][13] == "diverged"
    back = read_records(tmp_path / "r.csv")
    assert back[0].flagged is True and back[0].n_groups == 2 and back[1].flagged is None


def test_read_records_rejects_foreign_csv(tmp_path):
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_records(tmp_path / "x.csv")


def test_empty_grid_gives_empty_output(tmp_path):
    assert sweep([], THR) == []
    write_records(tmp_path / "r.csv", [])
    assert (tmp_path / "r.csv").read_text() == ",".join(CSV_HEADER) + "\n"
    assert build_grid(6, [1], [0.5], 0, 1) == []


def test_run_point_is_deterministic():
    spec = NetworkSpec(4, 1, 1.3)
    opts = RunOptions(time_limit=60)
    a = run_point(spec, 5, THR, True, opts)
    b = run_point(spec, 5, THR, True, opts)
    assert a == b and a.csv_row() == b.csv_row()
    assert a.wall_time_detect is not None and a.wall_time_baseline is not None
    if a.flagged:
        assert a.crossing_time is not None


def test_run_point_complete_synchronization():
    spec = NetworkSpec(6, 1, 10.0)
    rec = run_point(spec, 0, THR, True, RunOptions(), x0=near_manifold_state(spec, 2))
    assert rec.status == "ok"
    assert (rec.n_sync, rec.n_unsync, rec.n_groups) == (15, 0, 1) and rec.dpi == 1.0
    assert rec.baseline_time is not None and rec.baseline_time < 2000


def test_run_point_incoherent_case():
    rec = run_point(NetworkSpec(4, 1, 0.1), 3, THR, False, RunOptions(time_limit=150))
    assert rec.dpi == 0 and rec.n_groups == 0 and rec.termination == "time-limit"
    assert rec.baseline_time is None


def test_divergent_point_has_no_results():
    rec = run_point(NetworkSpec(4, 1, 1.0), 1, THR, True, RunOptions(diverge_limit=0.5))
    assert rec.status == "diverged"
    assert all(getattr(rec, f) is None for f in ("flagged", "dpi", "n_sync", "baseline_time"))


def test_worker_count_does_not_change_output(tmp_path):
    points = build_grid(4, [1, 2], [0.5, 1.5], 2, 11)
    opts = RunOptions(time_limit=25)
    one = sweep(points, THR, opts, workers=1)
    two = sweep(list(reversed(points)), THR, opts, workers=2)
    write_records(tmp_path / "a.csv", one)
    write_records(tmp_path / "b.csv", two)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    keys = [r.key for r in one]
    assert keys == sorted(keys)


def test_msf_pre_exclusion(monkeypatch):
    monkeypatch.setattr(sweep_mod, "msf_stable_alphas", lambda n, r, alphas, *a, **k: {1.5})
    points = build_grid(4, [1], [0.5, 1.5], 1, 3)
    recs = sweep(points, THR, RunOptions(time_limit=5), with_baseline=False, exclude_msf_stable=True)
    assert [r.alpha for r in recs] == [0.5]


def test_failed_point_is_marked_invalid(monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("boom")
    monkeypatch.setattr(sweep_mod, "run_point", boom)
    recs = sweep([SweepPoint(4, 1, 0.5, 1)], THR, RunOptions(time_limit=5))
    assert recs[0].status == "invalid" and recs[0].dpi is None


def test_manifest(tmp_path):
    write_manifest(tmp_path / "m.json", config={"n": 4}, threshold_sha256="ab", grid={"alpha": [1.0]},
                   options=RunOptions(), extra={"percentile": 90.0})
    import json
    m = json.load(open(tmp_path / "m.json"))
    assert m["threshold_sha256"] == "ab" and m["percentile"] == 90.0
    assert m["run_options"]["sync_eps"] == 1e-15 and m["version"]


def make(flagged, crossing, baseline, groups):
    return SweepRecord(6, 1, 1.0, 0, 0.03, flagged, crossing, "x", baseline, 0.1, 1, 4, groups)


def test_efficiency_report_arithmetic():
    rows = efficiency_report({90.0: [make(True, 30.0, 100.0, 1)],
                              95.0: [make(True, 50.0, 50.0, 1), make(True, 10.0, 40.0, 1)]})
    assert rows[0].mean_ratio == pytest.approx(0.30) and rows[0].paired_runs == 1
    assert rows[1].mean_ratio == pytest.approx(0.625) and rows[1].worst_ratio == pytest.approx(1.0)
    eq = efficiency_report({90.0: [make(True, 70.0, 70.0, 2)]})
    assert eq[0].mean_ratio == 1.0
    assert "percentile" in format_report(rows)


def test_efficiency_report_false_positives_and_empty():
    recs = [make(True, 30.0, 2000.0, 0), make(False, None, 2000.0, 0), make(False, None, 90.0, 1)]
    with pytest.warns(UserWarning):
        rows = efficiency_report({90.0: recs})
    assert rows[0].paired_runs == 0 and np.isnan(rows[0].mean_ratio)
    assert rows[0].incoherent_runs == 2 and rows[0].false_positives == 1
    assert rows[0].false_positive_rate == 0.5
