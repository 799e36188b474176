"""Parameter scans over coupling strength, radius and initial conditions.

Each grid point runs the detector, keeps integrating the same trajectory to
classify the final synchronization pattern, and optionally repeats the run
with the baseline detector for a paired timing comparison. Records are
written in a fixed order so that results do not depend on how many worker
processes produced them.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .detector import (DIVERGED, ThresholdFunction, detect_run, run_baseline)
from .dpi import dpi_from_counts, sync_groups
from .model import DivergenceError, NetworkSpec, NodeParams, RunOptions, initial_state
from .tdle import TdleRun

log = logging.getLogger(__name__)

CSV_HEADER = ("n", "radius", "alpha", "seed", "dt", "flagged", "crossing_time", "termination",
              "baseline_time", "dpi", "n_sync", "n_unsync", "n_groups", "status")


@dataclass
class SweepRecord:
    n: int
    radius: int
    alpha: float
    seed: int
    dt: float
    flagged: bool | None = None
    crossing_time: float | None = None
    termination: str | None = None
    baseline_time: float | None = None
    dpi: float | None = None
    n_sync: int | None = None
    n_unsync: int | None = None
    n_groups: int | None = None
    status: str = "ok"
    wall_time_detect: float | None = field(default=None, compare=False)
    wall_time_baseline: float | None = field(default=None, compare=False)

    @property
    def key(self):
        return (self.n, self.radius, self.alpha, self.seed)

    def csv_row(self) -> list[str]:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, float):
                return f"{v:.9g}"
            return str(v)
        return [fmt(getattr(self, name)) for name in CSV_HEADER]

    @classmethod
    def from_row(cls, row: dict) -> "SweepRecord":
        def opt(name, kind):
            v = row.get(name, "")
            if v == "":
                return None
            if kind is bool:
                return v == "true"
            return kind(v)
        return cls(int(row["n"]), int(row["radius"]), float(row["alpha"]), int(row["seed"]),
                   float(row["dt"]), opt("flagged", bool), opt("crossing_time", float),
                   opt("termination", str), opt("baseline_time", float), opt("dpi", float),
                   opt("n_sync", int), opt("n_unsync", int), opt("n_groups", int),
                   row.get("status", "ok") or "ok")


def point_seed(master: int, n: int, radius: int, alpha: float, replicate: int) -> int:
    """Initial-condition seed of one grid point.

    Derived from the point's coordinates rather than its position in the
    grid, so enlarging a grid leaves existing points untouched.
    """
    key = f"{master}:{n}:{radius}:{float(alpha).hex()}:{replicate}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little") >> 1


def run_point(spec: NetworkSpec, seed: int, thr: ThresholdFunction, with_baseline: bool = True,
              opts: RunOptions | None = None, continue_to_cap: bool = True,
              x0=None) -> SweepRecord:
    """Detector run, final-pattern classification and optional paired baseline.

    After the detector stops, the same trajectory is integrated on to the time
    limit (or until every pair has merged) and the oscillators are grouped
    from the closing window of that run. The baseline starts from the same
    initial state, which is drawn from ``seed`` unless ``x0`` is given.
    """
    opts = opts or RunOptions()
    rec = SweepRecord(spec.n, spec.radius, float(spec.alpha), int(seed), float(opts.dt(spec)))
    x0 = initial_state(spec, seed, opts.ic_range) if x0 is None else np.asarray(x0, dtype=float)
    run = TdleRun(spec, x0, opts)
    res = detect_run(run, thr, opts)
    rec.wall_time_detect = res.wall_time
    if res.termination_reason == DIVERGED:
        rec.status = "diverged"
        return rec
    try:
        if continue_to_cap:
            while run.periods < opts.time_limit - 1e-9 and not run.all_frozen:
                run.advance_period()
    except DivergenceError:
        rec.status = "diverged"
        return rec
    config = sync_groups(run.spectrum, run.recent_max_norms(), spec.n, opts.classify_eps)
    if with_baseline:
        base = run_baseline(spec, seed, opts, x0=x0)
        rec.wall_time_baseline = base.wall_time
        if base.status != "ok":
            rec.status = "diverged"
            return rec
        rec.baseline_time = float(base.time)
    rec.flagged = res.flagged
    rec.crossing_time = None if res.crossing_time is None else float(res.crossing_time)
    rec.termination = res.termination_reason
    rec.dpi = float(dpi_from_counts(spec.n, *config.triplet))
    rec.n_sync, rec.n_unsync, rec.n_groups = config.triplet
    return rec


@dataclass(frozen=True)
class SweepPoint:
    n: int
    radius: int
    alpha: float
    seed: int


def build_grid(n: int, radii, alphas, seeds: int, master_seed: int) -> list[SweepPoint]:
    """Cartesian grid with ``seeds`` replicates per (radius, alpha)."""
    return [SweepPoint(n, int(r), float(a), point_seed(master_seed, n, int(r), float(a), k))
            for r in radii for a in alphas for k in range(int(seeds))]


def _run_job(job):
    point, node, thr, with_baseline, opts = job
    spec = NetworkSpec(point.n, point.radius, point.alpha, node)
    try:
        return run_point(spec, point.seed, thr, with_baseline, opts)
    except Exception as exc:   # one bad point must not sink the sweep
        log.warning("point %s failed: %s", point, exc)
        return SweepRecord(point.n, point.radius, point.alpha, point.seed, float(opts.dt(spec)),
                           status="invalid")


def msf_stable_alphas(n: int, radius: int, alphas, node: NodeParams, horizon: int = 2000,
                      dt_per_period: int = 200, cache: dict | None = None) -> set[float]:
    from .msf import master_stability
    curve = master_stability(NetworkSpec(n, radius, 1.0, node), alphas, horizon=horizon,
                             dt_per_period=dt_per_period, cache=cache)
    return {float(a) for a, s in zip(curve.alphas, curve.stable) if s}


def sweep(points, thr: ThresholdFunction, opts: RunOptions | None = None, *,
          node: NodeParams | None = None, with_baseline: bool = True, workers: int = 1,
          exclude_msf_stable: bool = False, msf_horizon: int = 2000) -> list[SweepRecord]:
    """Run every grid point and return records sorted by (n, radius, alpha, seed)."""
    opts = opts or RunOptions()
    node = node or NodeParams()
    points = list(points)
    if exclude_msf_stable and points:
        cache: dict = {}
        stable = {}
        for n, r in sorted({(p.n, p.radius) for p in points}):
            alphas = sorted({p.alpha for p in points if (p.n, p.radius) == (n, r)})
            stable[(n, r)] = msf_stable_alphas(n, r, alphas, node, msf_horizon,
                                               opts.dt_per_period, cache)
        points = [p for p in points if p.alpha not in stable[(p.n, p.radius)]]
    jobs = [(p, node, thr, with_baseline, opts) for p in points]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_job, jobs, chunksize=1))
    else:
        records = [_run_job(j) for j in jobs]
    return sorted(records, key=lambda r: r.key)


def write_records(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for rec in records:
            w.writerow(rec.csv_row())


def read_records(path) -> list[SweepRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: not a sweep result file")
        return [SweepRecord.from_row(row) for row in reader]


def write_manifest(path, *, config: dict, threshold_path=None, threshold_sha256=None,
                   grid: dict, options: RunOptions | None = None, extra: dict | None = None) -> None:
    manifest = {
        "tool": "tdlescan",
        "version": __version__,
        "config": config,
        "threshold_file": None if threshold_path is None else os.fspath(threshold_path),
        "threshold_sha256": threshold_sha256,
        "grid": grid,
        "run_options": None if options is None else asdict(options),
    }
    if extra:
        manifest.update(extra)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=list)
        fh.write("\n")


@dataclass
class EfficiencyRow:
    percentile: float
    paired_runs: int
    mean_ratio: float
    worst_ratio: float
    incoherent_runs: int
    false_positives: int

    @property
    def false_positive_rate(self) -> float:
        return self.false_positives / self.incoherent_runs if self.incoherent_runs else 0.0


def efficiency_report(records_by_percentile: dict) -> list[EfficiencyRow]:
    """Detection-time ratios against the baseline, one row per threshold percentile.

    A record is paired when it was flagged, has a baseline time and ended in a
    synchronized pattern; its ratio is ``crossing_time / baseline_time``. Runs
    that ended fully incoherent (no group at all) count as false positives
    when flagged.
    """
    rows = []
    for pct in sorted(records_by_percentile):
        recs = [r for r in records_by_percentile[pct] if r.status == "ok"]
        ratios = [r.crossing_time / r.baseline_time for r in recs
                  if r.flagged and r.baseline_time and r.n_groups]
        incoherent = [r for r in recs if r.n_groups == 0]
        fp = sum(1 for r in incoherent if r.flagged)
        if not ratios:
            warnings.warn(f"no paired runs for percentile {pct}")
        rows.append(EfficiencyRow(float(pct), len(ratios),
                                  float(np.mean(ratios)) if ratios else math.nan,
                                  float(np.max(ratios)) if ratios else math.nan,
                                  len(incoherent), fp))
    return rows


def format_report(rows) -> str:
    lines = [f"{'percentile':>10}  {'paired':>6}  {'mean[%]':>8}  {'worst[%]':>8}  "
             f"{'incoherent':>10}  {'false+':>6}"]
    for r in rows:
        lines.append(f"{r.percentile:>10g}  {r.paired_runs:>6d}  {100 * r.mean_ratio:>8.2f}  "
                     f"{100 * r.worst_ratio:>8.2f}  {r.incoherent_runs:>10d}  {r.false_positives:>6d}")
    return "\n".join(lines)
