"""Early detection of partial synchronization from the pair-exponent spectrum.

While the network evolves, the exponents of pairs that are being pulled
together drift away from the near-zero exponents of incoherent pairs. The
largest gap in the sorted spectrum is compared against a decaying
time-dependent threshold calibrated on incoherent runs of a smaller network.
"""
from __future__ import annotations

import datetime as _dt
import hashlib
import logging
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .config import ConfigError, read_keyvalue, write_keyvalue
from .model import DivergenceError, NetworkSpec, RunOptions, initial_state
from .tdle import TdleRun, TdleSpectrum

log = logging.getLogger(__name__)

THRESHOLD_CROSSED = "threshold-crossed"
PAIR_SYNCHRONIZED = "pair-synchronized"
TIME_LIMIT = "time-limit"
DIVERGED = "diverged"


class CalibrationError(RuntimeError):
    pass


def delta_dle_max(spectrum) -> float:
    """Largest gap between consecutive values of the descending-sorted spectrum.

    Accepts a :class:`TdleSpectrum` (frozen pairs are left out) or any
    sequence of exponent values.
    """
    values = spectrum.active_values() if isinstance(spectrum, TdleSpectrum) else np.asarray(spectrum, dtype=float)
    values = np.ravel(values)
    if values.size < 2:
        raise ValueError("the gap needs at least two exponent values")
    ordered = np.sort(values)[::-1]
    return float(np.max(ordered[:-1] - ordered[1:]))


def power_decay(t, a, b, c):
    return a * np.power(t, -b) + c


@dataclass
class ThresholdFunction:
    """``a * t**(-b) + c`` with ``t`` in forcing periods."""

    a: float
    b: float
    c: float
    percentile: float
    source_n: int = 4
    runs: int = 0
    created: str = ""
    envelope_t: np.ndarray | None = field(default=None, repr=False)
    envelope: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"threshold must decay (a > 0, b > 0), got a={self.a}, b={self.b}")

    def __call__(self, t):
        out = power_decay(np.asarray(t, dtype=float), self.a, self.b, self.c)
        return out if out.ndim else float(out)

    def scaled(self, factor: float) -> "ThresholdFunction":
        return ThresholdFunction(self.a * factor, self.b, self.c * factor, self.percentile,
                                 self.source_n, self.runs, self.created)

    def save(self, path) -> None:
        write_keyvalue(path, {
            "a": repr(float(self.a)), "b": repr(float(self.b)), "c": repr(float(self.c)),
            "percentile": repr(float(self.percentile)), "source_n": int(self.source_n),
            "runs": int(self.runs), "created": self.created,
        }, header="detection threshold a * t^(-b) + c, t in forcing periods")

    @classmethod
    def load(cls, path) -> "ThresholdFunction":
        raw = read_keyvalue(path)
        vals = {}
        for key, kind in (("a", float), ("b", float), ("c", float), ("percentile", float),
                          ("source_n", int), ("runs", int)):
            if key not in raw:
                if key in ("a", "b", "c"):
                    raise ConfigError(key, "missing from threshold file")
                continue
            try:
                vals[key] = kind(float(raw[key])) if kind is int else kind(raw[key])
            except ValueError:
                raise ConfigError(key, f"bad value {raw[key]!r}") from None
        try:
            return cls(created=raw.get("created", ""), **{"percentile": 90.0, **vals})
        except ValueError as exc:
            raise ConfigError("a", str(exc)) from None


def file_digest(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def calibrate_threshold(incoherent_runs, percentile: float = 90.0, times=None, *,
                        n_fit: int = 60, source_n: int = 4,
                        weighting: str = "relative") -> ThresholdFunction:
    """Fit a decaying threshold to the per-time percentile of incoherent gap series.

    ``incoherent_runs`` is an array (runs x samples) on the common grid
    ``times`` (default ``1, 2, ...`` periods); NaN marks missing samples. The
    percentile is taken across runs at each time, then ``a t^-b + c`` is fitted
    by least squares on ``n_fit`` log-spaced samples of that envelope.

    With ``weighting="relative"`` residuals are divided by the envelope, so
    the late, small values count as much as the early ones; ``"absolute"``
    gives the unweighted fit. The offset is kept nonnegative since a negative
    threshold would flag every run once the power law has decayed.
    """
    if weighting not in ("relative", "absolute"):
        raise ValueError(f"unknown weighting {weighting!r}")
    series = np.atleast_2d(np.asarray(incoherent_runs, dtype=float))
    if series.size == 0 or series.shape[0] == 0:
        raise CalibrationError("no incoherent runs to calibrate on")
    times = np.arange(1, series.shape[1] + 1, dtype=float) if times is None else np.asarray(times, dtype=float)
    if times.shape != (series.shape[1],) or np.any(times <= 0):
        raise CalibrationError("times must be positive and match the series length")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        envelope = np.nanpercentile(series, percentile, axis=0)
    good = np.isfinite(envelope) & (envelope > 0)
    if not np.any(good):
        raise CalibrationError("percentile envelope is non-positive everywhere")
    tg, eg = times[good], envelope[good]
    picks = np.unique(np.clip(np.searchsorted(tg, np.geomspace(tg[0], tg[-1], n_fit)), 0, tg.size - 1))
    ts, es = tg[picks], eg[picks]
    if ts.size < 3:
        raise CalibrationError("need at least three positive envelope samples to fit")
    a0 = float(es[0]) * float(ts[0])
    sigma = es if weighting == "relative" else None
    try:
        (a, b, c), _ = curve_fit(power_decay, ts, es, p0=(a0, 1.0, 0.0), sigma=sigma,
                                 bounds=([0.0, 1e-6, 0.0], [np.inf, 10.0, np.inf]),
                                 maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise CalibrationError(f"threshold fit failed: {exc}") from exc
    if not a > 0:
        raise CalibrationError("fitted threshold does not decay")
    return ThresholdFunction(float(a), float(b), float(c), float(percentile), source_n,
                             series.shape[0], _dt.date.today().isoformat(), tg, eg)


class CrossingMonitor:
    """Confirmation logic for threshold crossings on a sampled gap series.

    A crossing is confirmed once ``confirm`` consecutive samples exceed the
    threshold; its time is that of the first sample of the streak.
    """

    def __init__(self, confirm: int = 5):
        if confirm < 1:
            raise ValueError("confirm must be at least 1")
        self.confirm = int(confirm)
        self.streak = 0
        self.start = None
        self.crossing = None

    def update(self, t: float, gap: float, bound: float) -> bool:
        if self.crossing is not None:
            return True
        if gap > bound:
            self.streak += 1
            if self.streak == 1:
                self.start = t
            if self.streak >= self.confirm:
                self.crossing = self.start
                return True
        else:
            self.streak = 0
            self.start = None
        return False

    def reset(self) -> None:
        self.streak = 0
        self.start = None


def first_crossing(times, gaps, thresholds, confirm: int = 5):
    """Confirmed crossing time of a complete series, or ``None``."""
    mon = CrossingMonitor(confirm)
    for t, g, b in zip(times, gaps, thresholds):
        if mon.update(t, g, b):
            return mon.crossing
    return None


@dataclass
class DetectionResult:
    flagged: bool
    crossing_time: float | None
    termination_reason: str
    elapsed_periods: float
    wall_time: float
    times: np.ndarray = field(repr=False, default=None)
    gaps: np.ndarray = field(repr=False, default=None)
    thresholds: np.ndarray = field(repr=False, default=None)

    @property
    def status(self) -> str:
        return "diverged" if self.termination_reason == DIVERGED else "ok"


def detect_run(run: TdleRun, thr: ThresholdFunction, opts: RunOptions | None = None) -> DetectionResult:
    """Run the detector on an existing run, advancing it period by period.

    The gap is sampled once per period. A crossing counts once the gap has
    stayed above the threshold for ``confirm_samples`` consecutive samples and
    is reported at the first of them. The run stops at a confirmed crossing,
    at the first synchronized pair, or at the time limit.
    """
    opts = opts or run.opts
    limit = opts.time_limit
    monitor = CrossingMonitor(opts.confirm_samples)
    times, gaps, thrs = [], [], []
    reason = TIME_LIMIT
    start = time.perf_counter()
    if run.spectrum.frozen.any():
        reason = PAIR_SYNCHRONIZED
    while reason == TIME_LIMIT and run.periods < limit - 1e-9:
        try:
            run.advance_period()
        except DivergenceError:
            reason = DIVERGED
            break
        t = run.periods
        active = run.spectrum.active_values()
        if active.size >= 2:
            gap = delta_dle_max(active)
            bound = thr(t)
            times.append(t)
            gaps.append(gap)
            thrs.append(bound)
            if monitor.update(t, gap, bound):
                reason = THRESHOLD_CROSSED
                break
        else:
            monitor.reset()
        if run.spectrum.frozen.any():
            reason = PAIR_SYNCHRONIZED
    wall = time.perf_counter() - start
    return DetectionResult(reason == THRESHOLD_CROSSED, monitor.crossing, reason, run.periods, wall,
                           np.array(times), np.array(gaps), np.array(thrs))


def detect(spec: NetworkSpec, seed: int, thr: ThresholdFunction, opts: RunOptions | None = None,
           x0=None) -> DetectionResult:
    opts = opts or RunOptions()
    x0 = initial_state(spec, seed, opts.ic_range) if x0 is None else x0
    return detect_run(TdleRun(spec, x0, opts), thr, opts)


@dataclass
class BaselineResult:
    time: float                 # periods
    synchronized: bool
    wall_time: float
    status: str = "ok"
    confirmed_at: float | None = None


def run_baseline(spec: NetworkSpec, seed: int, opts: RunOptions | None = None, x0=None) -> BaselineResult:
    """Reference detector: wait for the first pair to synchronize.

    Each period, the first-pair synchronization time is estimated: the
    recorded time once a pair has crossed ``sync_eps``, otherwise an
    extrapolation of pairs already in sustained decay below
    ``baseline_decay_norm``. The estimate is accepted once it changes by less
    than ``baseline_rel_tol`` (relative) between consecutive periods.
    Incoherent runs return the time limit with ``synchronized=False``.
    """
    opts = opts or RunOptions()
    x0 = initial_state(spec, seed, opts.ic_range) if x0 is None else x0
    run = TdleRun(spec, x0, opts)
    period = spec.node.period
    start = time.perf_counter()
    prev_est = None
    prev_norms = run.norms()
    decaying = np.zeros(prev_norms.shape, dtype=int)
    sp = run.spectrum
    if sp.frozen.any():
        return BaselineResult(0.0, True, time.perf_counter() - start, confirmed_at=0.0)
    while run.periods < opts.time_limit - 1e-9:
        try:
            run.advance_period()
        except DivergenceError:
            return BaselineResult(run.periods, False, time.perf_counter() - start, status="diverged")
        norms = run.norms()
        decaying = np.where(norms < prev_norms, decaying + 1, 0)
        if sp.frozen.any():
            est = float(np.nanmin(sp.freeze_time[sp.frozen])) / period
        else:
            cand = (norms < opts.baseline_decay_norm) & (decaying >= 3) & (norms > 0)
            est = None
            if cand.any():
                rate = np.log(prev_norms[cand] / norms[cand]) / period
                eta = np.log(norms[cand] / opts.sync_eps) / rate
                est = (run.t + float(np.min(eta))) / period
        if est is not None and prev_est is not None and abs(est - prev_est) <= opts.baseline_rel_tol * max(est, 1e-300):
            return BaselineResult(est, True, time.perf_counter() - start, confirmed_at=run.periods)
        prev_est = est
        prev_norms = norms
    if sp.frozen.any():
        est = float(np.nanmin(sp.freeze_time[sp.frozen])) / period
        return BaselineResult(est, True, time.perf_counter() - start, confirmed_at=run.periods)
    return BaselineResult(float(opts.time_limit), False, time.perf_counter() - start)


@dataclass
class GapSeries:
    """Gap time series of one calibration run."""

    radius: int
    alpha: float
    seed: int
    incoherent: bool
    gaps: np.ndarray


def gap_series(spec: NetworkSpec, seed: int, opts: RunOptions | None = None) -> GapSeries:
    """Per-period gap series of a full-length run; stops at the first synchronized pair."""
    opts = opts or RunOptions()
    run = TdleRun.from_seed(spec, seed, opts)
    nper = int(math.ceil(opts.time_limit))
    gaps = np.full(nper, np.nan)
    incoherent = not run.spectrum.frozen.any()
    k = 0
    while incoherent and k < nper:
        try:
            run.advance_period()
        except DivergenceError:
            incoherent = False
            break
        if run.spectrum.frozen.any():
            incoherent = False
            break
        gaps[k] = delta_dle_max(run.spectrum)
        k += 1
    return GapSeries(spec.radius, spec.alpha, seed, incoherent, gaps)


def calibration_seed(master: int, radius: int, alpha: float, replicate: int) -> int:
    key = f"calibrate:{master}:{radius}:{float(alpha).hex()}:{replicate}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little") >> 1


def collect_incoherent(n: int, alphas, runs: int, seed: int, opts: RunOptions | None = None,
                       node=None, radii=None) -> list[GapSeries]:
    """Simulate up to ``runs`` calibration runs over all radii and ``alphas``.

    Runs cycle through the (radius, alpha) grid with per-run seeds derived
    from ``seed``; all runs are returned, callers keep the incoherent ones.
    """
    from .model import NodeParams
    node = node or NodeParams()
    radii = list(range(1, n // 2 + 1)) if radii is None else list(radii)
    grid = [(r, float(a)) for a in alphas for r in radii]
    out = []
    for idx in range(runs):
        r, a = grid[idx % len(grid)]
        rep = idx // len(grid)
        spec = NetworkSpec(n, r, a, node)
        out.append(gap_series(spec, calibration_seed(seed, r, a, rep), opts))
    return out


def calibrate(n: int, percentile: float, runs: int, seed: int, alphas, opts: RunOptions | None = None,
              node=None, radii=None) -> ThresholdFunction:
    """End-to-end calibration from fresh simulations of an ``n``-node network."""
    series = collect_incoherent(n, alphas, runs, seed, opts, node, radii)
    kept = [s.gaps for s in series if s.incoherent]
    log.info("calibration: %d of %d runs incoherent", len(kept), len(series))
    if not kept:
        raise CalibrationError("none of the calibration runs stayed incoherent")
    return calibrate_threshold(np.vstack(kept), percentile, source_n=n)
