"""Command-line interface.

Subcommands::

    tdlescan msf        transverse exponents over an alpha grid
    tdlescan calibrate  fit a detection threshold on small incoherent networks
    tdlescan detect     run the detector (and optionally the baseline) once
    tdlescan sweep      scan alpha x radius x seeds, write results + manifest
    tdlescan dpi        classify / analytic surfaces / enumerate configurations
    tdlescan report     efficiency table from one or more sweep results

Outputs go only to the ``--out`` path and existing files are kept unless
``--force`` is given. Exit status: 0 success, 1 runtime failure, 2 usage or
configuration error, 3 calibration failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig
from .detector import (CalibrationError, ThresholdFunction, calibrate, detect_run,
                       file_digest, run_baseline)
from .dpi import (SyncConfiguration, dpi_exact, dpi_from_counts, dpi_two_groups,
                  enumerate_configurations, groups_from_pairs, second_type_count)
from .model import DivergenceError, RunOptions, initial_state
from .msf import master_stability
from .sweep import (build_grid, efficiency_report, format_report, read_records, sweep,
                    write_manifest, write_records)
from .tdle import TdleRun, pair_indices

log = logging.getLogger("tdlescan")

EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_CALIBRATION = 3


class UsageError(Exception):
    pass


def parse_range(text: str) -> np.ndarray:
    """``lo:hi:step`` -> ``lo, lo+step, ...`` strictly below ``hi``; also ``a,b,c`` or ``a``.

    A point closer to ``hi`` than a millionth of a step counts as ``hi`` and
    is left out. Values are rounded to 12 significant digits so that grids are
    identical across platforms.
    """
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                raise ValueError
            lo, hi, step = parts
            if not step > 0 or not hi > lo:
                raise UsageError(f"range {text!r}: need lo < hi and step > 0")
            count = int(math.ceil((hi - lo) / step - 1e-6))
            values = lo + step * np.arange(count)
        else:
            values = np.array([float(p) for p in text.split(",") if p.strip()])
    except ValueError:
        raise UsageError(f"cannot parse range {text!r}; expected lo:hi:step or a comma list") from None
    if values.size == 0:
        raise UsageError(f"range {text!r} is empty")
    return np.array([float(f"{v:.12g}") for v in values])


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of integers, got {text!r}") from None


def _outpath(path, force: bool, directory: bool = False) -> Path:
    path = Path(path)
    if directory:
        path.mkdir(parents=True, exist_ok=True)
        return path
    if path.exists() and not force:
        raise UsageError(f"{path} exists; pass --force to overwrite")
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _check_free(paths, force: bool) -> None:
    for p in paths:
        if Path(p).exists() and not force:
            raise UsageError(f"{p} exists; pass --force to overwrite")


def _network_args(p: argparse.ArgumentParser, alpha_help: str = "coupling strength") -> None:
    g = p.add_argument_group("network")
    g.add_argument("--config", metavar="FILE", help="key = value network file; flags override it")
    g.add_argument("--n", type=int, help="number of oscillators")
    g.add_argument("--radius", help="coupling radius (comma list where a command scans radii)")
    g.add_argument("--alpha", help=alpha_help)
    g.add_argument("--dt-per-period", type=int, help="RK4 steps per forcing period (default 200)")


def _run_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run")
    g.add_argument("--time-limit", type=float, default=2000.0, metavar="PERIODS",
                   help="simulation cap in forcing periods (default 2000)")
    g.add_argument("--confirm", type=int, default=5, metavar="K",
                   help="consecutive samples above threshold needed to flag (default 5)")


def _load_config(args, *, radius=None, alpha=None) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    return cfg.override({"n": args.n, "radius": radius, "alpha": alpha,
                         "dt_per_period": getattr(args, "dt_per_period", None)})


def _run_options(cfg: RunConfig, args) -> RunOptions:
    try:
        return cfg.run_options(time_limit=args.time_limit, confirm_samples=args.confirm)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _seed(args, cfg: RunConfig) -> int:
    if args.seed is not None:
        return args.seed
    if cfg.ic_seed is not None:
        return cfg.ic_seed
    raise UsageError("--seed is required (or set ic_seed in the config file)")


# ----------------------------------------------------------------------------- commands

def _alpha_grid(args) -> np.ndarray:
    if args.alpha is None:
        raise UsageError("--alpha is required")
    return parse_range(args.alpha)


def cmd_msf(args) -> int:
    alphas = _alpha_grid(args)
    radius = None if args.radius is None else int(args.radius)
    cfg = _load_config(args, radius=radius, alpha=float(alphas[0]))
    out = _outpath(args.out, args.force, directory=True)
    curve_path, intervals_path = out / "msf_curve.csv", out / "msf_intervals.csv"
    _check_free([curve_path, intervals_path], args.force)
    curve = master_stability(cfg.spec(), alphas, horizon=args.horizon,
                             dt_per_period=cfg.dt_per_period, margin=args.margin,
                             workers=args.workers)
    curve.write_csv(curve_path, intervals_path)
    print(f"modes: {', '.join(f'{m:.6g}' for m in curve.modes)}")
    print(f"stable intervals: {curve.intervals() or 'none'}")
    print(f"wrote {curve_path} and {intervals_path}")
    return 0


def cmd_calibrate(args) -> int:
    if args.n is None and not args.config:
        args.n = 4
    cfg = _load_config(args, radius=1, alpha=1.0)
    opts = _run_options(cfg, args)
    alphas = parse_range(args.alpha)
    radii = None if args.radius is None else parse_int_list(args.radius)
    out = _outpath(args.out, args.force)
    envelope_path = Path(str(out) + ".envelope.csv")
    _check_free([envelope_path], args.force)
    thr = calibrate(cfg.n, args.percentile, args.runs, args.seed, alphas, opts,
                    node=cfg.node(), radii=radii)
    thr.save(out)
    with open(envelope_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "envelope", "threshold"])
        for t, e in zip(thr.envelope_t, thr.envelope):
            w.writerow([f"{t:.9g}", f"{e:.9g}", f"{thr(t):.9g}"])
    print(f"threshold {thr.a:.6g} * t^-{thr.b:.6g} + {thr.c:.6g} "
          f"(p={thr.percentile:g}, {thr.runs} incoherent runs of n={cfg.n})")
    print(f"wrote {out}")
    return 0


def cmd_detect(args) -> int:
    radius = None if args.radius is None else int(args.radius)
    alpha = None if args.alpha is None else float(args.alpha)
    cfg = _load_config(args, radius=radius, alpha=alpha)
    opts = _run_options(cfg, args)
    seed = _seed(args, cfg)
    thr = ThresholdFunction.load(args.threshold)
    spec = cfg.spec()
    if args.out:
        out = _outpath(args.out, args.force, directory=True)
        series_path, state_path = out / "detection.csv", out / "final_state.csv"
        _check_free([series_path, state_path], args.force)
    x0 = initial_state(spec, seed, opts.ic_range)
    run = TdleRun(spec, x0, opts)
    res = detect_run(run, thr, opts)
    if res.termination_reason == "diverged":
        print("run diverged", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"network: n={spec.n} radius={spec.radius} alpha={spec.alpha:g} seed={seed}")
    print(f"flagged: {str(res.flagged).lower()}")
    print(f"crossing_time: {'' if res.crossing_time is None else f'{res.crossing_time:g}'}")
    print(f"termination: {res.termination_reason}")
    print(f"elapsed_periods: {res.elapsed_periods:g}")
    if args.classify:
        while run.periods < opts.time_limit - 1e-9 and not run.all_frozen:
            run.advance_period()
        from .dpi import sync_groups
        config = sync_groups(run.spectrum, run.recent_max_norms(), spec.n, opts.classify_eps)
        print(f"groups: {list(config.group_sizes)}")
        print(f"dpi: {dpi_from_counts(spec.n, *config.triplet):.6g} "
              f"(n_sync={config.n_sync}, n_unsync={config.n_unsync}, n_groups={config.n_groups})")
    if args.baseline:
        base = run_baseline(spec, seed, opts, x0=x0)
        print(f"baseline_time: {base.time:g} ({'synchronized' if base.synchronized else 'time limit'})")
    if args.out:
        with open(series_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "gap", "threshold"])
            for row in zip(res.times, res.gaps, res.thresholds):
                w.writerow([f"{v:.9g}" for v in row])
        with open(state_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "v"])
            for x, v in run.x.reshape(spec.n, 2):
                w.writerow([repr(float(x)), repr(float(v))])
        print(f"wrote {series_path} and {state_path}")
    return 0


def cmd_sweep(args) -> int:
    alphas = _alpha_grid(args)
    radii = parse_int_list(args.radius) if args.radius else None
    cfg = _load_config(args, radius=(radii or [None])[0], alpha=float(alphas[0]))
    radii = radii or [cfg.radius]
    for r in radii:
        cfg.override({"radius": r})
    opts = _run_options(cfg, args)
    seed = _seed(args, cfg)
    thr = ThresholdFunction.load(args.threshold)
    out = _outpath(args.out, args.force, directory=True)
    results, manifest = out / "results.csv", out / "manifest.json"
    _check_free([results, manifest], args.force)
    points = build_grid(cfg.n, radii, alphas, args.seeds, seed)
    workers = args.workers or os.cpu_count() or 1
    records = sweep(points, thr, opts, node=cfg.node(), with_baseline=not args.no_baseline,
                    workers=workers, exclude_msf_stable=args.exclude_msf_stable)
    write_records(results, records)
    write_manifest(manifest, config=cfg.as_dict(), threshold_path=args.threshold,
                   threshold_sha256=file_digest(args.threshold),
                   grid={"n": cfg.n, "radius": radii, "alpha": [float(a) for a in alphas],
                         "seeds": args.seeds, "master_seed": seed,
                         "exclude_msf_stable": bool(args.exclude_msf_stable)},
                   options=opts, extra={"percentile": thr.percentile})
    bad = sum(r.status != "ok" for r in records)
    print(f"{len(records)} records ({bad} not ok) -> {results}")
    return 0


def cmd_dpi(args) -> int:
    if args.dpi_command == "classify":
        return _dpi_classify(args)
    if args.dpi_command == "surface":
        return _dpi_surface(args)
    return _dpi_enumerate(args)


def _dpi_classify(args) -> int:
    if args.groups is not None:
        if args.n is None:
            raise UsageError("--groups needs --n")
        try:
            config = SyncConfiguration(args.n, tuple(parse_int_list(args.groups)))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        with open(args.run, newline="") as fh:
            rows = [r for r in csv.DictReader(fh)]
        try:
            X = np.array([[float(r["x"]), float(r["v"])] for r in rows])
        except (KeyError, ValueError):
            raise UsageError(f"{args.run}: expected columns x,v with one row per oscillator") from None
        n = X.shape[0]
        i, j = pair_indices(n)
        dist = np.hypot(X[i, 0] - X[j, 0], X[i, 1] - X[j, 1])
        config = groups_from_pairs(n, dist < args.eps)
    print(f"groups: {list(config.group_sizes)}")
    print(f"n_sync,n_unsync,n_groups: {config.n_sync},{config.n_unsync},{config.n_groups}")
    print(f"dpi: {float(dpi_exact(config)):.9g}")
    return 0


def _dpi_surface(args) -> int:
    n = args.n
    out = _outpath(args.out, args.force)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if args.family == "equal":
            w.writerow(["group_size", "n_groups", "n_sync", "dpi"])
            for g in range(2, n + 1):
                for k in range(1, n // g + 1):
                    n_sync = k * g * (g - 1) // 2
                    w.writerow([g, k, n_sync, f"{dpi_from_counts(n, n_sync, n - k * g, k):.9g}"])
        else:
            w.writerow(["group_size1", "groups1", "groups2", "dpi"])
            for g in range(2, n + 1):
                for k in range(1, n // g + 1):
                    w.writerow([g, k, second_type_count(g, k, n), f"{dpi_two_groups(g, k, n):.9g}"])
    print(f"wrote {out}")
    return 0


def _dpi_enumerate(args) -> int:
    try:
        configs = enumerate_configurations(args.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    fh = open(_outpath(args.out, args.force), "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["groups", "n_sync", "n_unsync", "n_groups", "dpi"])
        for c in configs:
            w.writerow(["+".join(map(str, c.group_sizes)), c.n_sync, c.n_unsync, c.n_groups,
                        f"{float(dpi_exact(c)):.9g}"])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_report(args) -> int:
    groups: dict[float, list] = {}
    for item in args.results:
        pct, _, path = item.rpartition("=")
        path = Path(path)
        if path.is_dir():
            path = path / "results.csv"
        if pct:
            try:
                percentile = float(pct)
            except ValueError:
                raise UsageError(f"bad percentile in {item!r}") from None
        else:
            manifest = path.parent / "manifest.json"
            if not manifest.exists():
                raise UsageError(f"{path}: no manifest.json beside it; use PERCENTILE=PATH")
            with open(manifest) as mf:
                percentile = float(json.load(mf)["percentile"])
        try:
            groups.setdefault(percentile, []).extend(read_records(path))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    rows = efficiency_report(groups)
    print(format_report(rows))
    if args.out:
        out = _outpath(args.out, args.force)
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["percentile", "paired_runs", "mean_ratio", "worst_ratio",
                        "incoherent_runs", "false_positives"])
            for r in rows:
                w.writerow([f"{r.percentile:g}", r.paired_runs, f"{r.mean_ratio:.9g}",
                            f"{r.worst_ratio:.9g}", r.incoherent_runs, r.false_positives])
    return 0


# ----------------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tdlescan",
        description="Pair-exponent detection of partial synchronization in rings of "
                    "forced Duffing oscillators.",
        epilog="Exit status: 0 ok, 1 runtime failure, 2 usage/config error, "
               "3 calibration failure.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("msf", help="transverse exponents and stable alpha intervals",
                       description="Evaluate the largest transverse exponent of every "
                                   "Laplacian mode over an alpha grid. Writes "
                                   "OUT/msf_curve.csv and OUT/msf_intervals.csv.")
    _network_args(p, alpha_help="alpha grid, lo:hi:step or comma list (required)")
    p.add_argument("--horizon", type=int, default=2000, metavar="PERIODS",
                   help="variational integration length (default 2000)")
    p.add_argument("--margin", type=float, default=1e-4,
                   help="an exponent counts as negative below -MARGIN (default 1e-4)")
    p.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.set_defaults(func=cmd_msf)

    p = sub.add_parser("calibrate", help="fit a detection threshold",
                       description="Simulate a small network over all radii and an alpha "
                                   "grid, keep incoherent runs and fit a*t^-b + c to the "
                                   "per-period percentile of the largest spectral gap. "
                                   "Writes the threshold file OUT and OUT.envelope.csv.")
    _network_args(p, alpha_help="alpha grid for the calibration runs (default 0.1:3.1:0.3)")
    p.set_defaults(n=None)
    p.set_defaults(alpha="0.1:3.1:0.3")
    p.add_argument("--percentile", type=float, default=90.0, help="envelope percentile (default 90)")
    p.add_argument("--runs", type=int, default=64, help="number of simulated runs (default 64)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    _run_args(p)
    p.add_argument("--out", required=True, metavar="FILE", help="threshold file to write")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("detect", help="run the detector on one network",
                       description="Integrate one network from seeded initial conditions "
                                   "and report whether and when the spectral gap crosses "
                                   "the threshold.")
    _network_args(p)
    p.add_argument("--threshold", required=True, metavar="FILE", help="threshold file")
    p.add_argument("--seed", type=int, help="initial-condition seed (required unless ic_seed is set)")
    p.add_argument("--baseline", action="store_true", help="also run the baseline detector")
    p.add_argument("--classify", action="store_true",
                   help="continue to the time limit and report groups and DPI")
    _run_args(p)
    p.add_argument("--out", metavar="DIR",
                   help="write OUT/detection.csv (gap series) and OUT/final_state.csv")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("sweep", help="scan alpha x radius x seeds",
                       description="Run detector, classification and baseline over a grid. "
                                   "Writes OUT/results.csv and OUT/manifest.json.")
    _network_args(p, alpha_help="alpha grid, lo:hi:step or comma list (required)")
    p.add_argument("--seeds", type=int, default=1, help="replicates per grid point (default 1)")
    p.add_argument("--seed", type=int, help="master seed (required unless ic_seed is set)")
    p.add_argument("--threshold", required=True, metavar="FILE", help="threshold file")
    p.add_argument("--workers", type=int, default=0,
                   help="worker processes (default: number of CPUs)")
    p.add_argument("--no-baseline", action="store_true", help="skip the paired baseline runs")
    p.add_argument("--exclude-msf-stable", action="store_true",
                   help="drop alpha values where complete synchronization is stable")
    _run_args(p)
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("dpi", help="Dynamical Phenomena Indicator tools",
                       description="Classify synchronization patterns and tabulate DPI.")
    dsub = p.add_subparsers(dest="dpi_command", metavar="ACTION", required=True)
    q = dsub.add_parser("classify", help="groups and DPI of a state or group list",
                        description="Group oscillators of a final state (CSV with columns "
                                    "x,v) or of an explicit group-size list.")
    src = q.add_mutually_exclusive_group(required=True)
    src.add_argument("--run", metavar="CSV", help="final state file written by detect --out")
    src.add_argument("--groups", metavar="SIZES", help="comma-separated group sizes, e.g. 3,2")
    q.add_argument("--n", type=int, help="number of oscillators (with --groups)")
    q.add_argument("--eps", type=float, default=1e-12,
                   help="pair distance below which two oscillators are synchronized")
    q.set_defaults(func=cmd_dpi)
    q = dsub.add_parser("surface", help="analytic DPI over a group family",
                        description="Tabulate DPI for equal-size groups or for groups of "
                                    "two sizes differing by one oscillator.")
    q.add_argument("--family", choices=("equal", "two"), required=True,
                   help="equal: groups of one size; two: sizes g and g+1 with maximal packing")
    q.add_argument("--n", type=int, default=100, help="number of oscillators (default 100)")
    q.add_argument("--out", required=True, metavar="FILE", help="CSV to write")
    q.add_argument("--force", action="store_true", help="overwrite existing outputs")
    q.set_defaults(func=cmd_dpi)
    q = dsub.add_parser("enumerate", help="all configurations by descending DPI",
                        description="List every multiset of group sizes for n <= 12.")
    q.add_argument("--n", type=int, required=True, help="number of oscillators")
    q.add_argument("--out", metavar="FILE", help="CSV to write (default: stdout)")
    q.add_argument("--force", action="store_true", help="overwrite existing outputs")
    q.set_defaults(func=cmd_dpi)

    p = sub.add_parser("report", help="detection efficiency table",
                       description="Compare detector crossing times with baseline times. "
                                   "Each RESULTS is a sweep directory, a results.csv, or "
                                   "PERCENTILE=PATH.")
    p.add_argument("results", nargs="+", metavar="RESULTS")
    p.add_argument("--out", metavar="FILE", help="also write the table as CSV")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"tdlescan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CalibrationError as exc:
        print(f"tdlescan: calibration failed: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except FileNotFoundError as exc:
        print(f"tdlescan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DivergenceError, RuntimeError, OSError, ValueError) as exc:
        print(f"tdlescan: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
