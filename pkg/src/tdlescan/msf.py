"""Master stability function of the synchronized ring.

On the synchronization manifold every node follows the isolated-node
trajectory (Laplacian coupling vanishes there), and perturbations decompose
into eigenmodes of ``G``. Mode ``i`` obeys ``z' = (Df + alpha*lambda_i*H) z``,
so one curve of the largest transversal exponent against ``beta = alpha*lambda``
covers every topology and coupling strength.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .model import DEFAULT_H, NetworkSpec, NodeParams, integrate_node, laplacian_eigenvalues


def node_jacobian(state, t: float, p: NodeParams) -> np.ndarray:
    """``[[0, 1], [-3k x^2, -2h]]`` for the Duffing node."""
    return p.jacobian(np.asarray(state, dtype=float), t)


def largest_tle(beta: float, p: NodeParams, horizon: int = 2000, *, H=DEFAULT_H,
                dt_per_period: int = 200, transient: int = 100, x0=(1.0, 0.0),
                z0=(1.0, 0.0)) -> float:
    """Largest transversal Lyapunov exponent of the mode with ``alpha*lambda = beta``.

    The node first relaxes for ``transient`` periods onto its attractor, then
    the variational equation is integrated for ``horizon`` periods with the
    tangent vector renormalised each period. The estimate is the mean log growth
    over the second half of the horizon, per unit time.
    """
    if horizon < 2:
        raise ValueError("horizon must cover at least two periods")
    dt = p.period / dt_per_period
    state = integrate_node(p, np.asarray(x0, dtype=float), 0, transient * dt_per_period, dt)
    if not np.all(np.isfinite(state)):
        raise FloatingPointError("reference trajectory is not finite")
    z = np.asarray(z0, dtype=float).copy()
    z /= np.linalg.norm(z)
    logs = _kernels.tangent_growth(p.kernel, p.jacobian_kernel, p.as_array(), float(beta),
                                   np.asarray(H, dtype=float), state, z, dt,
                                   dt_per_period, int(horizon), transient * dt_per_period)
    if logs.size < horizon or not np.all(np.isfinite(logs)):
        raise FloatingPointError(f"variational integration failed for beta={beta}")
    tail = logs[horizon // 2:]
    return float(tail.mean() / p.period)


def _key(value: float) -> float:
    # 12 significant digits: absorbs eigensolver round-off so equal products share work
    return float(f"{value:.12g}")


def transverse_modes(G, tol: float = 1e-9) -> np.ndarray:
    """Distinct nonzero eigenvalues of ``G`` (degenerate modes collapsed)."""
    lam = laplacian_eigenvalues(G)
    out = []
    for v in lam:
        if abs(v) <= tol:
            continue
        if not out or abs(out[-1] - v) > tol:
            out.append(float(v))
    return np.array([_key(v) for v in out])


@dataclass
class MsfCurve:
    """Transverse exponents per coupling strength and eigenmode.

    ``tle[k, m]`` is the exponent of mode ``modes[m]`` at ``alphas[k]``, i.e.
    at ``beta = alphas[k] * modes[m]``. ``stable[k]`` says whether every
    transverse mode at ``alphas[k]`` lies below ``-margin``. The exponent of the zero (longitudinal) mode is kept for
    reference but never enters the verdict.
    """

    alphas: np.ndarray
    modes: np.ndarray
    tle: np.ndarray                   # shape (len(alphas), len(modes)); nan = failed point
    longitudinal: float
    margin: float = 1e-4
    stable: np.ndarray = field(init=False)

    def __post_init__(self):
        ok = np.all(np.isfinite(self.tle), axis=1)
        self.stable = ok & np.all(self.tle < -self.margin, axis=1)

    @property
    def valid(self) -> np.ndarray:
        return np.all(np.isfinite(self.tle), axis=1)

    @property
    def max_transverse(self) -> np.ndarray:
        return np.max(self.tle, axis=1)

    @property
    def betas(self) -> np.ndarray:
        return np.unique(np.outer(self.alphas, self.modes))

    def intervals(self) -> list[tuple[float, float]]:
        """Maximal runs of consecutive stable grid points as ``(alpha_lo, alpha_hi)``."""
        out = []
        start = None
        for k, s in enumerate(self.stable):
            if s and start is None:
                start = k
            if not s and start is not None:
                out.append((float(self.alphas[start]), float(self.alphas[k - 1])))
                start = None
        if start is not None:
            out.append((float(self.alphas[start]), float(self.alphas[-1])))
        return out

    def columns(self) -> list[str]:
        return (["alpha", "max_tle", "stable", "longitudinal_tle"]
                + [f"tle_lambda_{lam:.6g}" for lam in self.modes])

    def rows(self):
        """One row per alpha: largest transverse exponent, verdict, then per-mode values."""
        for k, alpha in enumerate(self.alphas):
            yield ([float(alpha), float(self.max_transverse[k]), bool(self.stable[k]),
                    float(self.longitudinal)] + [float(v) for v in self.tle[k]])

    def write_csv(self, curve_path, intervals_path) -> None:
        with open(curve_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns())
            for row in self.rows():
                w.writerow([str(int(v)) if isinstance(v, bool) else f"{v:.9g}" for v in row])
        with open(intervals_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["alpha_lo", "alpha_hi"])
            for lo, hi in self.intervals():
                w.writerow([f"{lo:.9g}", f"{hi:.9g}"])


def _tle_or_nan(args):
    beta, node, horizon, kw = args
    try:
        return largest_tle(beta, node, horizon, **kw)
    except FloatingPointError:
        return math.nan


def master_stability(spec: NetworkSpec, alpha_grid, *, horizon: int = 2000,
                     dt_per_period: int = 200, margin: float = 1e-4,
                     workers: int = 1, cache: dict | None = None) -> MsfCurve:
    """Evaluate every transverse mode of ``spec.G`` over ``alpha_grid``.

    Equal products ``alpha*lambda`` are computed once. Failed points come back
    as NaN and are marked invalid (never stable) instead of aborting the scan.
    ``cache`` maps beta to exponent and may be shared between calls.
    """
    alphas = np.asarray(alpha_grid, dtype=float).ravel()
    if alphas.size == 0:
        raise ValueError("alpha grid is empty")
    modes = transverse_modes(spec.G)
    cache = {} if cache is None else cache
    kw = {"H": spec.H, "dt_per_period": dt_per_period}
    betas = sorted({_key(b) for b in np.outer(alphas, modes).ravel()} | {0.0})
    todo = [b for b in betas if b not in cache]
    jobs = [(b, spec.node, horizon, kw) for b in todo]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(_tle_or_nan, jobs))
    else:
        values = [_tle_or_nan(j) for j in jobs]
    cache.update(zip(todo, values))
    tle = np.array([[cache[_key(a * lam)] for lam in modes] for a in alphas])
    return MsfCurve(alphas, modes, tle, cache[0.0], margin)
