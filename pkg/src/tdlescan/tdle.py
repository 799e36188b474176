"""Transversely directed Lyapunov exponents (TDLE) of node pairs.

For every pair ``i < j`` the difference ``z_ij = x_i - x_j`` points out of the
synchronization manifold. Its exponential growth rate, averaged over time,
is the pair's exponent ``DLE_ij``: negative when the pair is drawn together,
near zero when the two nodes wander incoherently on the same attractor.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .model import (
    STATE_DIM,
    DivergenceError,
    NetworkSpec,
    NetworkState,
    RunOptions,
    initial_state,
)


def pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-major upper-triangular pair list ``(0,1), (0,2), ..., (n-2,n-1)``."""
    i, j = np.triu_indices(n, k=1)
    return i.astype(np.int64), j.astype(np.int64)


def pair_index(n: int, i: int, j: int) -> int:
    """Position of pair ``{i, j}`` in the upper-triangular ordering.

    The order of ``i`` and ``j`` does not matter.
    """
    if i == j:
        raise ValueError("a pair needs two distinct nodes")
    if j < i:
        i, j = j, i
    if not 0 <= i < j < n:
        raise IndexError(f"pair ({i}, {j}) out of range for n={n}")
    return i * n - i * (i + 1) // 2 + (j - i - 1)


@dataclass
class PerturbationMatrix:
    """Upper-triangular collection of pair differences ``z_ij``, shape (pairs, m)."""

    n: int
    z: np.ndarray

    @property
    def norms(self) -> np.ndarray:
        return np.hypot(self.z[:, 0], self.z[:, 1]) if self.z.shape[1] == 2 else np.linalg.norm(self.z, axis=1)

    def __getitem__(self, ij) -> np.ndarray:
        i, j = ij
        sign = 1.0 if i < j else -1.0
        return sign * self.z[pair_index(self.n, i, j)]

    def __len__(self) -> int:
        return self.z.shape[0]


def perturbations(s, spec: NetworkSpec) -> PerturbationMatrix:
    """Pair differences of a network state (``NetworkState`` or flat array)."""
    x = s.x if isinstance(s, NetworkState) else np.asarray(s, dtype=float)
    X = x.reshape(spec.n, STATE_DIM)
    i, j = pair_indices(spec.n)
    return PerturbationMatrix(spec.n, X[i] - X[j])


def instantaneous_rate(z, zdot) -> float:
    """Exponential growth rate ``(z . z') / (z . z)`` of ``|z|``."""
    z = np.asarray(z, dtype=float)
    zz = float(z @ z)
    if zz == 0.0:
        raise ZeroDivisionError("growth rate undefined for a zero perturbation; freeze the pair instead")
    return float(z @ np.asarray(zdot, dtype=float)) / zz


def step_rate(z, zdot, dt: float) -> float:
    """Average growth rate of ``|z|`` over one step ``z -> z + dt * zdot``.

    Equals ``ln(|z + dt zdot| / |z|) / dt``, written in terms of the dot
    products so it tends to :func:`instantaneous_rate` as ``dt -> 0``. With
    ``zdot`` the RK4 increment this is exact along the discrete trajectory,
    which a pointwise rate is not: close passes of two nodes make the rate
    spike on time scales far below any practical step.
    """
    z = np.asarray(z, dtype=float)
    zdot = np.asarray(zdot, dtype=float)
    zz = float(z @ z)
    if zz == 0.0:
        raise ZeroDivisionError("growth rate undefined for a zero perturbation; freeze the pair instead")
    u = (2.0 * dt * float(z @ zdot) + dt * dt * float(zdot @ zdot)) / zz
    return math.log1p(u) / (2.0 * dt)


@dataclass
class TdleSpectrum:
    """Per-pair exponent accumulators with stabilization buffers.

    Arrays are indexed by pair in :func:`pair_indices` order.
    """

    n: int
    capacity: int = 200
    std_threshold: float = 1e-3
    decimation: int = 1
    warmup: float = 0.0
    time: float = 0.0
    updates: int = 0
    log_growth: np.ndarray = field(default=None, repr=False)
    elapsed: np.ndarray = field(default=None, repr=False)
    dle: np.ndarray = field(default=None, repr=False)
    frozen: np.ndarray = field(default=None, repr=False)
    freeze_time: np.ndarray = field(default=None, repr=False)
    stabilized: np.ndarray = field(default=None, repr=False)
    stabilized_at: np.ndarray = field(default=None, repr=False)
    buffer: np.ndarray = field(default=None, repr=False)
    fill: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        npair = self.n * (self.n - 1) // 2
        if self.log_growth is None:
            self.log_growth = np.zeros(npair)
            self.elapsed = np.zeros(npair)
            self.dle = np.zeros(npair)
            self.frozen = np.zeros(npair, dtype=bool)
            self.freeze_time = np.full(npair, np.nan)
            self.stabilized = np.zeros(npair, dtype=bool)
            self.stabilized_at = np.full(npair, np.nan)
            self.buffer = np.zeros((npair, self.capacity))
            self.fill = np.zeros(npair, dtype=np.int64)

    @classmethod
    def for_options(cls, n: int, opts: RunOptions) -> "TdleSpectrum":
        return cls(n, capacity=opts.buffer_capacity, std_threshold=opts.std_threshold,
                   decimation=opts.decimation, warmup=opts.warmup)

    @property
    def npairs(self) -> int:
        return self.dle.shape[0]

    @property
    def pairs(self) -> list[tuple[int, int]]:
        i, j = pair_indices(self.n)
        return list(zip(i.tolist(), j.tolist()))

    @property
    def active(self) -> np.ndarray:
        return ~self.frozen

    def value(self, i: int, j: int) -> float:
        return float(self.dle[pair_index(self.n, i, j)])

    def active_values(self) -> np.ndarray:
        return self.dle[~self.frozen]


def update_spectrum(spec: TdleSpectrum, rates, dt: float) -> TdleSpectrum:
    """Advance the running averages of all active pairs by one step.

    ``rates`` holds one growth rate per pair (entries of frozen pairs are
    ignored). The spectrum is updated in place and returned.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (spec.npairs,):
        raise ValueError(f"expected {spec.npairs} rates, got shape {rates.shape}")
    t_end = spec.time + dt
    if t_end > spec.warmup:
        take_sample = spec.updates % spec.decimation == 0
        _kernels.accumulate_rates(rates, dt, t_end, ~spec.frozen, spec.log_growth, spec.elapsed,
                                  spec.dle, spec.buffer, spec.fill, spec.stabilized,
                                  spec.stabilized_at, spec.std_threshold, take_sample)
    spec.time = t_end
    spec.updates += 1
    return spec


def check_stabilization(buffer, capacity: int | None = None, std_threshold: float = 1e-3):
    """Stabilization verdict for a full buffer of recent exponent samples.

    Returns ``None`` while the buffer holds fewer than ``capacity`` samples,
    otherwise whether their sample standard deviation is below
    ``std_threshold``. A ``False`` verdict means the caller empties the buffer
    and starts refilling it.
    """
    buffer = np.asarray(buffer, dtype=float)
    capacity = buffer.size if capacity is None else capacity
    if buffer.size < capacity or capacity < 2:
        return None
    return bool(np.std(buffer[-capacity:], ddof=1) < std_threshold)


def freeze_synchronized(spec: TdleSpectrum, Z: PerturbationMatrix, eps: float = 1e-15) -> TdleSpectrum:
    """Mark pairs with ``|z_ij| < eps`` as synchronized; frozen pairs stay frozen."""
    newly = (Z.norms < eps) & ~spec.frozen
    spec.frozen |= newly
    spec.freeze_time[newly] = spec.time
    return spec


class TdleRun:
    """Stateful network integration with pair-exponent bookkeeping.

    The heavy lifting happens in a compiled kernel; this class holds the state
    between calls, so callers can advance in whole periods and inspect the
    spectrum after each one.
    """

    def __init__(self, spec: NetworkSpec, x0, opts: RunOptions | None = None):
        self.spec = spec
        self.opts = opts or RunOptions()
        self.x = np.array(x0, dtype=float)
        if self.x.shape != (spec.size,):
            raise ValueError(f"initial state has length {self.x.size}, expected {spec.size}")
        self.x0 = self.x.copy()
        self.steps_per_period = int(self.opts.dt_per_period)
        self.dt = self.opts.dt(spec)
        self.step = 0
        self.spectrum = TdleSpectrum.for_options(spec.n, self.opts)
        self.pi, self.pj = pair_indices(spec.n)
        self.status = "ok"
        self._nbr, self._wts = spec.neighbours
        self._node_p = spec.node.as_array()
        self._recent_max = deque(maxlen=max(1, int(self.opts.classify_window)))
        self.initial_norms = perturbations(self.x, spec).norms
        self.spectrum.frozen |= self.initial_norms < self.opts.sync_eps
        self.spectrum.freeze_time[self.spectrum.frozen] = 0.0

    @classmethod
    def from_seed(cls, spec: NetworkSpec, seed: int, opts: RunOptions | None = None) -> "TdleRun":
        opts = opts or RunOptions()
        return cls(spec, initial_state(spec, seed, opts.ic_range), opts)

    @property
    def t(self) -> float:
        return self.step * self.dt

    @property
    def periods(self) -> float:
        return self.step / self.steps_per_period

    @property
    def state(self) -> NetworkState:
        return NetworkState(self.t, self.x.copy())

    def norms(self) -> np.ndarray:
        return perturbations(self.x, self.spec).norms

    def recent_max_norms(self) -> np.ndarray:
        """Largest pair distance over the last ``classify_window`` periods."""
        if not self._recent_max:
            return self.norms()
        return np.max(np.vstack(self._recent_max), axis=0)

    @property
    def all_frozen(self) -> bool:
        return bool(self.spectrum.frozen.all())

    def advance(self, nsteps: int) -> None:
        if self.status != "ok":
            raise DivergenceError("run has already diverged")
        sp = self.spectrum
        zmax = np.zeros(sp.npairs)
        status, taken = _kernels.advance(
            self.x, self.step, int(nsteps), self.dt, self.spec.node.kernel, self._node_p,
            float(self.spec.alpha), self._nbr, self._wts, self.spec.Hmat,
            self.pi, self.pj, sp.log_growth, sp.elapsed, sp.dle, sp.frozen, sp.freeze_time,
            sp.buffer, sp.fill, sp.stabilized, sp.stabilized_at,
            float(sp.std_threshold), int(sp.decimation), float(sp.warmup),
            float(self.opts.sync_eps), float(self.opts.diverge_limit), zmax,
        )
        self.step += taken
        sp.time = self.t
        sp.updates += taken
        self._recent_max.append(zmax)
        if status != _kernels.OK:
            self.status = "diverged"
            raise DivergenceError(f"state left the admissible region at t={self.t:.6g}")

    def advance_period(self) -> None:
        self.advance(self.steps_per_period)

    def log_ratio(self) -> np.ndarray:
        """``ln(|z_ij(t)| / |z_ij(0)|)`` straight from the stored norms."""
        with np.errstate(divide="ignore"):
            return np.log(self.norms() / self.initial_norms)
