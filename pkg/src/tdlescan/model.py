"""Ring networks of forced Duffing (Ueda-type) oscillators.

The network obeys

    x' = f(x, t) + alpha * (G kron H) x

with ``G`` the ring Laplacian of coupling radius ``R`` and ``H`` selecting
which node variables take part in the coupling. Node ``j`` occupies slots
``[2j, 2j + 2)`` of the flat state vector as ``(position, velocity)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels

STATE_DIM = 2
DEFAULT_H = ((0.0, 0.0), (1.0, 0.0))


class DivergenceError(RuntimeError):
    """Raised when an integration produces non-finite or runaway values."""


@dataclass(frozen=True)
class NodeParams:
    """Periodically forced cubic oscillator ``x'' + 2h x' + k x^3 = F cos(omega t)``.

    The defaults put an isolated node in the classical chaotic Ueda regime.
    """

    h: float = 0.025
    k: float = 1.0
    F: float = 7.5
    omega: float = 1.0

    dim = STATE_DIM
    kernel = staticmethod(_kernels.duffing_rhs)
    jacobian_kernel = staticmethod(_kernels.duffing_jac)

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not self.k > 0:
            raise ValueError(f"k must be positive, got {self.k}")
        if not self.h >= 0:
            raise ValueError(f"h must be non-negative, got {self.h}")
        if not self.F >= 0:
            raise ValueError(f"F must be non-negative, got {self.F}")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    def as_array(self) -> np.ndarray:
        return np.array([self.h, self.k, self.F, self.omega], dtype=float)

    def rhs(self, state, t: float) -> np.ndarray:
        x, v = state
        return np.array([v, -2.0 * self.h * v - self.k * x**3 + self.F * math.cos(self.omega * t)])

    def jacobian(self, state, t: float) -> np.ndarray:
        x = state[0]
        return np.array([[0.0, 1.0], [-3.0 * self.k * x * x, -2.0 * self.h]])


def node_rhs(state, t: float, p: NodeParams) -> np.ndarray:
    """Derivative ``(v, -2hv - kx^3 + F cos(omega t))`` of a single node."""
    return p.rhs(np.asarray(state, dtype=float), t)


def build_connectivity(n: int, radius: int) -> np.ndarray:
    """Symmetric ring Laplacian with coupling radius ``radius``.

    Off-diagonal entries are 1 for circular distance ``min(|i-j|, n-|i-j|)``
    up to ``radius``; the diagonal is ``max(-(n-1), -2*radius)`` so every row
    sums to zero.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"node count must be an integer >= 2, got {n}")
    if int(radius) != radius or not 1 <= radius <= n // 2:
        raise ValueError(f"coupling radius must be an integer in [1, {n // 2}] for n={n}, got {radius}")
    n, radius = int(n), int(radius)
    idx = np.arange(n)
    gap = np.abs(idx[:, None] - idx[None, :])
    dist = np.minimum(gap, n - gap)
    G = ((dist <= radius) & (dist > 0)).astype(float)
    np.fill_diagonal(G, max(-(n - 1), -2 * radius))
    return G


def laplacian_eigenvalues(G) -> np.ndarray:
    """Real spectrum of a symmetric connectivity matrix, sorted descending."""
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"connectivity matrix must be square, got shape {G.shape}")
    if not np.allclose(G, G.T, rtol=0.0, atol=1e-12):
        raise ValueError("connectivity matrix must be symmetric")
    lam = np.linalg.eigvalsh(G)[::-1].copy()
    scale = max(1.0, float(np.abs(G).max()))
    lam[np.abs(lam) < 1e-12 * scale] = 0.0
    return lam


@dataclass(frozen=True)
class NetworkSpec:
    """Topology, coupling strength and node model of a ring network."""

    n: int
    radius: int
    alpha: float
    node: NodeParams = field(default_factory=NodeParams)
    H: tuple = DEFAULT_H

    def __post_init__(self):
        # validates n and radius
        build_connectivity(self.n, self.radius)
        if not math.isfinite(self.alpha):
            raise ValueError(f"alpha must be finite, got {self.alpha}")
        if np.asarray(self.H).shape != (STATE_DIM, STATE_DIM):
            raise ValueError("inner-coupling matrix H must be 2x2")

    @property
    def m(self) -> int:
        return STATE_DIM

    @cached_property
    def G(self) -> np.ndarray:
        return build_connectivity(self.n, self.radius)

    @cached_property
    def Hmat(self) -> np.ndarray:
        return np.asarray(self.H, dtype=float)

    @cached_property
    def neighbours(self) -> tuple[np.ndarray, np.ndarray]:
        """Neighbour index and weight tables used by the compiled integrator."""
        G = self.G
        rows = [np.flatnonzero((G[i] != 0) & (np.arange(self.n) != i)) for i in range(self.n)]
        deg = max(len(r) for r in rows)
        nbr = np.zeros((self.n, deg), dtype=np.int64)
        wts = np.zeros((self.n, deg))
        for i, r in enumerate(rows):
            nbr[i, : len(r)] = r
            wts[i, : len(r)] = G[i, r]
        return nbr, wts

    @property
    def size(self) -> int:
        return self.n * STATE_DIM

    def with_alpha(self, alpha: float) -> "NetworkSpec":
        return NetworkSpec(self.n, self.radius, alpha, self.node, self.H)


@dataclass
class NetworkState:
    t: float
    x: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim != 1:
            raise ValueError("state must be a flat vector")
        if not np.all(np.isfinite(self.x)):
            raise DivergenceError(f"non-finite state at t={self.t}")

    def nodes(self) -> np.ndarray:
        return self.x.reshape(-1, STATE_DIM)


@dataclass(frozen=True)
class RunOptions:
    """Integration, bookkeeping and stopping controls shared by all run types."""

    dt_per_period: int = 200
    ic_range: tuple = (-1.0, 1.0)
    time_limit: float = 2000.0          # forcing periods
    sync_eps: float = 1e-15             # pair synchronization / freeze threshold
    buffer_capacity: int = 200
    std_threshold: float = 1e-3
    decimation: int = 1
    warmup: float = 0.0                 # time units skipped before averaging
    diverge_limit: float = 1e6
    confirm_samples: int = 5
    baseline_rel_tol: float = 1e-5
    baseline_decay_norm: float = 1e-12
    classify_eps: float = 1e-12
    classify_window: int = 10           # periods

    def __post_init__(self):
        if int(self.dt_per_period) != self.dt_per_period or self.dt_per_period < 1:
            raise ValueError("dt_per_period must be a positive integer")
        lo, hi = self.ic_range
        if not lo < hi:
            raise ValueError(f"ic_range must satisfy lo < hi, got {self.ic_range}")
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        if self.buffer_capacity < 2 or self.decimation < 1 or self.confirm_samples < 1:
            raise ValueError("buffer_capacity >= 2, decimation >= 1 and confirm_samples >= 1 required")

    def dt(self, spec: NetworkSpec) -> float:
        return spec.node.period / self.dt_per_period


def coupling_term(x, spec: NetworkSpec) -> np.ndarray:
    """``alpha * (G kron H) x``."""
    return spec.alpha * (np.kron(spec.G, spec.Hmat) @ np.asarray(x, dtype=float))


def network_rhs(s: NetworkState, spec: NetworkSpec) -> np.ndarray:
    x = np.asarray(s.x, dtype=float)
    if x.shape != (spec.size,):
        raise ValueError(f"state has length {x.size}, expected {spec.size} for n={spec.n}")
    X = x.reshape(spec.n, STATE_DIM)
    intrinsic = np.concatenate([spec.node.rhs(X[j], s.t) for j in range(spec.n)])
    return intrinsic + coupling_term(x, spec)


def rk4_step(s: NetworkState, dt: float, spec: NetworkSpec) -> NetworkState:
    """One classical fourth-order Runge-Kutta step of :func:`network_rhs`."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    t, x = s.t, s.x
    k1 = network_rhs(s, spec)
    k2 = network_rhs(NetworkState(t + 0.5 * dt, x + 0.5 * dt * k1), spec)
    k3 = network_rhs(NetworkState(t + 0.5 * dt, x + 0.5 * dt * k2), spec)
    k4 = network_rhs(NetworkState(t + dt, x + dt * k3), spec)
    return NetworkState(t + dt, x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


def initial_state(spec: NetworkSpec, seed: int, ic_range=(-1.0, 1.0)) -> np.ndarray:
    """Uniform random positions and velocities in ``ic_range`` for every node."""
    lo, hi = ic_range
    rng = np.random.default_rng(seed)
    return rng.uniform(lo, hi, size=spec.size)


def integrate_node(node, state, t0_step: int, nsteps: int, dt: float) -> np.ndarray:
    """RK4 trajectory end point of one isolated node (compiled)."""
    out = np.array(state, dtype=float)
    _kernels.node_trajectory(node.kernel, node.as_array(), out, dt, nsteps, t0_step)
    return out


def near_manifold_state(spec: NetworkSpec, seed: int, spread: float = 1e-6,
                        transient_periods: int = 100, dt_per_period: int = 200,
                        ic_range=(-1.0, 1.0)) -> np.ndarray:
    """All nodes on a common attractor point plus independent offsets of size ``spread``.

    The common point comes from an isolated node run for ``transient_periods``
    full periods, so the returned state is valid at t = 0 (the forcing phase
    is unchanged).
    """
    rng = np.random.default_rng(seed)
    lo, hi = ic_range
    base = rng.uniform(lo, hi, size=STATE_DIM)
    dt = spec.node.period / dt_per_period
    base = integrate_node(spec.node, base, 0, transient_periods * dt_per_period, dt)
    return np.tile(base, spec.n) + rng.uniform(-spread, spread, size=spec.size)
