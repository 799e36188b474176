"""Compiled inner loops.

Everything here works on flat float64 arrays so that the Python layer can keep
its dataclasses. Node dynamics are passed in as jitted functions with the
signatures

    rhs(x, v, t, params) -> (dx, dv)
    jac(x, v, t, params) -> (j00, j01, j10, j11)

which lets the integrators stay generic over the (two-dimensional) node model.
"""
import math

import numpy as np
from numba import njit

DIVERGED = 1
OK = 0


@njit(cache=True, error_model="numpy")
def duffing_rhs(x, v, t, p):
    # p = (h, k, F, omega)
    return v, -2.0 * p[0] * v - p[1] * x * x * x + p[2] * math.cos(p[3] * t)


@njit(cache=True, error_model="numpy")
def duffing_jac(x, v, t, p):
    return 0.0, 1.0, -3.0 * p[1] * x * x, -2.0 * p[0]


@njit(cache=True, error_model="numpy")
def network_derivative(t, x, out, node_fn, node_p, alpha, nbr, wts, hmat):
    """Intrinsic dynamics plus alpha * (G kron H) x, using neighbour differences.

    Writing the Laplacian coupling as sum_j w_ij H (x_j - x_i) keeps it exactly
    zero whenever the coupled nodes hold identical states.
    """
    n = nbr.shape[0]
    for i in range(n):
        xi = x[2 * i]
        vi = x[2 * i + 1]
        cx = 0.0
        cv = 0.0
        for q in range(nbr.shape[1]):
            j = nbr[i, q]
            dx = x[2 * j] - xi
            dv = x[2 * j + 1] - vi
            cx += wts[i, q] * (hmat[0, 0] * dx + hmat[0, 1] * dv)
            cv += wts[i, q] * (hmat[1, 0] * dx + hmat[1, 1] * dv)
        fx, fv = node_fn(xi, vi, t, node_p)
        out[2 * i] = fx + alpha * cx
        out[2 * i + 1] = fv + alpha * cv


@njit(cache=True, error_model="numpy")
def buffer_std(row, count):
    mean = 0.0
    for q in range(count):
        mean += row[q]
    mean /= count
    acc = 0.0
    for q in range(count):
        d = row[q] - mean
        acc += d * d
    return math.sqrt(acc / (count - 1))


@njit(cache=True, error_model="numpy")
def accumulate_pair(p, rate, dt, t_end, log_growth, elapsed, dle,
                    buf, fill, stabilized, stabilized_at, std_threshold, take_sample):
    """Fold one step's growth rate of pair ``p`` into its running average."""
    log_growth[p] += rate * dt
    elapsed[p] += dt
    dle[p] = log_growth[p] / elapsed[p]
    if take_sample and not stabilized[p]:
        buf[p, fill[p]] = dle[p]
        fill[p] += 1
        if fill[p] == buf.shape[1]:
            if buffer_std(buf[p], fill[p]) < std_threshold:
                stabilized[p] = True
                stabilized_at[p] = t_end
            fill[p] = 0


@njit(cache=True, error_model="numpy")
def accumulate_rates(rates, dt, t_end, active_mask, log_growth, elapsed, dle,
                     buf, fill, stabilized, stabilized_at, std_threshold, take_sample):
    for p in range(rates.shape[0]):
        if active_mask[p]:
            accumulate_pair(p, rates[p], dt, t_end, log_growth, elapsed, dle,
                            buf, fill, stabilized, stabilized_at, std_threshold,
                            take_sample)


@njit(cache=True, error_model="numpy")
def advance(x, step0, nsteps, dt, node_fn, node_p, alpha, nbr, wts, hmat,
            pi, pj, log_growth, elapsed, dle, frozen, freeze_time,
            buf, fill, stabilized, stabilized_at,
            std_threshold, decimation, warmup, sync_eps, diverge_limit, zmax):
    """Advance the network ``nsteps`` RK4 steps while tracking all pair exponents.

    Returns ``(status, steps_taken)``. ``zmax`` receives the largest pair
    distance seen at step ends during this call.
    """
    m = x.shape[0]
    npair = pi.shape[0]
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    inc = np.empty(m)
    for s in range(nsteps):
        step = step0 + s
        t = step * dt
        network_derivative(t, x, k1, node_fn, node_p, alpha, nbr, wts, hmat)
        for q in range(m):
            tmp[q] = x[q] + 0.5 * dt * k1[q]
        network_derivative(t + 0.5 * dt, tmp, k2, node_fn, node_p, alpha, nbr, wts, hmat)
        for q in range(m):
            tmp[q] = x[q] + 0.5 * dt * k2[q]
        network_derivative(t + 0.5 * dt, tmp, k3, node_fn, node_p, alpha, nbr, wts, hmat)
        for q in range(m):
            tmp[q] = x[q] + dt * k3[q]
        network_derivative(t + dt, tmp, k4, node_fn, node_p, alpha, nbr, wts, hmat)
        for q in range(m):
            inc[q] = (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]) / 6.0

        t_end = (step + 1) * dt
        take_sample = (step % decimation) == 0
        averaging = t_end > warmup
        for p in range(npair):
            if frozen[p]:
                continue
            i = pi[p]
            j = pj[p]
            zx = x[2 * i] - x[2 * j]
            zv = x[2 * i + 1] - x[2 * j + 1]
            zz = zx * zx + zv * zv
            if zz == 0.0:
                frozen[p] = True
                freeze_time[p] = t
                continue
            dzx = inc[2 * i] - inc[2 * j]
            dzv = inc[2 * i + 1] - inc[2 * j + 1]
            u = (2.0 * dt * (zx * dzx + zv * dzv) + dt * dt * (dzx * dzx + dzv * dzv)) / zz
            if u <= -1.0:
                frozen[p] = True
                freeze_time[p] = t_end
                continue
            if averaging:
                rate = math.log1p(u) / (2.0 * dt)
                accumulate_pair(p, rate, dt, t_end, log_growth, elapsed, dle,
                                buf, fill, stabilized, stabilized_at, std_threshold,
                                take_sample)

        bad = False
        for q in range(m):
            x[q] += dt * inc[q]
            if not (abs(x[q]) <= diverge_limit):
                bad = True
        if bad:
            return DIVERGED, s + 1

        for p in range(npair):
            i = pi[p]
            j = pj[p]
            nz = math.hypot(x[2 * i] - x[2 * j], x[2 * i + 1] - x[2 * j + 1])
            if nz > zmax[p]:
                zmax[p] = nz
            if not frozen[p] and nz < sync_eps:
                frozen[p] = True
                freeze_time[p] = t_end
    return OK, nsteps


@njit(cache=True, error_model="numpy")
def tangent_growth(node_fn, jac_fn, node_p, beta, hmat, state, z, dt, spp, nperiods, step0):
    """Integrate one node with the variational equation z' = (Df + beta*H) z.

    ``z`` is renormalised at the end of every period; the log of each period's
    growth factor is returned. ``state`` and ``z`` are updated in place.
    """
    logs = np.empty(nperiods)
    x = state[0]
    v = state[1]
    zx = z[0]
    zv = z[1]
    h00 = hmat[0, 0] * beta
    h01 = hmat[0, 1] * beta
    h10 = hmat[1, 0] * beta
    h11 = hmat[1, 1] * beta
    for per in range(nperiods):
        for s in range(spp):
            t = (step0 + per * spp + s) * dt
            a1x, a1v = node_fn(x, v, t, node_p)
            j00, j01, j10, j11 = jac_fn(x, v, t, node_p)
            b1x = (j00 + h00) * zx + (j01 + h01) * zv
            b1v = (j10 + h10) * zx + (j11 + h11) * zv

            X = x + 0.5 * dt * a1x
            V = v + 0.5 * dt * a1v
            ZX = zx + 0.5 * dt * b1x
            ZV = zv + 0.5 * dt * b1v
            a2x, a2v = node_fn(X, V, t + 0.5 * dt, node_p)
            j00, j01, j10, j11 = jac_fn(X, V, t + 0.5 * dt, node_p)
            b2x = (j00 + h00) * ZX + (j01 + h01) * ZV
            b2v = (j10 + h10) * ZX + (j11 + h11) * ZV

            X = x + 0.5 * dt * a2x
            V = v + 0.5 * dt * a2v
            ZX = zx + 0.5 * dt * b2x
            ZV = zv + 0.5 * dt * b2v
            a3x, a3v = node_fn(X, V, t + 0.5 * dt, node_p)
            j00, j01, j10, j11 = jac_fn(X, V, t + 0.5 * dt, node_p)
            b3x = (j00 + h00) * ZX + (j01 + h01) * ZV
            b3v = (j10 + h10) * ZX + (j11 + h11) * ZV

            X = x + dt * a3x
            V = v + dt * a3v
            ZX = zx + dt * b3x
            ZV = zv + dt * b3v
            a4x, a4v = node_fn(X, V, t + dt, node_p)
            j00, j01, j10, j11 = jac_fn(X, V, t + dt, node_p)
            b4x = (j00 + h00) * ZX + (j01 + h01) * ZV
            b4v = (j10 + h10) * ZX + (j11 + h11) * ZV

            x += dt / 6.0 * (a1x + 2.0 * a2x + 2.0 * a3x + a4x)
            v += dt / 6.0 * (a1v + 2.0 * a2v + 2.0 * a3v + a4v)
            zx += dt / 6.0 * (b1x + 2.0 * b2x + 2.0 * b3x + b4x)
            zv += dt / 6.0 * (b1v + 2.0 * b2v + 2.0 * b3v + b4v)
        nz = math.hypot(zx, zv)
        if not (nz > 0.0 and nz < 1e300) or not (abs(x) < 1e300 and abs(v) < 1e300):
            logs[per] = np.nan
            state[0] = x
            state[1] = v
            return logs[: per + 1]
        logs[per] = math.log(nz)
        zx /= nz
        zv /= nz
    state[0] = x
    state[1] = v
    z[0] = zx
    z[1] = zv
    return logs


@njit(cache=True, error_model="numpy")
def node_trajectory(node_fn, node_p, state, dt, nsteps, step0):
    """Plain RK4 for a single node; ``state`` is advanced in place."""
    x = state[0]
    v = state[1]
    for s in range(nsteps):
        t = (step0 + s) * dt
        a1x, a1v = node_fn(x, v, t, node_p)
        a2x, a2v = node_fn(x + 0.5 * dt * a1x, v + 0.5 * dt * a1v, t + 0.5 * dt, node_p)
        a3x, a3v = node_fn(x + 0.5 * dt * a2x, v + 0.5 * dt * a2v, t + 0.5 * dt, node_p)
        a4x, a4v = node_fn(x + dt * a3x, v + dt * a3v, t + dt, node_p)
        x += dt / 6.0 * (a1x + 2.0 * a2x + 2.0 * a3x + a4x)
        v += dt / 6.0 * (a1v + 2.0 * a2v + 2.0 * a3v + a4v)
    state[0] = x
    state[1] = v
