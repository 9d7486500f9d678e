"""Pure-numpy simulation backend.

Vectorized twin of _simnumba.py.  Every sampler consumes the per-path
streams in exactly the same order as the jitted scalar code: rejection
loops keep a pending mask and only advance the states of paths that draw,
so a path's variates do not depend on which backend ran it (up to ulp-level
libm differences in the transcendental steps).
"""

from __future__ import annotations

import math

import numpy as np

from .rng import GAMMA, _MASK, U53, finalize, stream_state

_TWO_PI = 6.283185307179586


def _next_u(states):
    states = (states + GAMMA) & _MASK
    u = ((finalize(states) >> np.uint64(11)).astype(np.float64) + 0.5) * U53
    return u, states


def _normal(states):
    u1, states = _next_u(states)
    u2, states = _next_u(states)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2), states


def _gamma_inc(shape, states):
    n = states.shape[0]
    shape = np.broadcast_to(np.asarray(shape, dtype=np.float64), (n,))
    out = np.zeros(n)
    active = shape > 0.0
    boost = np.ones(n)
    small = active & (shape < 1.0)
    if small.any():
        u, st = _next_u(states[small])
        states[small] = st
        # log(u)/shape can hit -inf for tiny shapes; exp maps it to the
        # correct boost of 0, so the overflow is benign
        with np.errstate(over="ignore"):
            boost[small] = np.exp(np.log(u) / shape[small])
    s = np.where(shape < 1.0, shape + 1.0, shape)
    dpar = s - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * dpar)
    pending = active.copy()
    while pending.any():
        idx = np.nonzero(pending)[0]
        x, st = _normal(states[idx])
        states[idx] = st
        v = 1.0 + c[idx] * x
        okm = v > 0.0
        okidx = idx[okm]
        if okidx.size:
            v3 = v[okm] ** 3
            u, st = _next_u(states[okidx])
            states[okidx] = st
            xx = x[okm] ** 2
            acc = u < 1.0 - 0.0331 * xx * xx
            acc |= np.log(u) < 0.5 * xx + dpar[okidx] * (1.0 - v3 + np.log(v3))
            hit = okidx[acc]
            out[hit] = dpar[hit] * v3[acc] * boost[hit]
            pending[hit] = False
    return out, states


def _stable_std(a, states):
    n = states.shape[0]
    if a >= 1.0:
        return np.ones(n), states
    if a == 0.5:
        z, states = _normal(states)
        return 0.5 / (z * z), states
    u, states = _next_u(states)
    e, states = _next_u(states)
    up = math.pi * u
    ev = -np.log(e)
    b = np.sin(a * up) ** a * np.sin((1.0 - a) * up) ** (1.0 - a) / np.sin(up)
    return b ** (1.0 / a) * ev ** (-(1.0 - a) / a), states


def _geom_tail(a, g, states):
    # stable increment over an elapsed Gamma time; zero times draw nothing
    if a >= 1.0:
        return g, states
    out = g.copy()
    pos = g > 0.0
    if pos.any():
        s, st = _stable_std(a, states[pos])
        states[pos] = st
        out[pos] = g[pos] ** (1.0 / a) * s
    return out, states


def _sub_inc(fam, a, aux1, aux2, n_iter, dt, states):
    n = states.shape[0]
    if fam == 0:
        if a >= 1.0:
            return np.full(n, dt, dtype=np.float64), states
        s, states = _stable_std(a, states)
        return dt ** (1.0 / a) * s, states
    if fam == 1:
        return _gamma_inc(aux1 * dt, states)
    if fam == 2:
        g, states = _gamma_inc(dt, states)
        return _geom_tail(a, g, states)
    if fam == 3:
        h = np.full(n, dt, dtype=np.float64)
        for _ in range(n_iter):
            g, states = _gamma_inc(h, states)
            h, states = _geom_tail(a, g, states)
        return h, states
    g1, states = _gamma_inc(dt, states)
    g2, states = _gamma_inc(dt, states)
    return g1 / aux1 + g2 / aux2, states


def increments(fam, a, aux1, aux2, n_iter, dt, seed, stream_id, path_lo, n):
    states = stream_state(seed, stream_id, np.arange(path_lo, path_lo + n, dtype=np.uint64))
    return _sub_inc(fam, a, aux1, aux2, n_iter, dt, states)


def subordinator_path(fam, a, aux1, aux2, n_iter, dt, n_steps, seed, stream_id, path_index):
    out = np.empty(n_steps)
    states = stream_state(seed, stream_id, np.asarray([path_index], dtype=np.uint64))
    for k in range(n_steps):
        ds, states = _sub_inc(fam, a, aux1, aux2, n_iter, dt, states)
        out[k] = ds[0]
    return out


def sbm_path(fam, a, aux1, aux2, n_iter, d, dt, n_steps, seed, stream_id, path_index):
    ds = np.empty(n_steps)
    pos = np.zeros((n_steps + 1, d))
    states = stream_state(seed, stream_id, np.asarray([path_index], dtype=np.uint64))
    for k in range(n_steps):
        s, states = _sub_inc(fam, a, aux1, aux2, n_iter, dt, states)
        ds[k] = s[0]
        sd = math.sqrt(2.0 * s[0])
        step = np.empty(d)
        for j in range(d):
            z, states = _normal(states)
            step[j] = sd * z[0]
        pos[k + 1] = pos[k] + step
    return ds, pos


def exit_batch(fam, a, aux1, aux2, n_iter, d, x0, radius, dt, max_steps,
               a_lo, a_hi, edges, seed, stream_id, path_lo, n):
    exit_time = np.zeros(n)
    exit_pos = np.zeros((n, 3))
    last_pos = np.zeros((n, 3))
    jumped = np.zeros(n, dtype=np.bool_)
    hit = np.zeros(n, dtype=np.bool_)
    failed = np.zeros(n, dtype=np.bool_)
    steps_out = np.zeros(n, dtype=np.int64)
    nsh = edges.shape[0] - 1
    occ = np.zeros((n, max(nsh, 1)))
    r2 = radius * radius
    track = a_lo <= a_hi
    states = stream_state(seed, stream_id, np.arange(path_lo, path_lo + n, dtype=np.uint64))
    pos = np.tile(np.asarray(x0, dtype=np.float64)[:3], (n, 1))
    alive = np.arange(n)
    steps = 0
    while alive.size:
        p = pos[alive]
        if track or nsh > 0:
            rho = np.sqrt((p * p).sum(axis=1))
            if track:
                hm = (rho >= a_lo) & (rho <= a_hi)
                hit[alive[hm]] = True
            if nsh > 0:
                inb = (rho >= edges[0]) & (rho < edges[nsh])
                if inb.any():
                    ks = np.searchsorted(edges, rho[inb], side="right") - 1
                    occ[alive[inb], ks] += dt
        st = states[alive]
        ds, st = _sub_inc(fam, a, aux1, aux2, n_iter, dt, st)
        sd = np.sqrt(2.0 * ds)
        delta = np.zeros((alive.size, 3))
        for j in range(d):
            z, st = _normal(st)
            delta[:, j] = sd * z
        states[alive] = st
        newp = p + delta
        steps += 1
        pos[alive] = newp
        out = (newp * newp).sum(axis=1) >= r2
        if out.any():
            ids = alive[out]
            exit_time[ids] = steps * dt
            exit_pos[ids] = newp[out]
            last_pos[ids] = p[out]
            jumped[ids] = (delta[out] ** 2).sum(axis=1) > 18.0 * ds[out] * d
            steps_out[ids] = steps
        if steps >= max_steps:
            ids = alive[~out]
            failed[ids] = True
            exit_time[ids] = steps * dt
            exit_pos[ids] = newp[~out]
            last_pos[ids] = p[~out]
            steps_out[ids] = steps
            break
        alive = alive[~out]
    return exit_time, exit_pos, last_pos, jumped, hit, failed, steps_out, occ
