"""Jitted simulation kernels.

Scalar splitmix64 arithmetic here must stay in lockstep with rng.py and with
the vectorized twin in _simnumpy.py: any divergence breaks cross-backend
reproducibility.  Draw order per path step is fixed as (subordinator
increment, then one normal per space dimension); rejection samplers consume
a documented number of uniforms per attempt so both backends walk the same
stream.
"""

from __future__ import annotations

import math
import os
import warnings

import numpy as np

# single-process workqueue avoids depending on optional TBB/OMP layers;
# the version probe still warns on old TBB installs, which is noise here
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")
warnings.filterwarnings("ignore", message=".*TBB.*")

from numba import njit, prange

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_SALT = np.uint64(0x632BE59BD9B4E019)
_U53 = 1.0 / 9007199254740992.0
_TWO_PI = 6.283185307179586


@njit(cache=True, inline="always")
def _finalize(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _stream_state(seed, stream_id, path_index):
    base = _finalize(seed + _GAMMA) ^ _finalize(stream_id * _GAMMA + _SALT)
    return _finalize(base + path_index * _GAMMA)


@njit(cache=True, inline="always")
def _next_u(state):
    state = state + _GAMMA
    u = (np.float64(_finalize(state) >> np.uint64(11)) + 0.5) * _U53
    return u, state


@njit(cache=True, inline="always")
def _normal(state):
    u1, state = _next_u(state)
    u2, state = _next_u(state)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2), state


@njit(cache=True)
def _gamma_inc(shape, state):
    # Marsaglia-Tsang; shapes below one are boosted through
    # G(a) = G(a+1) * U**(1/a), with the boost uniform drawn first.
    if shape <= 0.0:
        return 0.0, state
    boost = 1.0
    s = shape
    if s < 1.0:
        u, state = _next_u(state)
        boost = math.exp(math.log(u) / s)
        s += 1.0
    dpar = s - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * dpar)
    while True:
        x, state = _normal(state)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u, state = _next_u(state)
        xx = x * x
        if u < 1.0 - 0.0331 * xx * xx:
            return dpar * v * boost, state
        if math.log(u) < 0.5 * xx + dpar * (1.0 - v + math.log(v)):
            return dpar * v * boost, state


@njit(cache=True)
def _stable_std(a, state):
    # Standard one-sided stable, E exp(-lam S) = exp(-lam**a), by Kanter's
    # representation.  a == 1/2 has the closed form 1/(2 Z**2); a == 1 is
    # the degenerate unit mass.
    if a >= 1.0:
        return 1.0, state
    if a == 0.5:
        z, state = _normal(state)
        return 0.5 / (z * z), state
    u, state = _next_u(state)
    e, state = _next_u(state)
    up = math.pi * u
    ev = -math.log(e)
    b = math.sin(a * up) ** a * math.sin((1.0 - a) * up) ** (1.0 - a) / math.sin(up)
    return b ** (1.0 / a) * ev ** (-(1.0 - a) / a), state


@njit(cache=True)
def _sub_inc(fam, a, aux1, aux2, n_iter, dt, state):
    if fam == 0:
        if a >= 1.0:
            return dt, state
        s, state = _stable_std(a, state)
        return dt ** (1.0 / a) * s, state
    if fam == 1:
        return _gamma_inc(aux1 * dt, state)
    if fam == 2:
        g, state = _gamma_inc(dt, state)
        if a >= 1.0 or g <= 0.0:
            return g, state
        s, state = _stable_std(a, state)
        return g ** (1.0 / a) * s, state
    if fam == 3:
        h = dt
        for _ in range(n_iter):
            g, state = _gamma_inc(h, state)
            if a >= 1.0 or g <= 0.0:
                h = g
            else:
                s, state = _stable_std(a, state)
                h = g ** (1.0 / a) * s
        return h, state
    g1, state = _gamma_inc(dt, state)
    g2, state = _gamma_inc(dt, state)
    return g1 / aux1 + g2 / aux2, state


@njit(cache=True)
def increments(fam, a, aux1, aux2, n_iter, dt, seed, stream_id, path_lo, n):
    out = np.empty(n)
    states = np.empty(n, dtype=np.uint64)
    for i in prange(n):
        state = _stream_state(seed, stream_id, np.uint64(path_lo + i))
        out[i], states[i] = _sub_inc(fam, a, aux1, aux2, n_iter, dt, state)
    return out, states


@njit(cache=True)
def subordinator_path(fam, a, aux1, aux2, n_iter, dt, n_steps, seed, stream_id, path_index):
    out = np.empty(n_steps)
    state = _stream_state(seed, stream_id, np.uint64(path_index))
    for k in range(n_steps):
        out[k], state = _sub_inc(fam, a, aux1, aux2, n_iter, dt, state)
    return out


@njit(cache=True)
def sbm_path(fam, a, aux1, aux2, n_iter, d, dt, n_steps, seed, stream_id, path_index):
    ds = np.empty(n_steps)
    pos = np.zeros((n_steps + 1, d))
    state = _stream_state(seed, stream_id, np.uint64(path_index))
    for k in range(n_steps):
        s, state = _sub_inc(fam, a, aux1, aux2, n_iter, dt, state)
        ds[k] = s
        sd = math.sqrt(2.0 * s)
        for j in range(d):
            z, state = _normal(state)
            pos[k + 1, j] = pos[k, j] + sd * z
    return ds, pos


@njit(cache=True, parallel=True)
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
    track_hit = a_lo <= a_hi
    for i in prange(n):
        state = _stream_state(seed, stream_id, np.uint64(path_lo + i))
        px = x0[0]
        py = x0[1]
        pz = x0[2]
        rho2 = px * px + py * py + pz * pz
        steps = 0
        while True:
            # bookkeeping at grid times strictly before the exit step
            if track_hit or nsh > 0:
                rho = math.sqrt(rho2)
                if track_hit and not hit[i] and a_lo <= rho <= a_hi:
                    hit[i] = True
                if nsh > 0 and edges[0] <= rho < edges[nsh]:
                    occ[i, np.searchsorted(edges, rho, side="right") - 1] += dt
            ds, state = _sub_inc(fam, a, aux1, aux2, n_iter, dt, state)
            sd = math.sqrt(2.0 * ds)
            dx = 0.0
            dy = 0.0
            dz = 0.0
            z0, state = _normal(state)
            dx = sd * z0
            if d >= 2:
                z1, state = _normal(state)
                dy = sd * z1
            if d >= 3:
                z2, state = _normal(state)
                dz = sd * z2
            lx = px
            ly = py
            lz = pz
            px += dx
            py += dy
            pz += dz
            steps += 1
            rho2 = px * px + py * py + pz * pz
            if rho2 >= r2:
                exit_time[i] = steps * dt
                exit_pos[i, 0] = px
                exit_pos[i, 1] = py
                exit_pos[i, 2] = pz
                last_pos[i, 0] = lx
                last_pos[i, 1] = ly
                last_pos[i, 2] = lz
                jumped[i] = dx * dx + dy * dy + dz * dz > 18.0 * ds * d
                steps_out[i] = steps
                break
            if steps >= max_steps:
                failed[i] = True
                exit_time[i] = steps * dt
                exit_pos[i, 0] = px
                exit_pos[i, 1] = py
                exit_pos[i, 2] = pz
                last_pos[i, 0] = lx
                last_pos[i, 1] = ly
                last_pos[i, 2] = lz
                steps_out[i] = steps
                break
    return exit_time, exit_pos, last_pos, jumped, hit, failed, steps_out, occ
