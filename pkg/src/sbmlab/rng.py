"""Counter-based random streams built on splitmix64.

Every sampled path owns an independent stream keyed by (seed, stream_id,
path_index).  A draw bumps a 64-bit counter by a fixed odd constant and
hashes it, so a path's draws depend only on its key and draw index: results
are bit-identical regardless of how paths are chunked or how many worker
threads run.  The jitted and vectorized backends share this exact arithmetic.
"""

from __future__ import annotations

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
STREAM_SALT = np.uint64(0x632BE59BD9B4E019)
# 2^-53; uniforms are ((x >> 11) + 0.5) * 2^-53, strictly inside (0, 1).
U53 = 1.0 / 9007199254740992.0

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def finalize(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizing hash (vectorized over uint64 arrays)."""
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * MIX1 & _MASK
        z = (z ^ (z >> np.uint64(27))) * MIX2 & _MASK
        return z ^ (z >> np.uint64(31))


def stream_state(seed: int, stream_id: int, path_index) -> np.ndarray:
    """Initial counter for each (seed, stream_id, path_index) key.

    Two hashing rounds keep distinct keys as decorrelated as random 64-bit
    words; path_index may be a scalar or an integer array.
    """
    idx = np.asarray(path_index, dtype=np.uint64)
    s = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    t = np.uint64((stream_id & 0xFFFFFFFFFFFFFFFF))
    with np.errstate(over="ignore"):
        base = finalize((s + GAMMA) & _MASK) ^ finalize((t * GAMMA + STREAM_SALT) & _MASK)
        return finalize((base + idx * GAMMA) & _MASK)


def next_uniform(state: np.ndarray):
    """Advance states by one draw; return (uniforms in (0,1), new states)."""
    with np.errstate(over="ignore"):
        new = (state + GAMMA) & _MASK
    u = ((finalize(new) >> np.uint64(11)).astype(np.float64) + 0.5) * U53
    return u, new


def uniforms(seed: int, stream_id: int, path_index, n: int) -> np.ndarray:
    """First n uniforms of one path's stream (diagnostic helper)."""
    state = stream_state(seed, stream_id, path_index)
    out = np.empty(n)
    for i in range(n):
        out[i], state = next_uniform(state)
    return out


def py_uniforms(seed: int, stream_id: int, path_index: int, n: int) -> list:
    """Pure-python scalar reference that pins the stream in tests."""
    mask = 0xFFFFFFFFFFFFFFFF

    def fin(z):
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        return z ^ (z >> 31)

    g = 0x9E3779B97F4A7C15
    base = fin((seed + g) & mask) ^ fin((stream_id * g + 0x632BE59BD9B4E019) & mask)
    state = fin((base + path_index * g) & mask)
    out = []
    for _ in range(n):
        state = (state + g) & mask
        out.append(((fin(state) >> 11) + 0.5) * U53)
    return out
