"""Monte Carlo sampling of subordinate Brownian motion.

The subordinator runs on a fixed time grid of step dt; Brownian increments
conditioned on a subordinator increment ds are centered Gaussian with
variance 2*ds per coordinate, matching the (4*pi*t)^(-d/2) exp(-|x|^2/4t)
transition density of the underlying motion.  Exits, hitting events and
occupation times are read off the grid path, so every estimate carries an
O(dt) discretization bias on top of its Monte Carlo error; heavy-jump
processes exit by jumps, which keeps the grid bias second order.

Paths are enumerated: path (seed, stream_id, path_index) is bit-identical
no matter how work is chunked.  Hitting sets and occupation boxes are
radial annuli about the ball center, which is what the boundary-decay
diagnostics need and keeps the hot loops branch-light.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from ._backend import backend_module
from ._families import FamilyCodes, UnsupportedFamilyError, map_exponent
from .bernstein import LaplaceExponent

__all__ = [
    "PathSpec",
    "Ball",
    "ExitSample",
    "ExitBatch",
    "Estimate",
    "ExitHistogram",
    "GreenEstimate",
    "SimulationCapError",
    "UnsupportedFamilyError",
    "ResolutionWarning",
    "OccupationBiasWarning",
    "sample_stable_increment",
    "sample_gamma_increment",
    "sample_increments",
    "sample_subordinator_path",
    "sample_sbm_path",
    "sample_terminal_value",
    "sample_exit",
    "sample_exit_batch",
    "estimate_mean_exit_time",
    "estimate_exit_distribution",
    "estimate_hitting_probability",
    "estimate_harmonic",
    "estimate_green_occupation",
    "binomial_stderr",
    "ball_volume",
    "step_displacement_scale",
]

# Horizon exhaustion extends the walk rather than truncating it; the hard
# cap is this many horizons, after which the path is reported as failed.
EXTENSION_FACTOR = 256

# Reserved stream offset for the tiny pilot batches used by resolution and
# bias warnings, so probes never collide with estimation streams.
_PROBE_STREAM_SALT = 0x50524F4245


class SimulationCapError(RuntimeError):
    """A path exhausted the extension cap before leaving the ball."""


class ResolutionWarning(UserWarning):
    """Hitting set thinner than the path can resolve at this dt."""


class OccupationBiasWarning(UserWarning):
    """Occupation box thinner than the mean step displacement allows."""


@dataclass(frozen=True)
class PathSpec:
    """Sampling plan: model, dimension, grid step, horizon and stream key."""

    exponent: LaplaceExponent
    d: int
    time_step: float
    horizon: float | None = None
    seed: int = 20260814
    stream_id: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if not self.time_step > 0.0:
            raise ValueError("time_step must be positive")
        if self.horizon is not None and self.horizon < self.time_step:
            raise ValueError("horizon must be at least one time step")

    def codes(self) -> FamilyCodes:
        return map_exponent(self.exponent)


def default_time_step(exponent: LaplaceExponent, radius: float, factor: float = 1e-4) -> float:
    """Grid step tuned to the exit-time scale 1/phi(r^-2) of a ball."""
    return factor / float(exponent.phi(radius ** -2.0))


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0.0:
            raise ValueError("radius must be positive")

    @staticmethod
    def coerce(ball, d: int) -> "Ball":
        if isinstance(ball, Ball):
            b = ball
        else:
            center, radius = ball
            if np.isscalar(center):
                center = (float(center),) * d
            b = Ball(tuple(float(c) for c in center), float(radius))
        if len(b.center) != d:
            raise ValueError(f"ball center has {len(b.center)} coordinates, expected {d}")
        return b


@dataclass(frozen=True)
class ExitSample:
    """One simulated first exit from a ball."""

    exit_time: float
    exit_position: np.ndarray
    last_interior: np.ndarray
    jumped: bool
    steps: int
    path_index: int


@dataclass(frozen=True)
class ExitBatch:
    """Vectorized exit records for paths path_lo .. path_lo+n-1."""

    d: int
    dt: float
    path_lo: int
    exit_time: np.ndarray
    exit_position: np.ndarray
    last_interior: np.ndarray
    jumped: np.ndarray
    hit: np.ndarray
    failed: np.ndarray
    steps: np.ndarray
    occupation: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.exit_time.shape[0]

    def write_csv(self, path) -> None:
        cols = ",".join(f"exit_x{j}" for j in range(self.d))
        with open(path, "w") as fh:
            fh.write(f"path_id,exit_time,{cols},jumped\n")
            for i in range(self.n):
                xs = ",".join("%.17g" % v for v in self.exit_position[i])
                fh.write(f"{self.path_lo + i},{'%.17g' % self.exit_time[i]},{xs},{int(self.jumped[i])}\n")


@dataclass(frozen=True)
class Estimate:
    """Scalar Monte Carlo estimate with its standard error."""

    value: float
    stderr: float
    n: int
    dt: float

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("estimate,stderr,N,dt\n")
            fh.write("%.17g,%.17g,%d,%.17g\n" % (self.value, self.stderr, self.n, self.dt))


@dataclass(frozen=True)
class ExitHistogram:
    """Binned exit-radius distribution (probabilities, not densities)."""

    edges: np.ndarray
    probs: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray
    n: int
    dt: float

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("bin_lo,bin_hi,prob,stderr,count\n")
            for k in range(self.probs.shape[0]):
                fh.write("%.17g,%.17g,%.17g,%.17g,%d\n" % (
                    self.edges[k], self.edges[k + 1], self.probs[k], self.stderr[k], self.counts[k]))


@dataclass(frozen=True)
class GreenEstimate:
    """Occupation-based Green values per radial shell about the center."""

    edges: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    volumes: np.ndarray
    n: int
    dt: float

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("shell_lo,shell_hi,green,stderr,volume\n")
            for k in range(self.values.shape[0]):
                fh.write("%.17g,%.17g,%.17g,%.17g,%.17g\n" % (
                    self.edges[k], self.edges[k + 1], self.values[k], self.stderr[k], self.volumes[k]))


def ball_volume(d: int, r: float) -> float:
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0) * r ** d


def binomial_stderr(k: int, n: int) -> float:
    """Binomial standard error; exact-interval fallback below 25 successes.

    With few successes the normal approximation collapses (stderr 0 at
    k=0), so the half-width of the central 68.27% Clopper-Pearson interval
    stands in for it.
    """
    if n <= 0:
        raise ValueError("need n > 0")
    if min(k, n - k) >= 25:
        p = k / n
        return math.sqrt(p * (1.0 - p) / n)
    from scipy.stats import beta
    lvl = 0.6826894921370859
    lo = 0.0 if k == 0 else float(beta.ppf((1 - lvl) / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(beta.ppf(1 - (1 - lvl) / 2, k + 1, n - k))
    return (hi - lo) / 2.0


def _mod(backend):
    return backend_module(backend)


def _key(spec: PathSpec):
    return np.uint64(spec.seed & 0xFFFFFFFFFFFFFFFF), np.uint64(spec.stream_id & 0xFFFFFFFFFFFFFFFF)


# ---------------------------------------------------------------------------
# increment and path sampling


def sample_increments(exponent: LaplaceExponent, dt: float, n: int, seed: int,
                      stream_id: int = 0, path_lo: int = 0, backend: str | None = None) -> np.ndarray:
    """One subordinator increment over dt for each of n paths."""
    c = map_exponent(exponent)
    mod = _mod(backend)
    out, _ = mod.increments(c.fam, c.a, c.aux1, c.aux2, c.n_iter, float(dt),
                            np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                            np.uint64(stream_id & 0xFFFFFFFFFFFFFFFF), path_lo, n)
    return out


def sample_stable_increment(alpha_half: float, dt: float, n: int, seed: int,
                            stream_id: int = 0, path_lo: int = 0, backend: str | None = None) -> np.ndarray:
    """Increments of the stable subordinator with exponent lambda**alpha_half."""
    if not 0.0 < alpha_half < 1.0:
        raise ValueError("alpha_half must lie in (0, 1)")
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    mod = _mod(backend)
    out, _ = mod.increments(0, float(alpha_half), 0.0, 0.0, 1, float(dt),
                            np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                            np.uint64(stream_id & 0xFFFFFFFFFFFFFFFF), path_lo, n)
    return out


def sample_gamma_increment(dt: float, n: int, seed: int, stream_id: int = 0,
                           path_lo: int = 0, backend: str | None = None) -> np.ndarray:
    """Gamma(shape=dt, rate=1) increments, exponent log(1+lambda)."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    mod = _mod(backend)
    out, _ = mod.increments(1, 1.0, 1.0, 0.0, 1, float(dt),
                            np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                            np.uint64(stream_id & 0xFFFFFFFFFFFFFFFF), path_lo, n)
    return out


def sample_subordinator_path(spec: PathSpec, n_steps: int | None = None,
                             path_index: int = 0, backend: str | None = None) -> np.ndarray:
    """Cumulative subordinator values S(0), S(dt), ..., nondecreasing."""
    c = spec.codes()
    if n_steps is None:
        if spec.horizon is None:
            raise ValueError("give n_steps or set a horizon on the spec")
        n_steps = int(math.ceil(spec.horizon / spec.time_step))
    seed, stream = _key(spec)
    ds = _mod(backend).subordinator_path(c.fam, c.a, c.aux1, c.aux2, c.n_iter,
                                         spec.time_step, n_steps, seed, stream, path_index)
    out = np.empty(n_steps + 1)
    out[0] = 0.0
    np.cumsum(ds, out=out[1:])
    return out


def sample_sbm_path(spec: PathSpec, n_steps: int | None = None,
                    path_index: int = 0, backend: str | None = None):
    """Positions X(0..n_steps*dt); returns (subordinator values, positions)."""
    c = spec.codes()
    if n_steps is None:
        if spec.horizon is None:
            raise ValueError("give n_steps or set a horizon on the spec")
        n_steps = int(math.ceil(spec.horizon / spec.time_step))
    seed, stream = _key(spec)
    ds, pos = _mod(backend).sbm_path(c.fam, c.a, c.aux1, c.aux2, c.n_iter, spec.d,
                                     spec.time_step, n_steps, seed, stream, path_index)
    s = np.empty(n_steps + 1)
    s[0] = 0.0
    np.cumsum(ds, out=s[1:])
    return s, pos


def sample_terminal_value(spec: PathSpec, t: float, n: int, path_lo: int = 0,
                          backend: str | None = None) -> np.ndarray:
    """X_t sampled in one shot: S_t exactly, then d Gaussian coordinates.

    The Gaussian stage always runs through the vectorized generator so both
    backends agree on it; per-path streams make that well defined.
    """
    c = spec.codes()
    seed, stream = _key(spec)
    ds, states = _mod(backend).increments(c.fam, c.a, c.aux1, c.aux2, c.n_iter,
                                          float(t), seed, stream, path_lo, n)
    from ._simnumpy import _normal
    sd = np.sqrt(2.0 * ds)
    out = np.empty((n, spec.d))
    for j in range(spec.d):
        z, states = _normal(states)
        out[:, j] = sd * z
    return out


# ---------------------------------------------------------------------------
# exit machinery


def _resolve_steps(spec: PathSpec, radius: float) -> int:
    horizon = spec.horizon
    if horizon is None:
        horizon = 64.0 / float(spec.exponent.phi(radius ** -2.0))
        horizon = max(horizon, spec.time_step)
    return max(1, int(math.ceil(horizon / spec.time_step))) * EXTENSION_FACTOR


def _run_exit(spec: PathSpec, ball: Ball, start, n: int, path_lo: int = 0,
              annulus=None, shells=None, backend: str | None = None,
              keep_occupation: bool = False) -> ExitBatch:
    if spec.d > 3:
        raise ValueError("exit sampling supports d <= 3")
    c = spec.codes()
    start = np.asarray(start, dtype=np.float64).reshape(-1)
    if start.shape[0] != spec.d:
        raise ValueError("start has wrong dimension")
    center = np.asarray(ball.center, dtype=np.float64)
    x0 = np.zeros(3)
    x0[: spec.d] = start - center
    if not np.sqrt((x0 ** 2).sum()) < ball.radius:
        raise ValueError("start must lie inside the ball")
    if annulus is None:
        a_lo, a_hi = 1.0, 0.0
    else:
        a_lo, a_hi = float(annulus[0]), float(annulus[1])
    edges = np.zeros(1) if shells is None else np.asarray(shells, dtype=np.float64)
    if shells is not None and (edges.ndim != 1 or edges.shape[0] < 2 or np.any(np.diff(edges) <= 0)):
        raise ValueError("shells must be increasing edge values")
    seed, stream = _key(spec)
    max_steps = _resolve_steps(spec, ball.radius)
    mod = _mod(backend)
    (exit_time, exit_pos, last_pos, jumped, hit, failed, steps, occ) = mod.exit_batch(
        c.fam, c.a, c.aux1, c.aux2, c.n_iter, spec.d, x0, float(ball.radius),
        spec.time_step, max_steps, a_lo, a_hi, edges, seed, stream, path_lo, n)
    return ExitBatch(
        d=spec.d, dt=spec.time_step, path_lo=path_lo,
        exit_time=exit_time,
        exit_position=exit_pos[:, : spec.d] + center,
        last_interior=last_pos[:, : spec.d] + center,
        jumped=jumped, hit=hit, failed=failed, steps=steps,
        occupation=occ if keep_occupation else None)


def _require_complete(batch: ExitBatch) -> None:
    bad = int(batch.failed.sum())
    if bad:
        raise SimulationCapError(
            f"{bad} of {batch.n} paths hit the step cap before exiting; "
            "raise the horizon or coarsen the grid")


def sample_exit_batch(spec: PathSpec, ball, start, n: int, path_lo: int = 0,
                      backend: str | None = None) -> ExitBatch:
    """Exit records for n enumerated paths started at `start`."""
    b = Ball.coerce(ball, spec.d)
    batch = _run_exit(spec, b, start, n, path_lo=path_lo, backend=backend)
    _require_complete(batch)
    return batch


def sample_exit(spec: PathSpec, center, radius: float, start,
                path_index: int = 0, backend: str | None = None) -> ExitSample:
    """One exit event; horizon exhaustion extends the walk up to a hard cap."""
    b = Ball.coerce((center, radius), spec.d)
    batch = _run_exit(spec, b, start, 1, path_lo=path_index, backend=backend)
    _require_complete(batch)
    return ExitSample(
        exit_time=float(batch.exit_time[0]),
        exit_position=batch.exit_position[0].copy(),
        last_interior=batch.last_interior[0].copy(),
        jumped=bool(batch.jumped[0]),
        steps=int(batch.steps[0]),
        path_index=path_index)


def step_displacement_scale(spec: PathSpec, n_probe: int = 512) -> float:
    """Median one-step displacement |X(dt)-X(0)|, from a pilot batch."""
    c = spec.codes()
    seed, _ = _key(spec)
    probe_stream = np.uint64((spec.stream_id ^ _PROBE_STREAM_SALT) & 0xFFFFFFFFFFFFFFFF)
    from ._simnumpy import _normal, increments as np_increments
    ds, states = np_increments(c.fam, c.a, c.aux1, c.aux2, c.n_iter,
                               spec.time_step, seed, probe_stream, 0, n_probe)
    disp2 = np.zeros(n_probe)
    for _ in range(spec.d):
        z, states = _normal(states)
        disp2 += 2.0 * ds * z * z
    return float(np.median(np.sqrt(disp2)))


def estimate_mean_exit_time(spec: PathSpec, ball, start, n: int,
                            path_lo: int = 0, backend: str | None = None) -> Estimate:
    """Sample mean of the exit time from the ball."""
    b = Ball.coerce(ball, spec.d)
    batch = _run_exit(spec, b, start, n, path_lo=path_lo, backend=backend)
    _require_complete(batch)
    t = batch.exit_time
    return Estimate(float(t.mean()), float(t.std(ddof=1) / math.sqrt(n)), n, spec.time_step)


def estimate_exit_distribution(spec: PathSpec, ball, start, n: int, bins,
                               path_lo: int = 0, backend: str | None = None) -> ExitHistogram:
    """Histogram of the exit radius |X_tau - center| over given bin edges."""
    b = Ball.coerce(ball, spec.d)
    batch = _run_exit(spec, b, start, n, path_lo=path_lo, backend=backend)
    _require_complete(batch)
    center = np.asarray(b.center)
    radii = np.sqrt(((batch.exit_position - center) ** 2).sum(axis=1))
    edges = np.asarray(bins, dtype=np.float64)
    counts, _ = np.histogram(radii, bins=edges)
    probs = counts / n
    stderr = np.array([binomial_stderr(int(k), n) for k in counts])
    return ExitHistogram(edges, probs, stderr, counts, n, spec.time_step)


def estimate_hitting_probability(spec: PathSpec, ball, annulus, start, n: int,
                                 path_lo: int = 0, backend: str | None = None) -> Estimate:
    """P(path visits the radial annulus at a grid time before exiting).

    The hitting set A = {a_lo <= |x - center| <= a_hi} is checked at every
    grid point including time zero.  annulus = None or an empty range gives
    probability zero by construction.
    """
    b = Ball.coerce(ball, spec.d)
    if annulus is not None and annulus[0] <= annulus[1]:
        thickness = min(float(annulus[1]), b.radius) - max(float(annulus[0]), 0.0)
        if thickness <= 0.0:
            warnings.warn(
                "hitting annulus does not meet the ball, so the probability is "
                "0 by construction; sets of exit positions belong to "
                "estimate_harmonic", ResolutionWarning, stacklevel=2)
        else:
            scale = step_displacement_scale(spec)
            if scale > 0.0 and thickness < 5.0 * scale:
                warnings.warn(
                    f"hitting annulus thickness {thickness:.3g} is below 5x the "
                    f"median step displacement {scale:.3g}; grid may miss it",
                    ResolutionWarning, stacklevel=2)
    batch = _run_exit(spec, b, start, n, path_lo=path_lo, annulus=annulus, backend=backend)
    _require_complete(batch)
    k = int(batch.hit.sum())
    return Estimate(k / n, binomial_stderr(k, n), n, spec.time_step)


def _in_f(descriptor, points: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    if callable(descriptor):
        return np.asarray(descriptor(points), dtype=bool)
    kind = descriptor[0]
    if kind == "annulus":
        _, lo, hi = descriptor
        if lo < radius:
            raise ValueError("exterior annulus must start at or beyond the ball radius")
        r = np.sqrt(((points - center) ** 2).sum(axis=1))
        return (r >= lo) & (r <= hi)
    if kind == "halfspace":
        _, direction, offset = descriptor
        w = np.asarray(direction, dtype=np.float64)
        w = w / np.sqrt((w ** 2).sum())
        if offset < radius:
            raise ValueError("half-space must not meet the closed ball")
        return (points - center) @ w >= offset
    raise ValueError(f"unknown exterior set descriptor {descriptor!r}")


def estimate_harmonic(spec: PathSpec, ball, f_set, x, n: int,
                      path_lo: int = 0, backend: str | None = None,
                      batch: ExitBatch | None = None) -> Estimate:
    """h_F(x) = P_x(X_tau in F) for an exterior set F.

    F is ("annulus", lo, hi) or ("halfspace", direction, offset) about the
    ball center, or a vectorized membership callable; membership is
    evaluated on recorded exit positions, so one batch of exits prices any
    number of F sets.  Pass a previously sampled `batch` to reuse paths.
    """
    b = Ball.coerce(ball, spec.d)
    if batch is None:
        batch = _run_exit(spec, b, x, n, path_lo=path_lo, backend=backend)
        _require_complete(batch)
    center = np.asarray(b.center)
    member = _in_f(f_set, batch.exit_position, center, b.radius)
    k = int(member.sum())
    return Estimate(k / batch.n, binomial_stderr(k, batch.n), batch.n, spec.time_step)


def estimate_green_occupation(spec: PathSpec, ball, x, shells, n: int,
                              path_lo: int = 0, backend: str | None = None) -> GreenEstimate:
    """Occupation-time Green estimates on radial shells about the center.

    Ghat(shell) = E[time spent in shell before exit] / shell volume; the
    shells are [e_k, e_{k+1}) for the increasing edge array `shells`.
    """
    b = Ball.coerce(ball, spec.d)
    edges = np.asarray(shells, dtype=np.float64)
    if edges[-1] > b.radius + 1e-12:
        raise ValueError("occupation shells must sit inside the ball")
    scale = step_displacement_scale(spec)
    thinnest = float(np.diff(edges).min())
    if scale > 0.0 and thinnest < 10.0 * scale:
        warnings.warn(
            f"thinnest shell {thinnest:.3g} is below 10x the median step "
            f"displacement {scale:.3g}; occupation counts are grid-biased",
            OccupationBiasWarning, stacklevel=2)
    batch = _run_exit(spec, b, x, n, path_lo=path_lo, shells=edges,
                      backend=backend, keep_occupation=True)
    _require_complete(batch)
    occ = batch.occupation
    vols = np.array([ball_volume(spec.d, edges[k + 1]) - ball_volume(spec.d, edges[k])
                     for k in range(edges.shape[0] - 1)])
    values = occ.mean(axis=0) / vols
    stderr = occ.std(axis=0, ddof=1) / math.sqrt(n) / vols
    return GreenEstimate(edges, values, stderr, vols, n, spec.time_step)
