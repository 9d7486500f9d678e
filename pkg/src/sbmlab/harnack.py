"""Empirical verification drivers for the boundary Harnack machinery.

Four experiments over the Monte Carlo layer:

* run_harnack_scan     max ratio of harmonic-function values over point
                       pairs in B(0, r/2), per radius, plus the drift of
                       that maximum across radii (scale invariance).
* run_poisson_ratio    binned exit-position (Poisson kernel) ratios for
                       two interior starting points.
* run_green_sandwich   occupation Green values against the boundary-decay
                       prediction xi(r) * r^-d * E_y[tau].
* run_ks_degeneracy    hitting probabilities of boundary annuli of fixed
                       relative volume across dyadically shrinking balls.

Estimates reuse exit batches: one batch of exits from a starting point
prices every exterior test set simultaneously.  All randomness is keyed by
(seed, stream), so reports are reproducible byte for byte.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .bernstein import LaplaceExponent
from .kernels import xi_factor
from .simulate import (Ball, PathSpec, binomial_stderr, ball_volume,
                       estimate_green_occupation, estimate_hitting_probability,
                       estimate_mean_exit_time, _run_exit, _require_complete, _in_f)

__all__ = [
    "HarnackCell",
    "HarnackReport",
    "PoissonRatioReport",
    "GreenSandwichReport",
    "KSDegeneracyReport",
    "default_f_family",
    "probe_points",
    "run_harnack_scan",
    "run_poisson_ratio",
    "run_green_sandwich",
    "run_ks_degeneracy",
]

# Stream offsets keep the scan's probe-point draws, exit batches and pilot
# probes on disjoint substreams of the one user seed.
_POINT_STREAM = 0x706F696E74
_BATCH_STREAM = 0x626174

_UNSTABLE_COUNT = 10  # both h-hat below this many expected hits: cell unstable


def default_f_family(radius: float, d: int):
    """Exterior test sets: four dyadic annuli plus two half-space caps.

    The annuli stress near-boundary and far-field mass; the opposed caps
    stress direction dependence, where Poisson kernels differ most.
    """
    sets = []
    labels = []
    for k in range(4):
        sets.append(("annulus", (2.0 ** k) * radius, (2.0 ** (k + 1)) * radius))
        labels.append(f"A({2**k}r,{2**(k+1)}r)")
    e1 = tuple(1.0 if j == 0 else 0.0 for j in range(d))
    e1neg = tuple(-v for v in e1)
    sets.append(("halfspace", e1, 2.0 * radius))
    labels.append("H(+e1,2r)")
    sets.append(("halfspace", e1neg, 2.0 * radius))
    labels.append("H(-e1,2r)")
    return sets, labels


def probe_points(d: int, radius: float, count: int, seed: int, stream_id: int) -> np.ndarray:
    """`count` points uniform in the ball of `radius`, by cube rejection.

    Deterministic in (seed, stream_id) and platform independent, so tests
    can regenerate the exact scan geometry.
    """
    state = _rng.stream_state(seed, stream_id, 0)
    out = np.empty((count, d))
    k = 0
    while k < count:
        x = np.empty(d)
        for j in range(d):
            u, state = _rng.next_uniform(state)
            x[j] = (2.0 * float(u) - 1.0) * radius
        if (x ** 2).sum() < radius * radius:
            out[k] = x
            k += 1
    return out


def _ratio_with_se(h1, se1, h2, se2):
    ratio = h1 / h2 if h2 > 0.0 else math.inf
    if h1 > 0.0 and h2 > 0.0:
        se_log = math.sqrt((se1 / h1) ** 2 + (se2 / h2) ** 2)
    else:
        se_log = math.inf
    return ratio, se_log


@dataclass(frozen=True)
class HarnackCell:
    radius: float
    f_label: str
    i: int
    j: int
    h_i: float
    se_i: float
    h_j: float
    se_j: float
    ratio: float
    se_log: float
    unstable: bool


@dataclass(frozen=True)
class PerRadius:
    radius: float
    max_ratio: float
    ratio_lo: float
    ratio_hi: float
    unstable_cells: int


@dataclass(frozen=True)
class HarnackReport:
    family: str
    d: int
    radii: tuple
    point_count: int
    n_paths: int
    seed: int
    dt_factor: float
    f_labels: tuple
    points: dict
    cells: tuple
    per_radius: tuple
    scale_drift: float
    on_sphere_share: float

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("radius,f_set,i,j,h_i,se_i,h_j,se_j,ratio,se_log,unstable\n")
            for c in self.cells:
                fh.write("%.17g,%s,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n" % (
                    c.radius, c.f_label, c.i, c.j, c.h_i, c.se_i, c.h_j, c.se_j,
                    c.ratio, c.se_log, int(c.unstable)))

    def write_json(self, path) -> None:
        payload = {
            "report": "harnack_scan",
            "family": self.family,
            "d": self.d,
            "radii": list(self.radii),
            "point_count": self.point_count,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "dt_factor": self.dt_factor,
            "per_radius": [
                {"radius": p.radius, "max_ratio": p.max_ratio, "ratio_lo": p.ratio_lo,
                 "ratio_hi": p.ratio_hi, "unstable_cells": p.unstable_cells}
                for p in self.per_radius
            ],
            "verdicts": {
                "scale_drift": self.scale_drift,
                "max_ratio_overall": max(p.max_ratio for p in self.per_radius),
                "unstable_cells": sum(p.unstable_cells for p in self.per_radius),
                "on_sphere_share": self.on_sphere_share,
            },
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_plot_script(self, path, csv_name: str) -> None:
        with open(path, "w") as fh:
            fh.write(_PLOT_TEMPLATE.format(
                csv=csv_name, x="radius", y="ratio",
                title=f"Harnack ratios, {self.family} d={self.d}",
                ylabel="h(x1)/h(x2)"))


_PLOT_TEMPLATE = """#!/usr/bin/env python3
\"\"\"Auto-generated ratio-vs-radius figure.\"\"\"
import csv
import matplotlib.pyplot as plt

xs, ys = [], []
with open({csv!r}) as fh:
    for row in csv.DictReader(fh):
        xs.append(float(row[{x!r}]))
        ys.append(float(row[{y!r}]))
plt.figure(figsize=(6, 4))
plt.semilogx(xs, ys, "o", alpha=0.6)
plt.xlabel({x!r})
plt.ylabel({ylabel!r})
plt.title({title!r})
plt.grid(True, which="both", alpha=0.3)
plt.tight_layout()
plt.savefig({csv!r}.replace(".csv", ".png"), dpi=150)
"""


def run_harnack_scan(exponent: LaplaceExponent, d: int, radii, point_count: int = 4,
                     n_paths: int = 100_000, seed: int = 20260814,
                     dt_factor: float = 2e-3, f_family=None,
                     backend: str | None = None) -> HarnackReport:
    """Max harmonic-function ratio over probe pairs, per radius.

    For each radius, `point_count` probe points are drawn uniformly in
    B(0, r/2); one exit batch per point prices every test set in
    `f_family` (default: default_f_family).  Cells where both estimates
    fall below 10/N expected hits are flagged unstable and excluded from
    the maximum, never silently dropped.
    """
    if d > 3:
        raise ValueError("scan supports d <= 3")
    radii = tuple(float(r) for r in radii)
    cells = []
    per_radius = []
    points_by_radius = {}
    sphere_hits = 0
    sphere_total = 0
    labels = ()
    for ri, r in enumerate(radii):
        dt = dt_factor / float(exponent.phi(r ** -2.0))
        if f_family is None:
            sets, labels = default_f_family(r, d)
        elif callable(f_family):
            sets, labels = f_family(r, d)
        else:
            sets, labels = f_family
        pts = probe_points(d, r / 2.0, point_count, seed, _POINT_STREAM + ri)
        points_by_radius[r] = pts
        ball = Ball(tuple(0.0 for _ in range(d)), r)
        h = np.empty((point_count, len(sets)))
        se = np.empty_like(h)
        for pi in range(point_count):
            spec = PathSpec(exponent, d, dt, horizon=None, seed=seed,
                            stream_id=_BATCH_STREAM + 64 * ri + pi)
            batch = _run_exit(spec, ball, pts[pi], n_paths, backend=backend)
            _require_complete(batch)
            dist = np.sqrt((batch.exit_position ** 2).sum(axis=1))
            sphere_hits += int(np.sum(np.abs(dist - r) <= 1e-9 * r))
            sphere_total += n_paths
            for fi, f_set in enumerate(sets):
                member = _in_f(f_set, batch.exit_position, np.zeros(d), r)
                k = int(member.sum())
                h[pi, fi] = k / n_paths
                se[pi, fi] = binomial_stderr(k, n_paths)
        floor = _UNSTABLE_COUNT / n_paths
        best = 1.0
        best_lo, best_hi = 1.0, 1.0
        n_unstable = 0
        for fi, label in enumerate(labels):
            for i in range(point_count):
                for j in range(point_count):
                    if i == j:
                        continue
                    ratio, se_log = _ratio_with_se(h[i, fi], se[i, fi], h[j, fi], se[j, fi])
                    unstable = (h[i, fi] < floor and h[j, fi] < floor) or not math.isfinite(ratio)
                    if unstable:
                        n_unstable += 1
                    cells.append(HarnackCell(r, label, i, j, h[i, fi], se[i, fi],
                                             h[j, fi], se[j, fi], ratio, se_log, unstable))
                    if not unstable and ratio > best:
                        best = ratio
                        best_lo = ratio * math.exp(-se_log)
                        best_hi = ratio * math.exp(se_log)
        per_radius.append(PerRadius(r, best, best_lo, best_hi, n_unstable))
    maxima = [p.max_ratio for p in per_radius]
    drift = max(maxima) / min(maxima)
    return HarnackReport(
        family=exponent.label(), d=d, radii=radii, point_count=point_count,
        n_paths=n_paths, seed=seed, dt_factor=dt_factor, f_labels=tuple(labels),
        points=points_by_radius, cells=tuple(cells), per_radius=tuple(per_radius),
        scale_drift=drift, on_sphere_share=sphere_hits / max(sphere_total, 1))


# ---------------------------------------------------------------------------
# Poisson-kernel ratios


@dataclass(frozen=True)
class PoissonBin:
    lo: float
    hi: float
    k1: int
    k2: int
    p1: float
    p2: float
    ratio: float
    se_log: float
    unstable: bool


@dataclass(frozen=True)
class PoissonRatioReport:
    family: str
    d: int
    radius: float
    x1: tuple
    x2: tuple
    n_paths: int
    seed: int
    dt: float
    bins: tuple

    def stable_bins(self):
        return [b for b in self.bins if not b.unstable]

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("bin_lo,bin_hi,k1,k2,p1,p2,ratio,se_log,unstable\n")
            for b in self.bins:
                fh.write("%.17g,%.17g,%d,%d,%.17g,%.17g,%.17g,%.17g,%d\n" % (
                    b.lo, b.hi, b.k1, b.k2, b.p1, b.p2, b.ratio, b.se_log, int(b.unstable)))

    def write_json(self, path) -> None:
        stable = self.stable_bins()
        payload = {
            "report": "poisson_ratio",
            "family": self.family,
            "d": self.d,
            "radius": self.radius,
            "x1": list(self.x1),
            "x2": list(self.x2),
            "n_paths": self.n_paths,
            "seed": self.seed,
            "dt": self.dt,
            "verdicts": {
                "stable_bins": len(stable),
                "unstable_bins": len(self.bins) - len(stable),
                "max_ratio": max((b.ratio for b in stable), default=math.nan),
                "min_ratio": min((b.ratio for b in stable), default=math.nan),
            },
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_plot_script(self, path, csv_name: str) -> None:
        with open(path, "w") as fh:
            fh.write(_PLOT_TEMPLATE.format(
                csv=csv_name, x="bin_lo", y="ratio",
                title=f"Poisson kernel ratio, {self.family} d={self.d}, r={self.radius}",
                ylabel="Khat(x1,z)/Khat(x2,z)"))


def _default_z_edges(radius: float, d: int) -> np.ndarray:
    mults = np.array([1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0, 6.0, 8.0])
    if d == 1:
        return np.concatenate([-radius * mults[::-1], radius * mults])
    return radius * mults


def run_poisson_ratio(exponent: LaplaceExponent, d: int, radius: float, x1, x2,
                      n_paths: int = 100_000, z_edges=None, seed: int = 20260814,
                      dt_factor: float = 1e-4, backend: str | None = None) -> PoissonRatioReport:
    """Binned exit-law ratio K-hat(x1, bin)/K-hat(x2, bin).

    Bins live on the signed coordinate axis for d=1 (the kernel is not
    symmetric for off-center starts) and on the exit radius for d >= 2.
    Bins with fewer than 25 hits from either start are flagged unstable.
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=np.float64))
    x2 = np.atleast_1d(np.asarray(x2, dtype=np.float64))
    dt = dt_factor / float(exponent.phi(radius ** -2.0))
    ball = Ball(tuple(0.0 for _ in range(d)), radius)
    edges = _default_z_edges(radius, d) if z_edges is None else np.asarray(z_edges, dtype=np.float64)
    counts = []
    for xi, x in enumerate((x1, x2)):
        spec = PathSpec(exponent, d, dt, horizon=None, seed=seed, stream_id=7000 + xi)
        batch = _run_exit(spec, ball, x, n_paths, backend=backend)
        _require_complete(batch)
        if d == 1:
            coord = batch.exit_position[:, 0]
        else:
            coord = np.sqrt((batch.exit_position ** 2).sum(axis=1))
        counts.append(np.histogram(coord, bins=edges)[0])
    k1s, k2s = counts
    bins = []
    for b in range(edges.shape[0] - 1):
        lo, hi = float(edges[b]), float(edges[b + 1])
        if d == 1 and lo >= -radius and hi <= radius:
            continue  # interior gap of the signed grid
        k1, k2 = int(k1s[b]), int(k2s[b])
        p1, p2 = k1 / n_paths, k2 / n_paths
        ratio, se_log = _ratio_with_se(p1, binomial_stderr(k1, n_paths),
                                       p2, binomial_stderr(k2, n_paths))
        bins.append(PoissonBin(lo, hi, k1, k2, p1, p2, ratio, se_log,
                               unstable=(k1 < 25 or k2 < 25)))
    return PoissonRatioReport(exponent.label(), d, radius,
                              tuple(float(v) for v in x1), tuple(float(v) for v in x2),
                              n_paths, seed, dt, tuple(bins))


# ---------------------------------------------------------------------------
# Green sandwich


@dataclass(frozen=True)
class GreenSandwichRow:
    radius: float
    x: tuple
    shell_lo: float
    shell_hi: float
    green: float
    green_se: float
    etau: float
    etau_se: float
    xi: float
    ratio: float


@dataclass(frozen=True)
class GreenSandwichReport:
    family: str
    d: int
    radii: tuple
    b1: float
    b2: float
    n_paths: int
    seed: int
    dt_factor: float
    rows: tuple
    drift: float

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("radius,x0,shell_lo,shell_hi,green,green_se,etau,etau_se,xi,ratio\n")
            for r in self.rows:
                fh.write("%.17g,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n" % (
                    r.radius, "|".join("%.17g" % v for v in r.x), r.shell_lo, r.shell_hi,
                    r.green, r.green_se, r.etau, r.etau_se, r.xi, r.ratio))

    def write_json(self, path) -> None:
        per_r = {}
        for row in self.rows:
            per_r.setdefault(row.radius, []).append(row.ratio)
        payload = {
            "report": "green_sandwich",
            "family": self.family,
            "d": self.d,
            "radii": list(self.radii),
            "b1": self.b1,
            "b2": self.b2,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "dt_factor": self.dt_factor,
            "per_radius": {
                "%g" % r: {"min_ratio": min(v), "max_ratio": max(v)} for r, v in per_r.items()
            },
            "verdicts": {
                "drift": self.drift,
                "min_ratio": min(row.ratio for row in self.rows),
                "max_ratio": max(row.ratio for row in self.rows),
            },
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_plot_script(self, path, csv_name: str) -> None:
        with open(path, "w") as fh:
            fh.write(_PLOT_TEMPLATE.format(
                csv=csv_name, x="radius", y="ratio",
                title=f"Green sandwich, {self.family} d={self.d}",
                ylabel="Ghat / (xi r^-d E_y tau)"))


def run_green_sandwich(exponent: LaplaceExponent, d: int, radii, n_paths: int = 20_000,
                       b1: float = 0.125, b2: float = 0.75, n_shells: int = 2,
                       seed: int = 20260814, dt_factor: float = 1e-3,
                       backend: str | None = None,
                       transience_checked: bool = True) -> GreenSandwichReport:
    """Occupation Green values against xi(r) * r^-d * E_y[tau].

    For each radius: starts x in {0, b1*r*e1}, occupation shells splitting
    the annulus [b2*r, r] into `n_shells` pieces, and one exit-time batch
    per shell started at a point of that shell's mid radius.  The pairing
    refuses geometries where a start sits within one shell thickness of
    the annulus (the Green function is singular on the diagonal).
    """
    if not transience_checked:
        raise ValueError("run the transience check first; the Green kernel "
                         "requires a transient configuration")
    radii = tuple(float(r) for r in radii)
    rows = []
    for ri, r in enumerate(radii):
        dt = dt_factor / float(exponent.phi(r ** -2.0))
        edges = np.linspace(b2 * r, r, n_shells + 1)
        thickness = edges[1] - edges[0]
        xs = [np.zeros(d)]
        x_off = np.zeros(d)
        x_off[0] = b1 * r
        xs.append(x_off)
        for x in xs:
            if edges[0] - float(np.sqrt((x ** 2).sum())) < thickness:
                raise ValueError("start point too close to the occupation "
                                 "annulus; shrink b1 or widen the gap to b2")
        xi = xi_factor(exponent, r)
        ball = Ball(tuple(0.0 for _ in range(d)), r)
        etaus = []
        for si in range(n_shells):
            mid = 0.5 * (edges[si] + edges[si + 1])
            y = np.zeros(d)
            y[min(1, d - 1)] = mid
            spec = PathSpec(exponent, d, dt, horizon=None, seed=seed,
                            stream_id=9000 + 32 * ri + si)
            etaus.append(estimate_mean_exit_time(spec, ball, y, n_paths, backend=backend))
        for xi_idx, x in enumerate(xs):
            spec = PathSpec(exponent, d, dt, horizon=None, seed=seed,
                            stream_id=9500 + 32 * ri + xi_idx)
            g = estimate_green_occupation(spec, ball, x, edges, n_paths, backend=backend)
            for si in range(n_shells):
                et = etaus[si]
                denom = xi * r ** (-d) * et.value
                rows.append(GreenSandwichRow(
                    r, tuple(float(v) for v in x), float(edges[si]), float(edges[si + 1]),
                    float(g.values[si]), float(g.stderr[si]),
                    et.value, et.stderr, xi, float(g.values[si]) / denom))
    per_r = {}
    for row in rows:
        per_r.setdefault(row.radius, []).append(row.ratio)
    mids = [math.exp(np.mean(np.log(v))) for v in per_r.values()]
    drift = max(mids) / min(mids)
    return GreenSandwichReport(exponent.label(), d, radii, b1, b2, n_paths, seed,
                               dt_factor, tuple(rows), drift)


# ---------------------------------------------------------------------------
# Krylov-Safonov degeneracy


@dataclass(frozen=True)
class KSRow:
    n: int
    radius: float
    a_lo: float
    a_hi: float
    p: float
    se: float
    ci_lo: float
    ci_hi: float


@dataclass(frozen=True)
class KSDegeneracyReport:
    family: str
    d: int
    rho: float
    n_paths: int
    seed: int
    dt_factor: float
    rows: tuple
    verdict: str
    inconclusive_pairs: int

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("n,radius,a_lo,a_hi,p,se,ci_lo,ci_hi\n")
            for r in self.rows:
                fh.write("%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n" % (
                    r.n, r.radius, r.a_lo, r.a_hi, r.p, r.se, r.ci_lo, r.ci_hi))

    def write_json(self, path) -> None:
        payload = {
            "report": "ks_degeneracy",
            "family": self.family,
            "d": self.d,
            "rho": self.rho,
            "volume_fraction": 1.0 - self.rho ** self.d,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "dt_factor": self.dt_factor,
            "rows": [
                {"n": r.n, "radius": r.radius, "p": r.p, "se": r.se,
                 "ci": [r.ci_lo, r.ci_hi]} for r in self.rows
            ],
            "verdicts": {
                "verdict": self.verdict,
                "inconclusive_pairs": self.inconclusive_pairs,
            },
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_plot_script(self, path, csv_name: str) -> None:
        with open(path, "w") as fh:
            fh.write(_PLOT_TEMPLATE.format(
                csv=csv_name, x="radius", y="p",
                title=f"Krylov-Safonov degeneracy, {self.family} d={self.d}",
                ylabel="P(hit boundary annulus before exit)"))


def run_ks_degeneracy(exponent: LaplaceExponent, d: int, n_levels: int = 5,
                      n_paths: int = 100_000, seed: int = 20260814,
                      dt_factor: float = 5e-4, include_control: bool = True,
                      backend: str | None = None) -> KSDegeneracyReport:
    """Hitting probability of a boundary annulus of relative volume 1/4.

    A_n = {rho*r_n <= |x| <= r_n} inside B(0, r_n), r_n = 2^-n, with
    rho = (3/4)^(1/d) so |A_n|/|B_n| = 1/4 exactly.  The n=0 control row
    uses A = B itself (probability one by construction).  Verdict is
    "decreasing" when point estimates fall strictly in n; adjacent pairs
    that fail strictness but have overlapping 95% CIs are counted
    inconclusive; any other violation gives "not-decreasing".
    """
    rho = (0.75) ** (1.0 / d)
    rows = []
    start_n = 0 if include_control else 1
    for n in range(start_n, n_levels + 1):
        r = 2.0 ** (-n)
        a_lo, a_hi = (0.0, r) if n == 0 else (rho * r, r)
        dt = dt_factor / float(exponent.phi(r ** -2.0))
        spec = PathSpec(exponent, d, dt, horizon=None, seed=seed, stream_id=4000 + n)
        est = estimate_hitting_probability(spec, Ball(tuple(0.0 for _ in range(d)), r),
                                           (a_lo, a_hi), tuple(0.0 for _ in range(d)),
                                           n_paths, backend=backend)
        ci = 1.959963984540054 * est.stderr
        rows.append(KSRow(n, r, a_lo, a_hi, est.value, est.stderr,
                          max(est.value - ci, 0.0), min(est.value + ci, 1.0)))
    scan = [row for row in rows if row.n >= 1]
    inconclusive = 0
    failed = False
    for prev, cur in zip(scan, scan[1:]):
        if cur.p < prev.p:
            continue
        if cur.ci_lo <= prev.ci_hi and prev.ci_lo <= cur.ci_hi:
            inconclusive += 1
        else:
            failed = True
    verdict = "not-decreasing" if failed else ("decreasing" if inconclusive == 0 else "inconclusive")
    return KSDegeneracyReport(exponent.label(), d, rho, n_paths, seed, dt_factor,
                              tuple(rows), verdict, inconclusive)
