"""Command-line front end.

Subcommands map one-to-one onto registered operations; `run --config` plays
the same operations from a JSON file, with explicit flags winning over the
file and the file winning over defaults.  Every invocation writes its
artifacts plus a manifest.json carrying the echoed config, a sha256 of that
config, per-check verdicts and a checksum for each emitted file, so a rerun
with the same config is byte-identical and auditable.

Exit codes: 0 all checks passed (inconclusive verdicts warn but pass),
1 a check failed, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import bernstein, densities, harnack, kernels, simulate
from ._backend import backend_name, set_backend
from ._families import UnsupportedFamilyError, map_exponent
from .bernstein import LaplaceExponent, from_name

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


_NUMERICAL_ERRORS = (densities.InversionInstabilityError, kernels.TailDivergenceError,
                     kernels.NotTransientError, simulate.SimulationCapError)


@dataclass
class RunConfig:
    """One operation request; serializes losslessly to JSON and back."""

    operation: str
    family: dict
    d: int = 1
    seed: int = 20260814
    out: str = "out"
    backend: str | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError("d must be a positive integer")
        if not isinstance(self.family, dict) or "name" not in self.family:
            raise ConfigError("family must be an object with a 'name'")
        if self.operation not in OPERATIONS:
            raise ConfigError(f"unknown operation {self.operation!r}; "
                              f"known: {', '.join(sorted(OPERATIONS))}")

    def exponent(self) -> LaplaceExponent:
        kw = {k: v for k, v in self.family.items() if k != "name"}
        try:
            return from_name(self.family["name"], **kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad family spec: {exc}") from exc

    def to_dict(self) -> dict:
        return {"operation": self.operation, "family": self.family, "d": self.d,
                "seed": self.seed, "out": self.out, "backend": self.backend,
                "params": self.params}

    @staticmethod
    def from_dict(data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {"operation", "family", "d", "seed", "out", "backend", "params"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return RunConfig(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _sha256_file(path: str) -> str:
    with open(path, "rb") as fh:
        return _sha256_bytes(fh.read())


def _config_hash(cfg: RunConfig) -> str:
    return _sha256_bytes(json.dumps(cfg.to_dict(), sort_keys=True).encode())


class Artifacts:
    """Collects emitted files, checks and warnings for the manifest."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.files: list[str] = []
        self.checks: list[dict] = []
        self.warnings: list[str] = []
        os.makedirs(cfg.out, exist_ok=True)

    def path(self, name: str) -> str:
        p = os.path.join(self.cfg.out, name)
        self.files.append(p)
        return p

    def check(self, name: str, ok: bool, value, note: str = "") -> None:
        self.checks.append({"name": name, "pass": bool(ok),
                            "value": value, "note": note})
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {value}{'  (' + note + ')' if note else ''}")

    def warn(self, message: str) -> None:
        self.warnings.append(message)
        print(f"[WARN] {message}")

    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def finish(self) -> int:
        manifest = {
            "schema_version": SCHEMA_VERSION,
            "config": self.cfg.to_dict(),
            "config_sha256": _config_hash(self.cfg),
            "seed": self.cfg.seed,
            "backend": self.cfg.backend or backend_name(),
            "checks": self.checks,
            "warnings": self.warnings,
            "files": {os.path.basename(p): _sha256_file(p) for p in self.files},
        }
        path = os.path.join(self.cfg.out, "manifest.json")
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"manifest: {path}")
        return 0 if self.passed() else 1


_LOGLOG_PLOT = """#!/usr/bin/env python3
\"\"\"Auto-generated log-log figure.\"\"\"
import csv
import matplotlib.pyplot as plt

xs, ys = [], []
with open({csv!r}) as fh:
    for row in csv.DictReader(fh):
        xs.append(float(row[{x!r}]))
        ys.append(float(row[{y!r}]))
plt.figure(figsize=(6, 4))
plt.loglog(xs, ys, "-o", ms=3)
plt.xlabel({x!r})
plt.ylabel({y!r})
plt.title({title!r})
plt.grid(True, which="both", alpha=0.3)
plt.tight_layout()
plt.savefig({csv!r}.replace(".csv", ".png"), dpi=150)
"""


def _write_loglog_script(art: Artifacts, script: str, csv_name: str, x: str, y: str, title: str):
    with open(art.path(script), "w") as fh:
        fh.write(_LOGLOG_PLOT.format(csv=csv_name, x=x, y=y, title=title))


# ---------------------------------------------------------------------------
# operations


def _op_phi_table(cfg: RunConfig, art: Artifacts):
    exp = cfg.exponent()
    lams = np.asarray(cfg.params.get("lam", np.logspace(-3, 3, 25)), dtype=np.float64)
    phi = exp.phi(lams)
    dphi = exp.phi_prime(lams)
    name = f"{exp.slug}_phi.csv"
    with open(art.path(name), "w") as fh:
        fh.write("lambda,phi,phi_prime\n")
        for row in zip(lams, phi, dphi):
            fh.write("%.17g,%.17g,%.17g\n" % row)
    sub = bernstein.check_subadditive_scaling(exp)
    art.check("phi.subadditive-scaling", sub, "grid check")
    mono = bernstein.check_psi_monotone(exp)
    art.check("phi.eta-monotone", mono.ok, f"worst drop {mono.worst_drop:.3g}")
    _write_loglog_script(art, f"{exp.slug}_phi_plot.py", name, "lambda", "phi",
                         f"phi, {exp.label()}")


def _op_density_table(cfg: RunConfig, art: Artifacts):
    exp = cfg.exponent()
    kind = cfg.params.get("kind", "levy")
    if kind not in densities.KINDS:
        raise ConfigError(f"kind must be one of {densities.KINDS}")
    order = int(cfg.params.get("order", 16))
    if {"t_lo", "t_hi"} <= set(cfg.params):
        grid = densities.default_grid(float(cfg.params["t_lo"]), float(cfg.params["t_hi"]),
                                      int(cfg.params.get("per_decade", 60)))
    else:
        grid = densities.default_grid_for(exp, kind)
    table = densities.invert_density(densities.target_for(exp, kind), grid, order=order)
    name = table.csv_name()
    table.write_csv(art.path(name))
    mono = table.monotonicity_report()
    art.check(f"density.{kind}.positive", bool(np.all(table.values > 0)), "all grid values > 0")
    art.check(f"density.{kind}.err", float(table.err_est.max()) < math.inf,
              f"max order-halving err {table.err_est.max():.3g}")
    if mono:
        worst = max(rise for _, rise in mono)
        art.warn(f"{kind} table has {len(mono)} monotonicity violations, "
                 f"worst relative rise {worst:.3g} (inversion noise)")
    _write_loglog_script(art, f"{exp.slug}_{kind}_plot.py", name, "t", "value",
                         f"{kind} density, {exp.label()}")


def _op_kernel_profile(cfg: RunConfig, art: Artifacts):
    exp = cfg.exponent()
    kind = cfg.params.get("kind", "j")
    if kind not in ("j", "g"):
        raise ConfigError("kernel kind must be 'j' or 'g'")
    rs = np.asarray(cfg.params.get("rs", np.logspace(-3, -1, 7)), dtype=np.float64)
    if kind == "g":
        rep = kernels.check_transience(exp, cfg.d)
        if rep.verdict != "transient":
            raise kernels.NotTransientError(
                f"{exp.label()} in d={cfg.d} is {rep.verdict}; no Green kernel")
        table = kernels.green_kernel_profile(exp, cfg.d, rs, transience_checked=True)
    else:
        table = kernels.jump_kernel_profile(exp, cfg.d, rs)
    name = table.csv_name()
    table.write_csv(art.path(name))
    ratios = table.ratios()
    spread = float(np.max(ratios) / np.min(ratios))
    art.check(f"kernel.{kind}.ratio-spread", spread < 3.0, f"{spread:.4g}", "target < 3")
    _write_loglog_script(art, f"{exp.slug}_{kind}_d{cfg.d}_plot.py", name, "r", "value",
                         f"{kind} kernel, {exp.label()}, d={cfg.d}")


def _op_transience(cfg: RunConfig, art: Artifacts):
    exp = cfg.exponent()
    rep = kernels.check_transience(exp, cfg.d)
    name = f"{exp.slug}_transience_d{cfg.d}.json"
    with open(art.path(name), "w") as fh:
        json.dump({"family": exp.label(), "d": cfg.d, "verdict": rep.verdict,
                   "q_last": rep.q_last, "exponent_fit": rep.exponent_fit,
                   "gap": rep.gap}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if rep.verdict == "inconclusive":
        art.warn(f"transience verdict inconclusive (small-lambda exponent gap {rep.gap:.3g})")
    art.check("transience.verdict", True, rep.verdict, f"q_last={rep.q_last:.4g}")


def _spec_for(cfg: RunConfig, exp: LaplaceExponent, radius: float, stream_id: int = 0) -> simulate.PathSpec:
    dt = cfg.params.get("dt")
    if dt is None:
        dt = simulate.default_time_step(exp, radius, float(cfg.params.get("dt_factor", 1e-4)))
    return simulate.PathSpec(exp, cfg.d, float(dt), horizon=cfg.params.get("horizon"),
                             seed=cfg.seed, stream_id=stream_id)


def _op_mean_exit(cfg: RunConfig, art: Artifacts):
    exp = cfg.exponent()
    radius = float(cfg.params.get("radius", 1.0))
    start = cfg.params.get("start", [0.0] * cfg.d)
    n = int(cfg.params.get("n_paths", 10_000))
    spec = _spec_for(cfg, exp, radius)
    est = simulate.estimate_mean_exit_time(spec, ((0.0,) * cfg.d, radius), start, n,
                                           backend=cfg.backend)
    est.write_csv(art.path(f"{exp.slug}_mean_exit_d{cfg.d}.csv"))
    scaled = est.value * float(exp.phi(radius ** -2.0))
    art.check("simulate.mean-exit", est.value > 0.0,
              f"E tau = {est.value:.5g} +- {est.stderr:.2g}",
              f"E tau * phi(r^-2) = {scaled:.4g}")


def _op_exit_distribution(cfg: RunConfig, art: Artifacts):
    exp = cfg.exponent()
    radius = float(cfg.params.get("radius", 1.0))
    start = cfg.params.get("start", [0.0] * cfg.d)
    n = int(cfg.params.get("n_paths", 10_000))
    bins = np.asarray(cfg.params.get("bins", radius * np.array([1.0, 1.5, 2.0, 3.0, 5.0, 9.0])))
    spec = _spec_for(cfg, exp, radius)
    hist = simulate.estimate_exit_distribution(spec, ((0.0,) * cfg.d, radius), start, n, bins,
                                               backend=cfg.backend)
    hist.write_csv(art.path(f"{exp.slug}_exit_dist_d{cfg.d}.csv"))
    covered = float(hist.probs.sum())
    art.check("simulate.exit-dist", covered <= 1.0 + 1e-12,
              f"binned mass {covered:.4f} over {len(hist.probs)} bins")


def _op_hitting(cfg: RunConfig, art: Artifacts):
    exp = cfg.exponent()
    radius = float(cfg.params.get("radius", 1.0))
    start = cfg.params.get("start", [0.0] * cfg.d)
    n = int(cfg.params.get("n_paths", 10_000))
    a_lo = float(cfg.params.get("a_lo", 0.75 * radius))
    a_hi = float(cfg.params.get("a_hi", radius))
    spec = _spec_for(cfg, exp, radius)
    est = simulate.estimate_hitting_probability(spec, ((0.0,) * cfg.d, radius),
                                                (a_lo, a_hi), start, n, backend=cfg.backend)
    est.write_csv(art.path(f"{exp.slug}_hitting_d{cfg.d}.csv"))
    art.check("simulate.hitting", 0.0 <= est.value <= 1.0,
              f"P = {est.value:.5g} +- {est.stderr:.2g}")


def _op_green_occupation(cfg: RunConfig, art: Artifacts):
    exp = cfg.exponent()
    radius = float(cfg.params.get("radius", 1.0))
    start = cfg.params.get("start", [0.0] * cfg.d)
    n = int(cfg.params.get("n_paths", 10_000))
    shells = np.asarray(cfg.params.get("shells", radius * np.linspace(0.0, 1.0, 6)))
    spec = _spec_for(cfg, exp, radius)
    g = simulate.estimate_green_occupation(spec, ((0.0,) * cfg.d, radius), start, shells, n,
                                           backend=cfg.backend)
    g.write_csv(art.path(f"{exp.slug}_green_occupation_d{cfg.d}.csv"))
    art.check("simulate.green-occupation", bool(np.all(g.values >= 0.0)),
              f"{len(g.values)} shells, total mass {float((g.values * g.volumes).sum()):.5g}")


def _op_harnack_scan(cfg: RunConfig, art: Artifacts):
    exp = cfg.exponent()
    radii = cfg.params.get("radii", [0.5, 0.25, 0.125, 0.0625])
    rep = harnack.run_harnack_scan(
        exp, cfg.d, radii,
        point_count=int(cfg.params.get("point_count", 4)),
        n_paths=int(cfg.params.get("n_paths", 100_000)),
        seed=cfg.seed, dt_factor=float(cfg.params.get("dt_factor", 2e-3)),
        backend=cfg.backend)
    base = f"{exp.slug}_harnack_d{cfg.d}"
    rep.write_csv(art.path(base + ".csv"))
    rep.write_json(art.path(base + ".json"))
    rep.write_plot_script(art.path(base + "_plot.py"), base + ".csv")
    worst = max(p.max_ratio for p in rep.per_radius)
    art.check("harnack.max-ratio", worst < 10.0, f"{worst:.4g}", "target < 10")
    art.check("harnack.scale-drift", rep.scale_drift < 2.0, f"{rep.scale_drift:.4g}", "target < 2")
    art.check("harnack.on-sphere", rep.on_sphere_share == 0.0, f"{rep.on_sphere_share:.3g}")
    unstable = sum(p.unstable_cells for p in rep.per_radius)
    if unstable:
        art.warn(f"{unstable} unstable scan cells (both h-hat under 10/N); retained in CSV")


def _op_poisson(cfg: RunConfig, art: Artifacts):
    exp = cfg.exponent()
    radius = float(cfg.params.get("radius", 1.0))
    x1 = cfg.params.get("x1", [0.2 * radius] + [0.0] * (cfg.d - 1))
    x2 = cfg.params.get("x2", [-0.2 * radius] + [0.0] * (cfg.d - 1))
    rep = harnack.run_poisson_ratio(
        exp, cfg.d, radius, x1, x2,
        n_paths=int(cfg.params.get("n_paths", 50_000)),
        z_edges=cfg.params.get("z_edges"),
        seed=cfg.seed, dt_factor=float(cfg.params.get("dt_factor", 1e-4)),
        backend=cfg.backend)
    base = f"{exp.slug}_poisson_d{cfg.d}"
    rep.write_csv(art.path(base + ".csv"))
    rep.write_json(art.path(base + ".json"))
    rep.write_plot_script(art.path(base + "_plot.py"), base + ".csv")
    stable_bins = rep.stable_bins()
    art.check("poisson.stable-bins", len(stable_bins) > 0,
              f"{len(stable_bins)} stable / {len(rep.bins)} total")
    if len(stable_bins) < len(rep.bins):
        art.warn(f"{len(rep.bins) - len(stable_bins)} bins under 25 hits flagged unstable")


def _op_green_sandwich(cfg: RunConfig, art: Artifacts):
    exp = cfg.exponent()
    rep_t = kernels.check_transience(exp, cfg.d)
    if rep_t.verdict != "transient":
        raise kernels.NotTransientError(
            f"{exp.label()} in d={cfg.d} is {rep_t.verdict}; Green sandwich needs transience")
    rep = harnack.run_green_sandwich(
        exp, cfg.d, cfg.params.get("radii", [0.5, 0.25]),
        n_paths=int(cfg.params.get("n_paths", 20_000)),
        b1=float(cfg.params.get("b1", 0.125)), b2=float(cfg.params.get("b2", 0.75)),
        n_shells=int(cfg.params.get("n_shells", 2)),
        seed=cfg.seed, dt_factor=float(cfg.params.get("dt_factor", 1e-3)),
        backend=cfg.backend, transience_checked=True)
    base = f"{exp.slug}_green_sandwich_d{cfg.d}"
    rep.write_csv(art.path(base + ".csv"))
    rep.write_json(art.path(base + ".json"))
    rep.write_plot_script(art.path(base + "_plot.py"), base + ".csv")
    ratios = [row.ratio for row in rep.rows]
    art.check("green-sandwich.finite", all(math.isfinite(x) and x > 0 for x in ratios),
              f"ratios in [{min(ratios):.4g}, {max(ratios):.4g}]")
    art.check("green-sandwich.drift", rep.drift < 2.0, f"{rep.drift:.4g}", "target < 2")


def _op_ks(cfg: RunConfig, art: Artifacts):
    exp = cfg.exponent()
    rep = harnack.run_ks_degeneracy(
        exp, cfg.d, n_levels=int(cfg.params.get("n_levels", 5)),
        n_paths=int(cfg.params.get("n_paths", 20_000)),
        seed=cfg.seed, dt_factor=float(cfg.params.get("dt_factor", 5e-4)),
        backend=cfg.backend)
    base = f"{exp.slug}_ks_d{cfg.d}"
    rep.write_csv(art.path(base + ".csv"))
    rep.write_json(art.path(base + ".json"))
    rep.write_plot_script(art.path(base + "_plot.py"), base + ".csv")
    if rep.verdict == "inconclusive":
        art.warn(f"{rep.inconclusive_pairs} adjacent pair(s) inconclusive by CI overlap")
    art.check("ks.verdict", rep.verdict != "not-decreasing", rep.verdict)


# -- verify stages ----------------------------------------------------------


def _verify_conditions(cfg: RunConfig, art: Artifacts):
    exp = cfg.exponent()
    sub = bernstein.check_subadditive_scaling(exp)
    art.check("conditions.subadditive", sub, "grid check")
    cert = bernstein.certify_upper_scaling(exp)
    art.check("conditions.upper-scaling", math.isfinite(cert.sigma),
              f"delta={cert.delta:.3g} sigma={cert.sigma:.4g}")
    mono = bernstein.check_psi_monotone(exp)
    art.check("conditions.eta-monotone", mono.ok, f"worst drop {mono.worst_drop:.3g}")
    lo, hi = bernstein.lower_window(cfg.d, cert.delta)
    if not lo < hi:
        art.warn(f"lower-scaling window for d={cfg.d}, delta={cert.delta:.3g} is "
                 "empty; the eta-monotone route carries the estimates instead")
    else:
        dp = 0.5 * (lo + hi)
        try:
            lcert = bernstein.certify_lower_scaling(exp, dp, upper=cert)
        except ValueError:
            art.warn(f"no lower-scaling certificate at delta'={dp:.3g}; the "
                     "eta-monotone route carries the estimates instead")
        else:
            art.check("conditions.lower-scaling", lcert.admissible(cfg.d),
                      f"delta'={dp:.3g} sigma'={lcert.sigma_prime:.4g}")


def _verify_asymptotics(cfg: RunConfig, art: Artifacts):
    exp = cfg.exponent()
    cert = bernstein.certify_upper_scaling(exp)
    for kind in densities.KINDS:
        table = densities.invert_density(densities.target_for(exp, kind),
                                         densities.default_grid_for(exp, kind))
        table.write_csv(art.path(table.csv_name()))
        up = densities.upper_bound_check(table)
        art.check(f"asymptotics.{kind}.upper-bound", up.ok,
                  f"worst margin {up.worst_margin:.4g}")
        low = densities.lower_bound_check(table, cert)
        art.check(f"asymptotics.{kind}.lower-bound", low.ok,
                  f"worst margin {low.worst_margin:.4g}")
        if kind == "levy":
            ts, ratio = densities.levy_asymptotic_ratio(table)
        else:
            ts, ratio = densities.potential_asymptotic_ratio(table)
        with open(art.path(f"{exp.slug}_{kind}_ratio.csv"), "w") as fh:
            fh.write("t,ratio\n")
            for row in zip(ts, ratio):
                fh.write("%.17g,%.17g\n" % row)
        if exp.family == "stable":
            a = exp.alpha / 2.0
            const = 1.0 / math.gamma(1.0 - a) if kind == "levy" else 1.0 / math.gamma(1.0 + a)
            dev = float(np.max(np.abs(ratio / const - 1.0)))
            art.check(f"asymptotics.{kind}.exact-ratio", dev < 0.02,
                      f"max deviation {dev:.3g}", "target < 2%")


def _verify_kernels(cfg: RunConfig, art: Artifacts):
    exp = cfg.exponent()
    rep = kernels.check_transience(exp, cfg.d)
    art.check("kernels.transience", True, rep.verdict, f"q_last={rep.q_last:.4g}")
    rs = np.logspace(-3, -1, 5)
    jt = kernels.jump_kernel_profile(exp, cfg.d, rs)
    jt.write_csv(art.path(jt.csv_name()))
    spread = float(np.max(jt.ratios()) / np.min(jt.ratios()))
    art.check("kernels.j-spread", spread < 3.0, f"{spread:.4g}", "target < 3")
    if rep.verdict == "transient":
        gt = kernels.green_kernel_profile(exp, cfg.d, rs, transience_checked=True)
        gt.write_csv(art.path(gt.csv_name()))
        spread_g = float(np.max(gt.ratios()) / np.min(gt.ratios()))
        art.check("kernels.g-spread", spread_g < 3.0, f"{spread_g:.4g}", "target < 3")
    else:
        art.warn(f"Green profile skipped: verdict {rep.verdict}")


def _verify_simulation(cfg: RunConfig, art: Artifacts):
    exp = cfg.exponent()
    try:
        map_exponent(exp)
    except UnsupportedFamilyError as exc:
        art.warn(f"simulation skipped: {exc}")
        return
    n = int(cfg.params.get("n_paths", 200_000))
    s = simulate.sample_increments(exp, 1.0, n, seed=cfg.seed, stream_id=1,
                                   backend=cfg.backend)
    w = np.exp(-s)
    target = math.exp(-float(exp.phi(1.0)))
    z = (float(w.mean()) - target) / (float(w.std(ddof=1)) / math.sqrt(n))
    art.check("simulation.laplace-wiring", abs(z) < 4.0,
              f"E e^-S1 = {w.mean():.5f} vs e^-phi(1) = {target:.5f}", f"z = {z:+.2f}")
    vals = []
    n_exit = int(cfg.params.get("n_exit", 2_000))
    for k, r in enumerate((0.5, 0.25, 0.125)):
        dt = simulate.default_time_step(exp, r, 1e-3)
        spec = simulate.PathSpec(exp, cfg.d, dt, seed=cfg.seed, stream_id=100 + k)
        est = simulate.estimate_mean_exit_time(spec, ((0.0,) * cfg.d, r), (0.0,) * cfg.d,
                                               n_exit, backend=cfg.backend)
        vals.append(est.value * float(exp.phi(r ** -2.0)))
    spread = max(vals) / min(vals)
    art.check("simulation.exit-sandwich", spread < 10.0,
              f"E tau * phi in [{min(vals):.4g}, {max(vals):.4g}]", "spread < 10")


def _verify_harnack(cfg: RunConfig, art: Artifacts):
    exp = cfg.exponent()
    try:
        map_exponent(exp)
    except UnsupportedFamilyError as exc:
        art.warn(f"harnack scan skipped: {exc}")
        return
    rep = harnack.run_harnack_scan(
        exp, cfg.d, cfg.params.get("radii", [0.5, 0.25, 0.125]),
        point_count=int(cfg.params.get("point_count", 3)),
        n_paths=int(cfg.params.get("n_paths", 20_000)),
        seed=cfg.seed, dt_factor=float(cfg.params.get("dt_factor", 2e-3)),
        backend=cfg.backend)
    base = f"{exp.slug}_verify_harnack_d{cfg.d}"
    rep.write_csv(art.path(base + ".csv"))
    rep.write_json(art.path(base + ".json"))
    worst = max(p.max_ratio for p in rep.per_radius)
    art.check("harnack.max-ratio", worst < 10.0, f"{worst:.4g}", "target < 10")
    art.check("harnack.scale-drift", rep.scale_drift < 2.0, f"{rep.scale_drift:.4g}", "target < 2")


def _op_verify_all(cfg: RunConfig, art: Artifacts):
    _verify_conditions(cfg, art)
    _verify_asymptotics(cfg, art)
    _verify_kernels(cfg, art)
    _verify_simulation(cfg, art)
    _verify_harnack(cfg, art)


OPERATIONS = {
    "phi.table": _op_phi_table,
    "density.table": _op_density_table,
    "kernel.profile": _op_kernel_profile,
    "transience.check": _op_transience,
    "simulate.mean-exit": _op_mean_exit,
    "simulate.exit-dist": _op_exit_distribution,
    "simulate.hitting": _op_hitting,
    "simulate.green-occupation": _op_green_occupation,
    "harnack.scan": _op_harnack_scan,
    "harnack.poisson": _op_poisson,
    "harnack.green-sandwich": _op_green_sandwich,
    "harnack.ks-degeneracy": _op_ks,
    "verify.conditions": _verify_conditions,
    "verify.asymptotics": _verify_asymptotics,
    "verify.kernels": _verify_kernels,
    "verify.simulation": _verify_simulation,
    "verify.harnack": _verify_harnack,
    "verify.all": _op_verify_all,
}


def execute(cfg: RunConfig) -> int:
    if cfg.backend:
        set_backend(cfg.backend)
    try:
        art = Artifacts(cfg)
        OPERATIONS[cfg.operation](cfg, art)
        return art.finish()
    except ConfigError:
        raise
    except UnsupportedFamilyError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    finally:
        if cfg.backend:
            set_backend(None)


# ---------------------------------------------------------------------------
# argument parsing


def _family_args(p: argparse.ArgumentParser):
    p.add_argument("--family", default="stable", help="family slug (see README)")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--m", type=float, default=None)
    p.add_argument("--n-compose", type=int, default=None,
                   help="composition depth for the iterated family")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="artifact directory (default: out)")
    p.add_argument("--backend", choices=("auto", "numba", "numpy"), default=None)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads for the compiled backend; per-path "
                        "streams make results identical for any value")


def _apply_threads(n: int | None) -> None:
    if not n:
        return
    try:
        import numba
    except ImportError:
        return
    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def _floats(text: str):
    return [float(v) for v in text.split(",") if v]


def _cfg_from_args(args, operation: str, params: dict) -> RunConfig:
    family = {"name": args.family}
    if args.alpha is not None:
        family["alpha"] = args.alpha
    if args.m is not None:
        family["m"] = args.m
    if args.n_compose is not None:
        family["n"] = args.n_compose
    kw = {}
    if args.d is not None:
        kw["d"] = args.d
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.out is not None:
        kw["out"] = args.out
    if args.backend is not None:
        kw["backend"] = args.backend
    return RunConfig(operation=operation, family=family,
                     params={k: v for k, v in params.items() if v is not None}, **kw)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sbmlab",
        description="Subordinate-Brownian-motion numerics: Laplace exponents, "
                    "kernel asymptotics, Monte Carlo exits and Harnack scans.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phi", help="tabulate a Laplace exponent and its scaling checks")
    _family_args(p)
    p.add_argument("--lam", type=_floats, default=None, help="comma-separated lambda grid")

    p = sub.add_parser("density", help="invert a Levy or potential density")
    _family_args(p)
    p.add_argument("--kind", choices=densities.KINDS, default="levy")
    p.add_argument("--t-lo", type=float, default=None)
    p.add_argument("--t-hi", type=float, default=None)
    p.add_argument("--per-decade", type=int, default=None)
    p.add_argument("--order", type=int, default=None)

    p = sub.add_parser("kernel", help="jump or Green kernel profile with asymptote ratios")
    _family_args(p)
    p.add_argument("kind", choices=("j", "g"))
    p.add_argument("--r", type=_floats, default=None, help="comma-separated radii")

    p = sub.add_parser("transience", help="small-lambda transience verdict")
    _family_args(p)

    p = sub.add_parser("simulate", help="Monte Carlo exit estimators")
    _family_args(p)
    p.add_argument("op", choices=("mean-exit", "exit-dist", "hitting", "green-occupation"))
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--n-paths", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--dt-factor", type=float, default=None)
    p.add_argument("--a-lo", type=float, default=None)
    p.add_argument("--a-hi", type=float, default=None)

    p = sub.add_parser("harnack", help="Harnack, Poisson, Green-sandwich and "
                                       "degeneracy experiments")
    _family_args(p)
    p.add_argument("experiment", choices=("scan", "poisson", "green-sandwich", "ks-degeneracy"))
    p.add_argument("--radii", type=_floats, default=None)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--n-paths", type=int, default=None)
    p.add_argument("--point-count", type=int, default=None)
    p.add_argument("--n-levels", type=int, default=None)
    p.add_argument("--dt-factor", type=float, default=None)

    p = sub.add_parser("verify", help="composite verification pipeline")
    _family_args(p)
    p.add_argument("stage", choices=("conditions", "asymptotics", "kernels",
                                     "simulation", "harnack", "all"))
    p.add_argument("--n-paths", type=int, default=None)

    p = sub.add_parser("run", help="execute an operation from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--backend", choices=("auto", "numba", "numpy"), default=None)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads for the compiled backend; per-path "
                        "streams make results identical for any value")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, matching our config-error code
        return int(exc.code or 0)
    _apply_threads(getattr(args, "threads", None))
    try:
        if args.command == "run":
            try:
                with open(args.config) as fh:
                    data = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                print(f"config error: {exc}", file=sys.stderr)
                return 2
            cfg = RunConfig.from_dict(data)
            if args.seed is not None:
                cfg.seed = args.seed
            if args.out is not None:
                cfg.out = args.out
            if args.backend is not None:
                cfg.backend = args.backend
        elif args.command == "phi":
            cfg = _cfg_from_args(args, "phi.table", {"lam": args.lam})
        elif args.command == "density":
            cfg = _cfg_from_args(args, "density.table", {
                "kind": args.kind, "t_lo": args.t_lo, "t_hi": args.t_hi,
                "per_decade": args.per_decade, "order": args.order})
        elif args.command == "kernel":
            cfg = _cfg_from_args(args, "kernel.profile", {"kind": args.kind, "rs": args.r})
        elif args.command == "transience":
            cfg = _cfg_from_args(args, "transience.check", {})
        elif args.command == "simulate":
            cfg = _cfg_from_args(args, f"simulate.{args.op}", {
                "radius": args.radius, "n_paths": args.n_paths, "dt": args.dt,
                "dt_factor": args.dt_factor, "a_lo": args.a_lo, "a_hi": args.a_hi})
        elif args.command == "harnack":
            cfg = _cfg_from_args(args, f"harnack.{args.experiment}", {
                "radii": args.radii, "radius": args.radius, "n_paths": args.n_paths,
                "point_count": args.point_count, "n_levels": args.n_levels,
                "dt_factor": args.dt_factor})
        elif args.command == "verify":
            cfg = _cfg_from_args(args, f"verify.{args.stage}", {"n_paths": args.n_paths})
        else:  # pragma: no cover - argparse guards this
            return 2
        return execute(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
