"""Empirical Harnack machinery: scans, kernel ratios, sandwich, degeneracy.

Exit-law oracles come from _cauchy_ball; everything else is checked
through structural invariants and report serialization.
"""

import json
import math
import py_compile

import numpy as np
import pytest

from sbmlab import bernstein, harnack

import _cauchy_ball

SEED = 20260814


# -- probe geometry -----------------------------------------------------------

def test_probe_points_deterministic_in_ball():
    pts = harnack.probe_points(3, 0.25, 8, SEED, 5)
    assert pts.shape == (8, 3)
    assert np.all((pts ** 2).sum(axis=1) < 0.25 ** 2)
    again = harnack.probe_points(3, 0.25, 8, SEED, 5)
    assert np.array_equal(pts, again)
    other = harnack.probe_points(3, 0.25, 8, SEED, 6)
    assert not np.array_equal(pts, other)


def test_default_f_family_geometry():
    sets, labels = harnack.default_f_family(0.5, 2)
    assert len(sets) == 6 and len(labels) == 6
    kinds = [s[0] for s in sets]
    assert kinds == ["annulus"] * 4 + ["halfspace"] * 2
    # dyadic annuli tile [r, 16r) without gaps
    for k in range(4):
        assert sets[k][1] == pytest.approx(2.0 ** k * 0.5)
        assert sets[k][2] == pytest.approx(2.0 ** (k + 1) * 0.5)
    assert sets[4][1] == tuple(-v for v in sets[5][1])


# -- harnack scan -------------------------------------------------------------

@pytest.fixture(scope="module")
def small_scan():
    exp = bernstein.geometric_stable(1.0)
    return harnack.run_harnack_scan(exp, 2, (0.5, 0.25), point_count=3,
                                    n_paths=1500, seed=SEED, dt_factor=2e-3)


def test_scan_shapes(small_scan):
    rep = small_scan
    assert rep.d == 2 and rep.radii == (0.5, 0.25)
    assert len(rep.f_labels) == 6
    # ordered probe pairs: 6 sets x 3 points x 2 partners per radius
    assert len(rep.cells) == 2 * 6 * 3 * 2
    assert len(rep.per_radius) == 2
    for pts in rep.points.values():
        assert pts.shape == (3, 2)


def test_scan_ratio_invariants(small_scan):
    rep = small_scan
    by_key = {(c.radius, c.f_label, c.i, c.j): c for c in rep.cells}
    for c in rep.cells:
        twin = by_key[(c.radius, c.f_label, c.j, c.i)]
        if c.h_i > 0.0 and c.h_j > 0.0:
            assert c.ratio * twin.ratio == pytest.approx(1.0, rel=1e-12)
    for p in rep.per_radius:
        assert p.max_ratio >= 1.0
        assert p.ratio_lo <= p.max_ratio <= p.ratio_hi
    assert rep.scale_drift >= 1.0
    assert 0.0 <= rep.on_sphere_share <= 1.0


def test_scan_rejects_high_dimension():
    with pytest.raises(ValueError):
        harnack.run_harnack_scan(bernstein.stable(1.0), 4, (0.5,), n_paths=10)


def test_scan_serialization(small_scan, tmp_path):
    rep = small_scan
    csv = tmp_path / "scan.csv"
    rep.write_csv(csv)
    head = csv.read_text().splitlines()
    assert head[0] == "radius,f_set,i,j,h_i,se_i,h_j,se_j,ratio,se_log,unstable"
    assert len(head) == 1 + len(rep.cells)
    jsn = tmp_path / "scan.json"
    rep.write_json(jsn)
    payload = json.loads(jsn.read_text())
    assert payload["report"] == "harnack_scan"
    assert payload["verdicts"]["scale_drift"] == pytest.approx(rep.scale_drift)
    assert len(payload["per_radius"]) == 2
    plot = tmp_path / "scan_plot.py"
    rep.write_plot_script(plot, "scan.csv")
    py_compile.compile(str(plot), doraise=True)


# -- poisson kernel ratios ----------------------------------------------------

@pytest.fixture(scope="module")
def cauchy_poisson():
    exp = bernstein.stable(1.0)
    return harnack.run_poisson_ratio(exp, 1, 1.0, 0.3, -0.3, n_paths=20_000,
                                     seed=SEED, dt_factor=1e-3)


def test_poisson_bins_skip_interior_gap(cauchy_poisson):
    rep = cauchy_poisson
    assert rep.x1 == (0.3,) and rep.x2 == (-0.3,)
    for b in rep.bins:
        assert b.hi <= -1.0 or b.lo >= 1.0
    assert any(b.lo < 0 for b in rep.bins) and any(b.lo > 0 for b in rep.bins)


def test_poisson_matches_exit_density_integrals(cauchy_poisson):
    rep = cauchy_poisson
    stable = rep.stable_bins()
    assert len(stable) >= 10
    for b in stable:
        exact = (_cauchy_ball.bin_mass(0.3, b.lo, b.hi, 1.0)
                 / _cauchy_ball.bin_mass(-0.3, b.lo, b.hi, 1.0))
        assert abs(math.log(b.ratio) - math.log(exact)) < 3.0 * b.se_log, (b, exact)


def test_poisson_symmetry_between_starts(cauchy_poisson):
    # mirrored starts: ratio on bin (lo, hi) inverts on (-hi, -lo)
    rep = cauchy_poisson
    by_lo = {b.lo: b for b in rep.bins}
    for b in rep.bins:
        mirror = by_lo.get(-b.hi)
        if mirror is None or b.unstable or mirror.unstable:
            continue
        assert b.ratio == pytest.approx(1.0 / mirror.ratio, rel=6.0 * (b.se_log + mirror.se_log))


def test_poisson_serialization(cauchy_poisson, tmp_path):
    rep = cauchy_poisson
    csv = tmp_path / "poisson.csv"
    rep.write_csv(csv)
    assert csv.read_text().splitlines()[0] == "bin_lo,bin_hi,k1,k2,p1,p2,ratio,se_log,unstable"
    jsn = tmp_path / "poisson.json"
    rep.write_json(jsn)
    payload = json.loads(jsn.read_text())
    assert payload["report"] == "poisson_ratio"
    assert payload["verdicts"]["stable_bins"] == len(rep.stable_bins())
    plot = tmp_path / "poisson_plot.py"
    rep.write_plot_script(plot, "poisson.csv")
    py_compile.compile(str(plot), doraise=True)


# -- green sandwich -----------------------------------------------------------

def test_green_sandwich_rows_and_drift(tmp_path):
    exp = bernstein.stable(1.0)
    rep = harnack.run_green_sandwich(exp, 3, (0.5,), n_paths=3000, seed=SEED,
                                     dt_factor=1e-3)
    # 2 starts x 2 shells
    assert len(rep.rows) == 4
    for row in rep.rows:
        assert row.green > 0.0 and math.isfinite(row.ratio) and row.ratio > 0.0
        assert row.etau > 0.0 and row.xi == pytest.approx(0.5)
        assert 0.75 * 0.5 <= row.shell_lo < row.shell_hi <= 0.5
    assert rep.drift >= 1.0
    csv = tmp_path / "sandwich.csv"
    rep.write_csv(csv)
    assert csv.read_text().startswith("radius,")
    jsn = tmp_path / "sandwich.json"
    rep.write_json(jsn)
    assert json.loads(jsn.read_text())["report"] == "green_sandwich"
    plot = tmp_path / "sandwich_plot.py"
    rep.write_plot_script(plot, "sandwich.csv")
    py_compile.compile(str(plot), doraise=True)


def test_green_sandwich_requires_transience_flag():
    with pytest.raises(ValueError, match="transience"):
        harnack.run_green_sandwich(bernstein.stable(1.0), 3, (0.5,), n_paths=10,
                                   transience_checked=False)


def test_green_sandwich_rejects_start_near_annulus():
    with pytest.raises(ValueError, match="too close"):
        harnack.run_green_sandwich(bernstein.stable(1.0), 3, (0.5,), n_paths=10,
                                   b1=0.7, b2=0.75)


# -- krylov-safonov degeneracy --------------------------------------------------

def test_ks_degeneracy_small(tmp_path):
    exp = bernstein.geometric_stable(1.0)
    rep = harnack.run_ks_degeneracy(exp, 2, n_levels=2, n_paths=2000, seed=SEED,
                                    dt_factor=1e-3)
    assert rep.rho ** 2 == pytest.approx(0.75)
    assert [row.n for row in rep.rows] == [0, 1, 2]
    control = rep.rows[0]
    # se stays positive at p = 1: the boundary uses the Clopper-Pearson fallback
    assert control.a_lo == 0.0 and control.p == 1.0 and 0.0 < control.se < 1e-3
    for row in rep.rows[1:]:
        assert row.a_lo == pytest.approx(rep.rho * row.radius)
        assert 0.0 < row.p < 1.0
        assert row.ci_lo <= row.p <= row.ci_hi
    assert rep.verdict in ("decreasing", "inconclusive")
    csv = tmp_path / "ks.csv"
    rep.write_csv(csv)
    assert csv.read_text().splitlines()[0] == "n,radius,a_lo,a_hi,p,se,ci_lo,ci_hi"
    jsn = tmp_path / "ks.json"
    rep.write_json(jsn)
    payload = json.loads(jsn.read_text())
    assert payload["volume_fraction"] == pytest.approx(0.25)
    assert payload["verdicts"]["verdict"] == rep.verdict
    plot = tmp_path / "ks_plot.py"
    rep.write_plot_script(plot, "ks.csv")
    py_compile.compile(str(plot), doraise=True)


def test_ks_degeneracy_skips_control_on_request():
    exp = bernstein.geometric_stable(1.0)
    rep = harnack.run_ks_degeneracy(exp, 2, n_levels=1, n_paths=500, seed=SEED,
                                    dt_factor=2e-3, include_control=False)
    assert [row.n for row in rep.rows] == [1]
