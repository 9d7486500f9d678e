"""Real-axis Laplace inversion and the density bound machinery."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from sbmlab import bernstein, densities

# frozen independently of the implementation: the radius r0 solving
# sigma/(1-2/e) * (1 - exp(-r0)) = 1/2 at sigma = 1, delta = 1
R0_UNIT = 0.1417024666278942


def _unit_cert(exp, delta=1.0, sigma=1.0):
    return bernstein.ScalingCertificate(
        exponent=exp, delta=delta, lambda0=1.0, sigma=sigma,
        x_max=1e6, lam_max=1e8, grid_shape=(1, 1))


# -- inversion engine --------------------------------------------------------

def test_gaver_stehfest_known_pairs():
    t = np.geomspace(0.1, 1.0, 9)
    exp_vals = densities.gaver_stehfest(lambda lam: 1.0 / (1.0 + lam), t)
    assert np.allclose(exp_vals, np.exp(-t), rtol=1e-6)
    t_wide = np.geomspace(0.1, 5.0, 17)
    lin = densities.gaver_stehfest(lambda lam: lam ** -2.0, t_wide)
    assert np.allclose(lin, t_wide, rtol=1e-6)
    const = densities.gaver_stehfest(lambda lam: 1.0 / lam, t_wide)
    assert np.allclose(const, 1.0, atol=1e-6)
    # precision degrades as the value decays below the transform scale,
    # which is why exponential-tail grids are capped
    deep = densities.gaver_stehfest(lambda lam: 1.0 / (1.0 + lam), np.array([5.0]))[0]
    assert deep == pytest.approx(math.exp(-5.0), rel=1e-2)
    assert abs(deep / math.exp(-5.0) - 1.0) > 1e-5


def test_gaver_stehfest_order_must_be_even():
    with pytest.raises(ValueError):
        densities.gaver_stehfest(lambda lam: 1.0 / lam, np.array([1.0]), order=7)


@settings(max_examples=40, deadline=None)
@given(c=st.floats(min_value=0.1, max_value=2.0),
       t=st.floats(min_value=0.1, max_value=1.5))
def test_gaver_stehfest_exponential_property(c, t):
    got = densities.gaver_stehfest(lambda lam: 1.0 / (lam + c), np.array([t]))[0]
    assert got == pytest.approx(math.exp(-c * t), rel=5e-4)


# -- closed forms vs inversion -----------------------------------------------

def test_inverted_levy_density_matches_closed_forms():
    grid = densities.default_grid(1e-3, 1.0, 30)
    cases = [bernstein.gamma_exponent(), bernstein.stable(0.5),
             bernstein.stable(1.0), bernstein.stable(1.5)]
    for exp in cases:
        table = densities.invert_density(densities.target_for(exp, "levy"), grid)
        exact = densities.closed_form_callable(exp, "levy")(grid)
        rel = np.abs(table.values / exact - 1.0)
        assert rel.max() < 5e-3, f"{exp.label()}: worst {rel.max():.2e}"


def test_inverted_potential_density_matches_stable_closed_form():
    grid = densities.default_grid(1e-3, 1.0, 30)
    exp = bernstein.stable(1.0)
    table = densities.invert_density(densities.target_for(exp, "potential"), grid)
    exact = densities.closed_form_callable(exp, "potential")(grid)
    assert np.max(np.abs(table.values / exact - 1.0)) < 5e-3


def test_closed_form_relativistic_alpha_one():
    exp = bernstein.relativistic_geometric_stable(1.0, 2.0)
    fn = densities.closed_form_callable(exp, "levy")
    r1 = math.sqrt(2.0) - 1.0
    r2 = math.sqrt(2.0) + 1.0
    t = 0.7
    assert fn(t) == pytest.approx((math.exp(-r1 * t) + math.exp(-r2 * t)) / t, rel=1e-14)
    assert densities.closed_form_callable(exp, "potential") is None
    assert densities.closed_form_callable(bernstein.geometric_stable(1.0), "levy") is None


def test_density_evaluator_prefers_closed_form():
    ev = densities.density_evaluator(bernstein.stable(1.0), "levy")
    assert isinstance(ev, densities.AnalyticDensity)
    ev2 = densities.density_evaluator(bernstein.geometric_stable(1.0), "levy")
    assert isinstance(ev2, densities.TabulatedDensity)
    assert ev2.table.provenance == "inverted"


def test_instability_error_on_exponential_tail():
    grid = densities.default_grid(1e-2, 50.0, 20)
    with pytest.raises(densities.InversionInstabilityError):
        densities.invert_density(densities.target_for(bernstein.gamma_exponent(), "levy"), grid)


def test_default_grid_caps_exponential_tails():
    gam = densities.default_grid_for(bernstein.gamma_exponent(), "levy")
    assert gam.max() <= 5.0 + 1e-12
    rel = densities.default_grid_for(
        bernstein.relativistic_geometric_stable(1.0, 2.0), "levy")
    assert rel.max() <= 5.0 / (math.sqrt(2.0) - 1.0) + 1e-9
    pot = densities.default_grid_for(bernstein.gamma_exponent(), "potential")
    assert pot.max() == pytest.approx(1e2)


def test_monotonicity_clean_on_default_grids():
    for exp in bernstein.default_family_set():
        table = densities.invert_density(
            densities.target_for(exp, "levy"), densities.default_grid_for(exp, "levy"))
        assert table.is_nonincreasing(), exp.label()


def test_tabulated_evaluator_interpolates():
    exp = bernstein.stable(1.0)
    table = densities.closed_form_density(exp, "levy", densities.default_grid(1e-3, 1.0, 20))
    ev = table.evaluator()
    fn = densities.closed_form_callable(exp, "levy")
    for t in (1.3e-3, 0.0237, 0.911):
        assert float(ev(t)) == pytest.approx(float(fn(t)), rel=1e-3)


# -- asymptotic ratios -------------------------------------------------------

def test_stable_asymptotic_ratio_constants():
    grid = densities.default_grid(1e-6, 1e-1, 30)
    for alpha in (0.5, 1.0, 1.5):
        a = 0.5 * alpha
        exp = bernstein.stable(alpha)
        lev = densities.invert_density(densities.target_for(exp, "levy"), grid)
        _, ratio = densities.levy_asymptotic_ratio(lev, t_max=1e-2)
        assert np.max(np.abs(ratio * special.gamma(1.0 - a) - 1.0)) < 0.02
        pot = densities.invert_density(densities.target_for(exp, "potential"), grid)
        _, ratio_u = densities.potential_asymptotic_ratio(pot, t_max=1e-2)
        assert np.max(np.abs(ratio_u * special.gamma(1.0 + a) - 1.0)) < 0.02


# -- two-sided bounds --------------------------------------------------------

def test_upper_bound_constant_holds_everywhere():
    for exp in bernstein.default_family_set():
        for kind in densities.KINDS:
            table = densities.invert_density(
                densities.target_for(exp, kind), densities.default_grid_for(exp, kind))
            rep = densities.upper_bound_check(table)
            assert rep.ok, f"{exp.label()} {kind}: margin {rep.worst_margin} at {rep.t_worst}"


def test_frozen_unit_r0():
    exp = bernstein.gamma_exponent()
    const = densities.lower_bound_constant(
        densities.target_for(exp, "levy"), _unit_cert(exp), nu_at_inv_lambda0=1.0)
    assert const.r0 == pytest.approx(R0_UNIT, rel=1e-12)


def test_lower_bound_branch_selection():
    exp = bernstein.gamma_exponent()
    target = densities.target_for(exp, "levy")
    huge = densities.lower_bound_constant(target, _unit_cert(exp),
                                                   nu_at_inv_lambda0=1e9)
    assert huge.branch == "integral"
    tiny = densities.lower_bound_constant(target, _unit_cert(exp),
                                                   nu_at_inv_lambda0=1e-9)
    assert tiny.branch == "anchor"
    assert tiny.c2 < huge.c2


def test_lower_bound_needs_a_density_value():
    exp = bernstein.gamma_exponent()
    with pytest.raises(ValueError, match="nu_at_inv_lambda0"):
        densities.lower_bound_constant(
            densities.target_for(exp, "levy"), _unit_cert(exp))


def test_lower_bound_holds_with_certified_constants():
    for exp in bernstein.default_family_set():
        cert = bernstein.certify_upper_scaling(exp)
        for kind in densities.KINDS:
            table = densities.invert_density(
                densities.target_for(exp, kind), densities.default_grid_for(exp, kind))
            rep = densities.lower_bound_check(table, cert)
            assert rep.ok, f"{exp.label()} {kind}: margin {rep.worst_margin}"


# -- serialization -----------------------------------------------------------

def test_table_csv_round_trip(tmp_path):
    exp = bernstein.stable(1.0)
    table = densities.closed_form_density(exp, "levy", densities.default_grid(1e-2, 1.0, 10))
    path = tmp_path / table.csv_name()
    table.write_csv(path)
    rows = path.read_text().strip().split("\n")
    assert rows[0] == "t,value,err_est,provenance"
    assert len(rows) == table.grid.size + 1
    t0, v0, e0, prov = rows[1].split(",")
    assert float(t0) == table.grid[0]
    assert float(v0) == table.values[0]
    assert prov == "closed-form"
    table.write_csv(path)  # rewriting is byte-stable
    assert path.read_text().strip().split("\n") == rows
