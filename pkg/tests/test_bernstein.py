"""Laplace exponent families, scaling certificates, and condition checks."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sbmlab import bernstein


def _fd_derivative(f, lam, h=1e-6):
    return (f(lam * (1.0 + h)) - f(lam * (1.0 - h))) / (2.0 * h * lam)


# -- evaluation --------------------------------------------------------------

def test_pinned_values():
    assert bernstein.stable(1.0).phi(4.0) == pytest.approx(2.0, rel=1e-15)
    assert bernstein.stable(0.5).phi(16.0) == pytest.approx(2.0, rel=1e-15)
    assert bernstein.gamma_exponent().phi(math.e - 1.0) == pytest.approx(1.0, rel=1e-14)
    assert bernstein.geometric_stable(1.0).phi(1.0) == pytest.approx(math.log(2.0), rel=1e-15)
    it = bernstein.iterated_geometric_stable(2.0, n=2)
    assert it.phi(5.0) == pytest.approx(math.log(1.0 + math.log(6.0)), rel=1e-14)
    rel = bernstein.relativistic_geometric_stable(1.0, 1.0)
    assert rel.phi(1.0) == pytest.approx(math.log(4.0), rel=1e-14)
    rv = bernstein.reg_varying(1.0)
    assert rv.phi(1.0) == pytest.approx(math.sqrt(math.log(2.0)), rel=1e-14)


def test_phi_vanishes_at_zero():
    for exp in bernstein.default_family_set():
        assert float(exp.phi(0.0)) == 0.0
        assert float(exp.phi(1e-300)) >= 0.0


def test_phi_prime_matches_finite_differences():
    lam = np.geomspace(1e-4, 1e6, 41)
    for exp in bernstein.default_family_set():
        exact = exp.phi_prime(lam)
        fd = _fd_derivative(exp.phi, lam)
        assert np.allclose(exact, fd, rtol=2e-6), exp.label()


def test_relativistic_small_lambda_stability():
    # expm1/log1p form must not cancel where lam << m^(alpha/2)
    exp = bernstein.relativistic_geometric_stable(1.2, 2.0)
    lam = np.array([1e-12, 1e-8])
    v = exp.phi(lam)
    assert np.all(v > 0.0)
    # phi(lam) ~ phi'(0) * lam to first order
    assert v[0] / lam[0] == pytest.approx(float(exp.phi_prime(1e-300)), rel=1e-4)


# -- construction ------------------------------------------------------------

def test_from_name_normalizes():
    a = bernstein.from_name("Geometric_Stable", alpha=1.5)
    assert a == bernstein.geometric_stable(1.5)
    with pytest.raises(ValueError, match="unknown family"):
        bernstein.from_name("levy-flight")


def test_parameter_validation():
    with pytest.raises(ValueError):
        bernstein.stable(0.0)
    with pytest.raises(ValueError):
        bernstein.stable(2.5)
    with pytest.raises(ValueError):
        bernstein.relativistic_geometric_stable(2.0, 1.0)
    with pytest.raises(ValueError):
        bernstein.relativistic_geometric_stable(1.0, -1.0)
    with pytest.raises(ValueError):
        bernstein.iterated_geometric_stable(1.0, n=0)


def test_default_delta_table():
    assert bernstein.stable(1.0).default_delta == 0.5
    assert bernstein.stable(0.5).default_delta == 0.75
    assert bernstein.reg_varying(1.0).default_delta == 0.5
    for fam in ("gamma", "geometric-stable", "iterated-geometric-stable",
                "relativistic-geometric-stable"):
        assert bernstein.from_name(fam).default_delta == 1.0


# -- condition checks --------------------------------------------------------

def test_subadditive_scaling_all_families():
    for exp in bernstein.default_family_set():
        assert bernstein.check_subadditive_scaling(exp), exp.label()


def test_psi_monotone_all_families():
    for exp in bernstein.default_family_set():
        rep = bernstein.check_psi_monotone(exp)
        assert rep.ok, f"{exp.label()}: worst drop {rep.worst_drop} at {rep.where}"


def test_non_bernstein_parameters_flagged():
    bad = bernstein.relativistic_geometric_stable(1.0, 0.2)
    assert not bernstein.check_subadditive_scaling(bad)
    rep = bernstein.check_psi_monotone(bad)
    assert not rep.ok
    assert rep.worst_drop > 1e-4


def test_upper_certificate_stable_is_exact():
    cert = bernstein.certify_upper_scaling(bernstein.stable(1.0))
    assert cert.delta == 0.5
    assert cert.sigma == pytest.approx(1.0, abs=1e-12)
    assert cert.lambda0 == 1.0


def test_upper_certificate_log_families_below_two():
    for fam in ("gamma", "geometric-stable"):
        cert = bernstein.certify_upper_scaling(bernstein.from_name(fam))
        assert cert.delta == 1.0
        assert 1.0 <= cert.sigma <= 2.0, fam


def test_upper_certificate_holds_off_grid():
    for exp in bernstein.default_family_set():
        cert = bernstein.certify_upper_scaling(exp)
        lam = np.geomspace(cert.lambda0, 0.3 * cert.lam_max, 23) * 1.37
        x = np.geomspace(1.0, 0.3 * cert.x_max, 17) * 1.11
        lhs = exp.phi_prime(np.outer(lam, x))
        rhs = cert.sigma * x[None, :] ** (-cert.delta) * exp.phi_prime(lam)[:, None]
        assert np.all(lhs <= rhs * (1.0 + 1e-9)), exp.label()


def test_lower_window_shapes():
    lo, hi = bernstein.lower_window(1, 0.5)
    assert lo == hi == 0.5  # empty open interval
    assert bernstein.lower_window(2, 1.0) == (0.0, 2.0)
    lo3, hi3 = bernstein.lower_window(3, 0.5)
    assert lo3 < 0.0 < hi3


def test_lower_certificate_stable():
    cert = bernstein.certify_lower_scaling(bernstein.stable(1.0), 0.5)
    assert cert.sigma_prime == pytest.approx(1.0, abs=1e-12)
    assert cert.admissible(2)
    assert cert.admissible(3)
    assert not cert.admissible(1)  # empty window at delta = 1/2


def test_lower_certificate_collapses_for_log_families():
    # no uniform lower-scaling constant exists below delta' = 1: the grid
    # sigma' must decay like x_max^(delta'-1), and an extreme grid trips
    # the collapse guard
    exp = bernstein.geometric_stable(1.0)
    c6 = bernstein.certify_lower_scaling(exp, 0.3, x_max=1e6)
    c8 = bernstein.certify_lower_scaling(exp, 0.3, x_max=1e8)
    slope = math.log(c8.sigma_prime / c6.sigma_prime) / math.log(1e2)
    assert slope == pytest.approx(0.3 - 1.0, abs=0.01)
    with pytest.raises(ValueError, match="lower scaling"):
        bernstein.certify_lower_scaling(exp, 0.05, x_max=1e16)


def test_growth_envelope_stable():
    c = bernstein.growth_envelope_constant(bernstein.stable(1.0))
    assert c == pytest.approx(1.0, abs=1e-12)


def test_eta_functions_positive_and_increasing():
    lam = np.geomspace(1e-6, 1e6, 200)
    for exp in bernstein.default_family_set():
        for f in (bernstein.eta1, bernstein.eta2):
            v = f(exp, lam)
            assert np.all(v > 0.0)
            assert np.all(np.diff(v) >= -1e-10 * v[:-1]), exp.label()


def test_label_and_slug():
    exp = bernstein.relativistic_geometric_stable(1.0, 2.0)
    assert exp.slug == "relativistic-geometric-stable"
    assert "m=2" in exp.label()
    assert bernstein.gamma_exponent().label() == "gamma"


# -- properties --------------------------------------------------------------

_FAMILY = st.sampled_from([
    bernstein.stable(0.7),
    bernstein.stable(1.0),
    bernstein.gamma_exponent(),
    bernstein.geometric_stable(1.0),
    bernstein.iterated_geometric_stable(1.0, 2),
    bernstein.relativistic_geometric_stable(1.0, 2.0),
    bernstein.reg_varying(1.0),
])

_LAM = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(exp=_FAMILY, a=_LAM, b=_LAM)
def test_subadditivity_property(exp, a, b):
    lhs = float(exp.phi(a + b))
    rhs = float(exp.phi(a)) + float(exp.phi(b))
    assert lhs <= rhs * (1.0 + 1e-12)


@settings(max_examples=60, deadline=None)
@given(exp=_FAMILY, lam=_LAM, x=st.floats(min_value=1.0, max_value=1e4))
def test_monotone_and_concave_scaling_property(exp, lam, x):
    assert float(exp.phi(lam * x)) >= float(exp.phi(lam)) * (1.0 - 1e-12)
    assert float(exp.phi_prime(lam)) > 0.0
    # subadditive scaling: phi(lam*x) <= x * phi(lam) for x >= 1
    assert float(exp.phi(lam * x)) <= x * float(exp.phi(lam)) * (1.0 + 1e-12)
