"""Family codes shared by the simulation backends.

Each supported Laplace exponent maps to an integer code plus a small set of
scalar parameters, so the hot kernels can stay monomorphic.  The composition
rules mirror the subordinator structure:

* STABLE      increment over dt is dt**(1/a) * S where S is standard
              one-sided stable with E exp(-lam S) = exp(-lam**a).
* GAMMA       increment is Gamma(shape=aux1*dt, rate=1).  aux1 != 1 covers
              exponents that are a constant multiple of log(1+lam), which
              rescale the shape rather than the value.
* GEOMETRIC   stable increment evaluated over a Gamma(dt, 1) random time.
* ITERATED    the geometric construction applied n_iter times, feeding each
              increment in as the time argument of the next stage.
* TWO_GAMMA   sum of two independent Gamma(dt, rate) increments with rates
              aux1 and aux2; covers exponents of the form
              log((1+lam/rho1)(1+lam/rho2)) with rho1*rho2 = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .bernstein import LaplaceExponent

FAM_STABLE = 0
FAM_GAMMA = 1
FAM_GEOMETRIC = 2
FAM_ITERATED = 3
FAM_TWO_GAMMA = 4


class UnsupportedFamilyError(ValueError):
    """Raised when no exact sampling scheme exists for an exponent."""


@dataclass(frozen=True)
class FamilyCodes:
    fam: int
    a: float
    aux1: float
    aux2: float
    n_iter: int


def map_exponent(exponent: LaplaceExponent) -> FamilyCodes:
    """Translate an exponent into sampler codes, or raise if unsupported."""
    fam = exponent.family
    a = exponent.alpha / 2.0
    if fam == "stable":
        return FamilyCodes(FAM_STABLE, a, 0.0, 0.0, 1)
    if fam == "gamma":
        return FamilyCodes(FAM_GAMMA, 1.0, 1.0, 0.0, 1)
    if fam == "geometric-stable":
        return FamilyCodes(FAM_GEOMETRIC, a, 0.0, 0.0, 1)
    if fam == "iterated-geometric-stable":
        return FamilyCodes(FAM_ITERATED, a, 0.0, 0.0, exponent.n)
    if fam == "relativistic-geometric-stable":
        m = exponent.m
        if math.isclose(m, 1.0, rel_tol=0.0, abs_tol=1e-12):
            # phi reduces to (2/alpha) * log(1 + lam): a Gamma subordinator
            # run at shape multiplier 2/alpha.
            return FamilyCodes(FAM_GAMMA, 1.0, 2.0 / exponent.alpha, 0.0, 1)
        if math.isclose(exponent.alpha, 1.0, rel_tol=0.0, abs_tol=1e-12) and m > 1.0:
            # phi = log((1+lam/rho1)(1+lam/rho2)) with rho = sqrt(m) -+ sqrt(m-1).
            root = math.sqrt(m - 1.0)
            return FamilyCodes(FAM_TWO_GAMMA, 0.5, math.sqrt(m) - root, math.sqrt(m) + root, 1)
        raise UnsupportedFamilyError(
            "relativistic-geometric-stable sampling is exact only for m == 1 "
            f"or (alpha == 1, m >= 1); got alpha={exponent.alpha}, m={m}"
        )
    raise UnsupportedFamilyError(f"no exact sampler for family {fam!r}")
