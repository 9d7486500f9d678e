"""Numerical toolkit for subordinate Brownian motion.

Laplace-exponent families and their scaling certificates, Levy/potential
densities via real-axis Laplace inversion, jump and Green kernels via
subordination quadrature, Monte Carlo exit problems, and empirical
verification of Harnack-type bounds.
"""

from sbmlab.bernstein import (
    LaplaceExponent,
    ScalingCertificate,
    LowerScalingCertificate,
    stable,
    gamma_exponent,
    geometric_stable,
    iterated_geometric_stable,
    relativistic_geometric_stable,
    reg_varying,
    from_name,
    default_family_set,
)

__version__ = "0.1.0"
