"""Closed-form ball-exit quantities for the rotationally invariant Cauchy
process (stable subordinator, alpha = 1), used as oracles.

All formulas were frozen before the estimators they certify were written.
The exit-position density of the 1-d process from (-r, r) started at x is

    k(x, z) = (1/pi) * sqrt((r^2 - x^2) / (z^2 - r^2)) / |z - x|,  |z| > r,

the mean exit time from the ball started at the center is r (in d = 1),
and the ball Green function of the 3-d process at the center is

    G(0, y) = sqrt(1 - |y|^2) / (2 pi^2 |y|^2),  0 < |y| < 1.
"""

import math

from scipy import integrate


def exit_density(x: float, z: float, r: float = 1.0) -> float:
    if abs(z) <= r:
        return 0.0
    return math.sqrt((r * r - x * x) / (z * z - r * r)) / (math.pi * abs(z - x))


def bin_mass(x: float, lo: float, hi: float, r: float = 1.0) -> float:
    """Exit-law mass of the signed interval [lo, hi] from start x."""
    if hi <= -r or lo >= r:
        val, _ = integrate.quad(lambda z: exit_density(x, z, r), lo, hi,
                                points=[v for v in (-r, r) if lo < v < hi])
        return val
    # split around the interior gap (-r, r), which carries no exit mass
    return (bin_mass(x, lo, -r, r) if lo < -r else 0.0) + \
           (bin_mass(x, r, hi, r) if hi > r else 0.0)


def prob_beyond(a: float, r: float = 1.0) -> float:
    """P_0(|X_tau| > a) for a >= r; equals 1 - (2/pi) arccos(r/a)."""
    return 1.0 - (2.0 / math.pi) * math.acos(r / a)


def mean_exit_time(r: float = 1.0) -> float:
    """E_0 tau of the ball of radius r in d = 1."""
    return r


def ball_green_d3(rho: float) -> float:
    return math.sqrt(1.0 - rho * rho) / (2.0 * math.pi ** 2 * rho * rho)
