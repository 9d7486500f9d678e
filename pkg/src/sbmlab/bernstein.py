"""Laplace exponents of driftless subordinators and their scaling conditions.

A subordinator S with no drift has E exp(-lam*S_t) = exp(-t*phi(lam)) where
phi(lam) = integral of (1 - exp(-lam*t)) against the jump measure.  The
estimates downstream (jump kernel, Green function, exit times, Harnack
bounds) hinge on two grid-certifiable properties of phi':

* upper scaling: phi'(lam*x)/phi'(lam) <= sigma * x^(-delta) for x >= 1 and
  lam >= lambda0, with delta in (0, 1];
* lower scaling (only needed in low dimension): phi'(lam*x)/phi'(lam) >=
  sigma' * x^(-delta') with delta' in a window that depends on d and delta.

Certification is a sup/inf over a fixed geometric grid: honest about its
range, cheap, and reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

__all__ = [
    "LaplaceExponent",
    "ScalingCertificate",
    "LowerScalingCertificate",
    "MonotoneReport",
    "stable",
    "gamma_exponent",
    "geometric_stable",
    "iterated_geometric_stable",
    "relativistic_geometric_stable",
    "reg_varying",
    "from_name",
    "default_family_set",
    "check_subadditive_scaling",
    "certify_upper_scaling",
    "certify_lower_scaling",
    "psi",
    "eta1",
    "eta2",
    "check_psi_monotone",
    "growth_envelope_constant",
]

FAMILY_SLUGS = (
    "stable",
    "gamma",
    "geometric-stable",
    "iterated-geometric-stable",
    "relativistic-geometric-stable",
    "reg-varying",
)


@dataclass(frozen=True)
class LaplaceExponent:
    """A parametrized Laplace exponent phi with analytic derivative.

    family is one of FAMILY_SLUGS; alpha is the stability-type index
    (ignored by "gamma"), m the mass parameter of the relativistic family,
    n the iteration depth of the iterated family.
    """

    family: str
    alpha: float = 1.0
    m: float = 1.0
    n: int = 1

    def __post_init__(self):
        if self.family not in FAMILY_SLUGS:
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == "relativistic-geometric-stable":
            if not 0.0 < self.alpha < 2.0:
                raise ValueError("alpha must lie in (0, 2)")
            if self.m <= 0.0:
                raise ValueError("m must be positive")
        elif self.family == "reg-varying":
            if not 0.0 < self.alpha < 2.0:
                raise ValueError("alpha must lie in (0, 2)")
        elif self.family != "gamma":
            if not 0.0 < self.alpha <= 2.0:
                raise ValueError("alpha must lie in (0, 2]")
        if self.n < 1:
            raise ValueError("n must be a positive integer")

    # -- evaluation ------------------------------------------------------

    def phi(self, lam):
        lam = np.asarray(lam, dtype=np.float64)
        a = 0.5 * self.alpha
        if self.family == "stable":
            return lam**a
        if self.family == "gamma":
            return np.log1p(lam)
        if self.family == "geometric-stable":
            return np.log1p(lam**a)
        if self.family == "iterated-geometric-stable":
            v = lam
            for _ in range(self.n):
                v = np.log1p(v**a)
            return v
        if self.family == "relativistic-geometric-stable":
            c = self.m**a
            w = 1.0 / a
            # (lam+c)^w - c^w without cancellation at small lam
            u = self.m * np.expm1(w * np.log1p(lam / c))
            return np.log1p(u)
        # reg-varying: lam^(alpha/2) * log(1+lam)^(1-alpha/2)
        b2 = 1.0 - a
        return lam**a * np.log1p(lam) ** b2

    def phi_prime(self, lam):
        lam = np.asarray(lam, dtype=np.float64)
        a = 0.5 * self.alpha
        if self.family == "stable":
            return a * lam ** (a - 1.0)
        if self.family == "gamma":
            return 1.0 / (1.0 + lam)
        if self.family == "geometric-stable":
            z = lam**a
            return a * lam ** (a - 1.0) / (1.0 + z)
        if self.family == "iterated-geometric-stable":
            v = lam
            acc = np.ones_like(lam)
            for _ in range(self.n):
                z = v**a
                acc = acc * (a * v ** (a - 1.0) / (1.0 + z))
                v = np.log1p(z)
            return acc
        if self.family == "relativistic-geometric-stable":
            c = self.m**a
            w = 1.0 / a
            u = self.m * np.expm1(w * np.log1p(lam / c))
            return w * (lam + c) ** (w - 1.0) / (1.0 + u)
        b1 = a
        b2 = 1.0 - a
        L = np.log1p(lam)
        val = lam**b1 * L**b2
        return val * (b1 / lam + b2 / ((1.0 + lam) * L))

    # -- metadata --------------------------------------------------------

    @property
    def slug(self) -> str:
        return self.family

    @property
    def default_delta(self) -> float:
        """Largest decay exponent delta the family supports in practice.

        phi' of the stable-driven families is regularly varying with index
        alpha/2 - 1, so delta = 1 - alpha/2; the log-type families have
        phi'(lam) ~ c/lam up to slowly varying corrections, so delta = 1.
        """
        if self.family in ("stable", "reg-varying"):
            return 1.0 - 0.5 * self.alpha
        return 1.0

    def label(self) -> str:
        if self.family == "gamma":
            return "gamma"
        if self.family == "iterated-geometric-stable":
            return f"{self.family}(alpha={self.alpha:g}, n={self.n})"
        if self.family == "relativistic-geometric-stable":
            return f"{self.family}(alpha={self.alpha:g}, m={self.m:g})"
        return f"{self.family}(alpha={self.alpha:g})"


def stable(alpha: float = 1.0) -> LaplaceExponent:
    """phi(lam) = lam^(alpha/2): the one-sided stable subordinator."""
    return LaplaceExponent("stable", alpha=alpha)


def gamma_exponent() -> LaplaceExponent:
    """phi(lam) = log(1+lam): the standard Gamma subordinator."""
    return LaplaceExponent("gamma")


def geometric_stable(alpha: float = 1.0) -> LaplaceExponent:
    """phi(lam) = log(1 + lam^(alpha/2))."""
    return LaplaceExponent("geometric-stable", alpha=alpha)


def iterated_geometric_stable(alpha: float = 1.0, n: int = 2) -> LaplaceExponent:
    """n-fold composition of log(1 + lam^(alpha/2)) with itself."""
    return LaplaceExponent("iterated-geometric-stable", alpha=alpha, n=n)


def relativistic_geometric_stable(alpha: float = 1.0, m: float = 1.0) -> LaplaceExponent:
    """phi(lam) = log(1 + (lam + m^(alpha/2))^(2/alpha) - m).

    For m >= 1 this is a Bernstein function; for small m (below roughly
    1 - alpha/2) phi' is not even monotone near zero and the condition
    checkers will report the failure.
    """
    return LaplaceExponent("relativistic-geometric-stable", alpha=alpha, m=m)


def reg_varying(alpha: float = 1.0) -> LaplaceExponent:
    """phi(lam) = lam^(alpha/2) * log(1+lam)^(1-alpha/2).

    Geometric interpolation of lam and log(1+lam), regularly varying at
    infinity with index alpha/2 and a genuinely non-constant slowly varying
    factor.
    """
    return LaplaceExponent("reg-varying", alpha=alpha)


_FACTORIES: dict[str, Callable[..., LaplaceExponent]] = {
    "stable": stable,
    "gamma": lambda **kw: gamma_exponent(),
    "geometric-stable": geometric_stable,
    "iterated-geometric-stable": iterated_geometric_stable,
    "relativistic-geometric-stable": relativistic_geometric_stable,
    "reg-varying": reg_varying,
}


def from_name(family: str, **params) -> LaplaceExponent:
    """Build an exponent from its slug, e.g. from_name("stable", alpha=1)."""
    slug = family.strip().lower().replace("_", "-")
    if slug not in _FACTORIES:
        raise ValueError(f"unknown family {family!r}; choose from {FAMILY_SLUGS}")
    return _FACTORIES[slug](**params)


def default_family_set() -> list[LaplaceExponent]:
    """One representative per built-in family, used by the sweeping checks."""
    return [
        stable(1.0),
        gamma_exponent(),
        geometric_stable(1.0),
        iterated_geometric_stable(1.0, 2),
        relativistic_geometric_stable(1.0, 2.0),
        reg_varying(1.0),
    ]


# ---------------------------------------------------------------------------
# scaling checks and certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingCertificate:
    """Grid-certified upper scaling bound for phi'.

    Asserts phi'(lam*x) <= sigma * x^(-delta) * phi'(lam) for every grid
    point with x >= 1 and lam >= lambda0; sigma is the observed sup, so the
    certificate is tight on its grid.
    """

    exponent: LaplaceExponent
    delta: float
    lambda0: float
    sigma: float
    x_max: float
    lam_max: float
    grid_shape: tuple[int, int]

    def bound(self, lam, x):
        return self.sigma * np.asarray(x, dtype=float) ** (-self.delta) * self.exponent.phi_prime(lam)


@dataclass(frozen=True)
class LowerScalingCertificate:
    """Grid-certified lower scaling bound for phi', with dimension windows.

    Asserts phi'(lam*x) >= sigma_prime * x^(-delta_prime) * phi'(lam) on the
    grid.  windows maps each low dimension d to (lo, hi, admissible): the
    open interval delta' must fall in for the d-dimensional Green/Harnack
    machinery, and whether (delta_prime, delta) satisfies it together with
    d + 2*delta - 2 > 0.
    """

    exponent: LaplaceExponent
    delta: float
    delta_prime: float
    lambda0: float
    sigma_prime: float
    x_max: float
    lam_max: float
    grid_shape: tuple[int, int]
    windows: dict = field(default_factory=dict)

    def admissible(self, d: int) -> bool:
        if d >= 3:
            return True
        return bool(self.windows.get(d, (0.0, 0.0, False))[2])


@dataclass(frozen=True)
class MonotoneReport:
    ok: bool
    worst_drop: float
    where: float


def _ratio_grid(exponent, lambda0, lam_max, x_max, n_lam, n_x):
    lam = np.geomspace(lambda0, lam_max, n_lam)
    x = np.geomspace(1.0, x_max, n_x)
    pp = exponent.phi_prime
    num = pp(np.outer(lam, x))
    den = pp(lam)[:, None]
    return lam, x, num / den


def check_subadditive_scaling(
    exponent: LaplaceExponent,
    lam_lo: float = 1e-8,
    lam_hi: float = 1e8,
    x_max: float = 1e6,
    n: int = 120,
    slack: float = 1e-12,
) -> bool:
    """Check phi(lam*x) <= x*phi(lam) for x >= 1 on a geometric grid.

    Every concave phi with phi(0) = 0 satisfies this; a failure beyond
    rounding slack means the supplied exponent is not such a function.
    """
    lam = np.geomspace(lam_lo, lam_hi, n)
    x = np.geomspace(1.0, x_max, n)
    lhs = exponent.phi(np.outer(lam, x))
    rhs = x[None, :] * exponent.phi(lam)[:, None]
    return bool(np.all(lhs <= rhs * (1.0 + slack)))


def certify_upper_scaling(
    exponent: LaplaceExponent,
    delta: float | None = None,
    lambda0: float = 1.0,
    lam_max: float = 1e8,
    x_max: float = 1e6,
    n_lam: int = 200,
    n_x: int = 200,
    sigma_cap: float = 1e6,
) -> ScalingCertificate:
    """Compute sigma = sup over the grid of phi'(lam*x) * x^delta / phi'(lam).

    Raises ValueError when the sup exceeds sigma_cap, which signals that the
    requested delta is too large for the family.
    """
    if delta is None:
        delta = exponent.default_delta
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    lam, x, ratio = _ratio_grid(exponent, lambda0, lam_max, x_max, n_lam, n_x)
    sigma = float(np.max(ratio * x[None, :] ** delta))
    if not np.isfinite(sigma) or sigma > sigma_cap:
        raise ValueError(
            f"upper scaling certification failed for {exponent.label()}: "
            f"sup = {sigma:.3g} at delta = {delta:g}; delta is too large"
        )
    return ScalingCertificate(
        exponent=exponent,
        delta=delta,
        lambda0=lambda0,
        sigma=sigma,
        x_max=x_max,
        lam_max=lam_max,
        grid_shape=(n_lam, n_x),
    )


def lower_window(d: int, delta: float) -> tuple[float, float]:
    """Admissible open interval for delta' in dimension d given delta."""
    lo = 1.0 - 0.5 * d
    hi = min(1.0 + 0.5 * d, 2.0 * delta + 0.5 * (d - 2.0))
    return lo, hi


def certify_lower_scaling(
    exponent: LaplaceExponent,
    delta_prime: float,
    upper: ScalingCertificate | None = None,
    lambda0: float = 1.0,
    lam_max: float = 1e8,
    x_max: float = 1e6,
    n_lam: int = 200,
    n_x: int = 200,
    sigma_floor: float = 1e-12,
) -> LowerScalingCertificate:
    """Compute sigma' = inf over the grid of phi'(lam*x) * x^delta' / phi'(lam).

    The result also records, for d in {1, 2}, whether (delta', delta) sits
    in the admissible window (delta from the upper certificate, or the
    family default when none is given).  Raises ValueError when the inf
    collapses to ~0, i.e. delta' is too small for the family.
    """
    delta = upper.delta if upper is not None else exponent.default_delta
    lam, x, ratio = _ratio_grid(exponent, lambda0, lam_max, x_max, n_lam, n_x)
    sigma_prime = float(np.min(ratio * x[None, :] ** delta_prime))
    if sigma_prime < sigma_floor:
        raise ValueError(
            f"lower scaling certification failed for {exponent.label()}: "
            f"inf = {sigma_prime:.3g} at delta' = {delta_prime:g}; delta' is too small"
        )
    windows = {}
    for d in (1, 2):
        lo, hi = lower_window(d, delta)
        ok = (lo < delta_prime < hi) and (d + 2.0 * delta - 2.0 > 0.0)
        windows[d] = (lo, hi, ok)
    return LowerScalingCertificate(
        exponent=exponent,
        delta=delta,
        delta_prime=delta_prime,
        lambda0=lambda0,
        sigma_prime=sigma_prime,
        x_max=x_max,
        lam_max=lam_max,
        grid_shape=(n_lam, n_x),
        windows=windows,
    )


def psi(exponent: LaplaceExponent, lam):
    """psi(lam) = lam^2 * phi'(lam) / phi(lam)^2.

    This is the weight that turns the potential-density asymptote into the
    Green-kernel asymptote; it is nondecreasing whenever lam/phi(lam) is
    again a Laplace exponent.
    """
    lam = np.asarray(lam, dtype=np.float64)
    return lam**2 * exponent.phi_prime(lam) / exponent.phi(lam) ** 2


def eta1(exponent: LaplaceExponent, lam):
    """lam^2 * phi'(lam), the scale function behind the jump-kernel bound."""
    lam = np.asarray(lam, dtype=np.float64)
    return lam**2 * exponent.phi_prime(lam)


def eta2(exponent: LaplaceExponent, lam):
    """Alias of psi, the scale function behind the Green-kernel bound."""
    return psi(exponent, lam)


def check_psi_monotone(
    exponent: LaplaceExponent,
    lam_lo: float = 1e-8,
    lam_hi: float = 1e8,
    n: int = 2000,
    slack: float = 1e-10,
) -> MonotoneReport:
    """Verify that lam^2*phi' and lam^2*phi'/phi^2 are nondecreasing.

    Returns the worst observed relative drop between adjacent grid points;
    ok means no drop beyond rounding slack.
    """
    lam = np.geomspace(lam_lo, lam_hi, n)
    worst = 0.0
    where = float("nan")
    ok = True
    for f in (eta1, eta2):
        v = f(exponent, lam)
        rel = (v[:-1] - v[1:]) / np.abs(v[:-1])
        i = int(np.argmax(rel))
        if rel[i] > worst:
            worst = float(rel[i])
            where = float(lam[i])
        if rel[i] > slack:
            ok = False
    return MonotoneReport(ok=ok, worst_drop=worst, where=where)


def growth_envelope_constant(
    exponent: LaplaceExponent,
    delta: float | None = None,
    eps: float = 0.05,
    lambda0: float = 1.0,
    lam_max: float = 1e8,
    x_max: float = 1e6,
    n_lam: int = 200,
    n_x: int = 200,
) -> float:
    """sup over the grid of phi(lam*x) / (phi(lam) * x^(1-delta+eps)).

    Upper scaling of phi' forces phi itself to grow no faster than
    x^(1-delta+eps) along dilations; the sup is the observed constant.
    """
    if delta is None:
        delta = exponent.default_delta
    lam = np.geomspace(lambda0, lam_max, n_lam)
    x = np.geomspace(1.0, x_max, n_x)
    ratio = exponent.phi(np.outer(lam, x)) / exponent.phi(lam)[:, None]
    return float(np.max(ratio / x[None, :] ** (1.0 - delta + eps)))
