"""Counting distributions over cooperative sets.

Conditional pmfs describe the overlap between the cooperative set of the
centric user and the disk of one of its serving RRHs (user side), or the
set of a second user served by that RRH (RRH side). Shared and exclusive
regions carry independent Poisson counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .geometry import lens_area_exact, lens_area_linearized


def annulus_mean(density: float, r0: float, r1: float) -> float:
    return density * math.pi * (r1 ** 2 - r0 ** 2)


def annulus_poisson_pmf(density: float, r0: float, r1: float, n):
    return stats.poisson.pmf(n, annulus_mean(density, r0, r1))


def truncated_poisson_pmf(density: float, r0: float, r1: float, m):
    """Poisson pmf conditioned on m >= 1."""
    m_arr = np.asarray(m)
    if np.any(m_arr < 1):
        raise ValueError("truncated support starts at 1")
    mu = annulus_mean(density, r0, r1)
    return stats.poisson.pmf(m_arr, mu) / -math.expm1(-mu)


def _log_pois(k, mean):
    """log Poisson pmf, with mean 0 giving a point mass at k = 0."""
    k = np.asarray(k, dtype=float)
    mean = np.asarray(mean, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = k * np.log(mean) - mean - gammaln(k + 1.0)
    zero = mean == 0
    if np.any(zero):
        out = np.where(zero, np.where(k == 0, 0.0, -np.inf), out)
    return np.where(k < 0, -np.inf, out)


def _conv3(n, n_prime, mean_a, mean_shared, mean_b, k_min: int = 0):
    """sum_k Pois(n-k; a) Pois(k; shared) Pois(n'-k; b) for k_min <= k <= min(n, n').

    ``n``/``n_prime`` broadcast against the means; result has their common shape.
    """
    n = np.asarray(n)
    n_prime = np.asarray(n_prime)
    k_top = int(max(np.max(n), np.max(n_prime), 0))
    ks = np.arange(k_top + 1).reshape((-1,) + (1,) * np.broadcast(n, n_prime, mean_a).ndim)
    logt = (_log_pois(n - ks, mean_a) + _log_pois(ks, mean_shared) + _log_pois(n_prime - ks, mean_b))
    logt = np.where(ks < k_min, -np.inf, logt)
    with np.errstate(under="ignore"):
        return np.exp(logt).sum(axis=0)


def user_region_areas(r, r1: float, lens: str = "linearized"):
    """(exclusive, shared) areas for two disks of radius r1 at distance r."""
    shared = lens_area_linearized(r, r1) if lens == "linearized" else lens_area_exact(r, r1)
    shared = np.clip(shared, 0.0, math.pi * r1 ** 2)
    return math.pi * r1 ** 2 - shared, shared


def cond_user_count_pmf(n_Uprime, n_U, r, lambda_U: float, r1: float, lens: str = "linearized"):
    """p(n_U' | n_U, r): users in the disk of a serving RRH at distance r.

    The shared lens carries mean ``lambda_U * A_shared`` and both exclusive
    parts ``lambda_U * (pi r1^2 - A_shared)``, so that the numerator's
    marginal equals the Poisson denominator.
    """
    excl, shared = user_region_areas(np.asarray(r, dtype=float), r1, lens)
    a, b = lambda_U * excl, lambda_U * shared
    num = _conv3(n_U, n_Uprime, a, b, a)
    den = np.exp(_log_pois(n_U, lambda_U * math.pi * r1 ** 2))
    out = num / den
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class LensCoefficients:
    """Shared-area fraction ``chi + zeta * r`` of the two cooperative sets."""
    chi: float
    zeta: float
    source: str = "derived"

    def fraction(self, r):
        return np.clip(self.chi + self.zeta * np.asarray(r, dtype=float), 0.0, 1.0)


def chi_zeta(r1: float) -> dict[str, LensCoefficients]:
    """Printed and numerically re-derived lens-fraction coefficients.

    The re-derived line passes through the exact lens fraction at centre
    distance ``sqrt(r^2 + r1^2/4)`` for r = 0 and r = r1.
    """
    if r1 <= 0:
        raise ValueError("r1 must be positive")
    area = math.pi * r1 ** 2
    f0 = lens_area_exact(0.5 * r1, r1) / area
    f1 = lens_area_exact(math.sqrt(1.25) * r1, r1) / area
    derived = LensCoefficients(f0, (f1 - f0) / r1, "derived")
    chi_p = 2 * math.acos(math.sqrt(5) / 4) - 1.25 * math.sqrt(4 - 0.25)
    zeta_p = (chi_p - 2 * math.acos(0.25) + 0.25 * math.sqrt(4 - 0.25)) / r1
    printed = LensCoefficients(chi_p, zeta_p, "printed")
    return {"derived": derived, "printed": printed}


# A vanishing shared region makes the k >= 1 conditioning 0/0; this floor
# keeps the limit (k = 1 dominates) well defined.
_TINY_MEAN = 1e-300


def _partner_overlap(r, r1: float, order: int = 24):
    """Exact shared fraction for a partner user uniform in the RRH's disk.

    Returns fractions with a trailing quadrature axis and the matching
    weights (summing to one). The RRH sits at distance r from the origin.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    rho = 0.5 * (x + 1.0) * r1
    w_rho = 0.5 * w * r1 * 2.0 * rho / r1 ** 2          # radial density 2 rho / r1^2
    phi = (x + 1.0) * math.pi
    w_phi = 0.5 * w                                       # uniform angle, weights sum to 1
    RHO, PHI = np.meshgrid(rho, phi, indexing="ij")
    weights = np.outer(w_rho, w_phi).ravel()
    r = np.asarray(r, dtype=float)[..., None]
    d = np.sqrt((r + RHO.ravel() * np.cos(PHI.ravel())) ** 2 + (RHO.ravel() * np.sin(PHI.ravel())) ** 2)
    return lens_area_exact(d, r1) / (math.pi * r1 ** 2), weights


def cond_rrh_count_pmf(n_Rprime, n_R, r, lambda_R: float, r1: float,
                       lens_coeffs: LensCoefficients | None = None, overlap: str = "conditioned",
                       geometry: str = "linear"):
    """p(n_R' | n_R, r): RRHs serving a user that shares the tagged RRH.

    The tagged RRH sits in the shared region, so the shared count k is at
    least 1. ``overlap="conditioned"`` treats the shared count as
    Poisson(lambda_R A_shared) restricted to k >= 1; ``overlap="palm"`` adds
    the tagged RRH to an unrestricted Poisson count (k - 1 ~ Poisson).

    ``geometry="linear"`` uses the shared fraction ``chi + zeta r``;
    ``geometry="mixture"`` averages over the partner user's position with
    exact lens areas (diagnostic option).
    """
    n_Rprime_arr = np.asarray(n_Rprime)
    n_R_arr = np.asarray(n_R)
    if np.any(n_Rprime_arr < 1):
        raise ValueError("user j must have >=1 serving RRH")
    if np.any(n_R_arr < 1):
        raise ValueError("n_R must be >= 1")
    full = math.pi * r1 ** 2
    if geometry == "linear":
        if lens_coeffs is None:
            lens_coeffs = chi_zeta(r1)["derived"]
        frac, weights = lens_coeffs.fraction(r), None
    elif geometry == "mixture":
        frac, weights = _partner_overlap(r, r1)
        n_Rprime_arr = n_Rprime_arr[..., None]
        n_R_arr = n_R_arr[..., None]
    else:
        raise ValueError(f"unknown overlap geometry {geometry!r}")
    shared_area = full * frac
    e = np.maximum(lambda_R * shared_area, _TINY_MEAN)
    a = lambda_R * (full - shared_area)
    if overlap == "conditioned":
        num = _conv3(n_R_arr, n_Rprime_arr, a, e, a, k_min=1)
        ks = np.arange(1, int(np.max(n_R_arr)) + 1).reshape((-1,) + (1,) * np.broadcast(n_R_arr, e).ndim)
        den = np.exp(_log_pois(ks, e) + _log_pois(n_R_arr - ks, a)).sum(axis=0)
    elif overlap == "palm":
        num = _conv3(n_R_arr - 1, n_Rprime_arr - 1, a, e, a)
        den = np.exp(_log_pois(n_R_arr - 1, a + e)) * np.ones_like(num)
    else:
        raise ValueError(f"unknown overlap model {overlap!r}")
    if weights is not None:
        num = num @ weights
        den = den @ weights
    out = num / den
    return out if np.ndim(out) else float(out)
