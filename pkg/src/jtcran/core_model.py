"""Shared model parameters, truncation policy and seed derivation.

Units are SI throughout: metres, watts, densities in m^-2.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np
from scipy import stats


class ParameterError(ValueError):
    """Raised when a parameter set violates a model invariant."""


@dataclass(frozen=True)
class NetworkParams:
    lambda_R: float       # RRH density (m^-2)
    lambda_U: float       # user density (m^-2)
    M: int = 1            # antennas per RRH
    alpha: float = 3.0    # path-loss exponent
    r0: float = 1.0       # exclusion radius (m)
    r1: float = 100.0     # cooperation radius (m)
    N0: float = 0.0       # noise power (W)

    @property
    def annulus_area(self) -> float:
        return math.pi * (self.r1 ** 2 - self.r0 ** 2)

    @property
    def mean_rrh_per_set(self) -> float:
        """Mean number of RRHs in a cooperative set."""
        return self.lambda_R * self.annulus_area

    @property
    def mean_users_per_set(self) -> float:
        return self.lambda_U * self.annulus_area

    def with_(self, **changes) -> "NetworkParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)


def validate(params: NetworkParams) -> NetworkParams:
    """Return ``params`` unchanged, or raise on the first violated invariant."""
    p = params
    for f in fields(p):
        v = getattr(p, f.name)
        if not np.isfinite(v):
            raise ParameterError(f"{f.name} must be finite")
    if not p.alpha > 2:
        raise ParameterError("alpha must exceed 2")
    if not p.r0 > 0:
        raise ParameterError("r0 must be positive")
    if not p.r0 < p.r1:
        raise ParameterError("r0 < r1 violated")
    if not p.lambda_R > 0:
        raise ParameterError("lambda_R must be positive")
    if not p.lambda_U > 0:
        raise ParameterError("lambda_U must be positive")
    if int(p.M) != p.M or p.M < 1:
        raise ParameterError("M must be an integer >= 1")
    if p.N0 < 0:
        raise ParameterError("N0 must be non-negative")
    return p


def density_for_mean(mean_nodes: float, r1: float = 100.0, r0: float = 1.0) -> float:
    """Density giving ``mean_nodes`` points on average in the r0..r1 annulus."""
    return mean_nodes / (math.pi * (r1 ** 2 - r0 ** 2))


# Parameter sets from the figure captions.
FIG4_BASE = NetworkParams(lambda_R=density_for_mean(3.0), lambda_U=density_for_mean(3.0),
                          M=1, alpha=3.0, r0=1.0, r1=100.0, N0=0.0)
FIG5 = NetworkParams(lambda_R=1.27e-4, lambda_U=3.18e-5, M=1, alpha=2.01,
                     r0=1.0, r1=100.0, N0=0.0)
FIG6_BASE = NetworkParams(lambda_R=density_for_mean(3.0), lambda_U=density_for_mean(3.0),
                          M=1, alpha=3.0, r0=1.0, r1=100.0, N0=0.0)


@dataclass(frozen=True)
class TruncationPolicy:
    """Truncation of the infinite series and quadrature tolerances.

    ``max_terms`` caps every series index. The per-series length is at least
    ``ceil(mean + sigmas * sqrt(mean))`` and is extended until the Poisson
    tail beyond it is below ``tail_mass_eps`` (small means need this).
    """
    tail_mass_eps: float = 1e-6
    max_terms: int = 200
    quad_rel_tol: float = 1e-6
    t_max_heuristic: float = 1e-10
    sigmas: float = 8.0

    def __post_init__(self):
        if not 0 < self.tail_mass_eps < 1e-3:
            raise ParameterError("tail_mass_eps must lie in (0, 1e-3)")
        if self.max_terms < 1:
            raise ParameterError("max_terms must be >= 1")
        if not self.quad_rel_tol > 0:
            raise ParameterError("quad_rel_tol must be positive")
        if not self.t_max_heuristic > 0:
            raise ParameterError("t_max_heuristic must be positive")

    def n_terms(self, mean: float) -> int:
        """Last index kept for a Poisson series of the given mean."""
        mean = max(mean, 0.0)
        n = math.ceil(mean + self.sigmas * math.sqrt(mean))
        if mean > 0:
            n = max(n, int(stats.poisson.isf(self.tail_mass_eps, mean)))
            while stats.poisson.sf(n, mean) >= self.tail_mass_eps and n < self.max_terms:
                n += 1
        return int(min(max(n, 1), self.max_terms))

    def with_(self, **changes) -> "TruncationPolicy":
        return replace(self, **changes)


DEFAULT_POLICY = TruncationPolicy()


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    realization_index: int = 0

    def __post_init__(self):
        if self.realization_index < 0:
            raise ParameterError("realization_index must be >= 0")

    def stream_seed(self) -> int:
        return stream_seed(self.master_seed, self.realization_index)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.stream_seed())


def stream_seed(master_seed: int, index: int) -> int:
    """64-bit seed depending only on ``(master_seed, index)``."""
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def realization_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(stream_seed(master_seed, index))
