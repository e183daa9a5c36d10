"""Gamma approximation of the normalised MRT interference coefficient.

The coefficient of an interfering user j with N serving RRHs, once the
serving distances are taken equal, is

    Z = sum_k |h_ijk|^2 |h_ij*k|^2 / sum_{i'} sum_k |h_i'jk|^2,

and is replaced by a Gamma(k_N, s_N) variable. ``gamma_params`` returns the
closed-form (k_N, s_N); ``ratio_moments_oracle`` samples Z directly.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GammaParams:
    k: float  # shape
    s: float  # scale

    def __post_init__(self):
        if not (self.k > 0 and self.s > 0):
            raise ValueError("Gamma shape and scale must be positive")

    @property
    def mean(self) -> float:
        return self.k * self.s

    @property
    def var(self) -> float:
        return self.k * self.s ** 2

    def cf(self, t):
        """E[exp(j t Z)] on the principal branch."""
        return (1.0 - 1j * np.asarray(t) * self.s) ** (-self.k)

    @classmethod
    def from_moments(cls, mean: float, var: float) -> "GammaParams":
        return cls(mean ** 2 / var, var / mean)


def gamma_params(M: int, N: int) -> GammaParams:
    """Moment-matched (shape, scale) for M antennas and N serving RRHs."""
    if M < 1 or N < 1:
        raise ValueError("M and N must be >= 1")
    if N == 1:
        return GammaParams((M * M + 2 * M - 1) / (2 * M), 2 * M / (M * M + 2 * M - 1))
    return GammaParams((M * N - 1) / (3 * M * N * (N - 1)), 3 * (N - 1) / (N * (M * N - 1)))


def sample_ratio(M: int, N: int, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Draws of Z with all fading powers i.i.d. Exp(1)."""
    own = rng.standard_exponential((n_samples, M))        # |h_ijk|^2
    tagged = rng.standard_exponential((n_samples, M))     # |h_ij*k|^2
    others = rng.standard_exponential((n_samples, (N - 1) * M)).sum(axis=1) if N > 1 else 0.0
    return (own * tagged).sum(axis=1) / (own.sum(axis=1) + others)


def ratio_moments_oracle(M: int, N: int, n_samples: int = 10 ** 6, seed=0,
                         block: int = 250_000, return_samples: bool = False):
    """Monte Carlo (mean, variance) of Z, sampled in fixed-size blocks."""
    if n_samples < 10 ** 4:
        raise ValueError("n_samples must be >= 1e4")
    rng = np.random.default_rng(seed)
    chunks = []
    left = n_samples
    while left > 0:
        n = min(block, left)
        chunks.append(sample_ratio(M, N, n, rng))
        left -= n
    z = np.concatenate(chunks)
    out = (float(z.mean()), float(z.var(ddof=1)))
    return (out, z) if return_samples else out


@functools.lru_cache(maxsize=None)
def empirical_gamma_params(M: int, N: int, n_samples: int = 200_000, seed: int = 12345) -> GammaParams:
    """(k, s) matched to the oracle's sample moments instead of the closed form."""
    mean, var = ratio_moments_oracle(M, N, n_samples, seed=(seed, M, N))
    return GammaParams.from_moments(mean, var)


def gamma_table(M: int, n_max: int, source: str = "printed") -> tuple[np.ndarray, np.ndarray]:
    """Arrays ``k[n], s[n]`` for n = 0..n_max (index 0 unused, set to nan)."""
    if source not in ("printed", "empirical"):
        raise ValueError(f"unknown gamma source {source!r}")
    k = np.full(n_max + 1, np.nan)
    s = np.full(n_max + 1, np.nan)
    for n in range(1, n_max + 1):
        g = gamma_params(M, n) if source == "printed" else empirical_gamma_params(M, n)
        k[n], s[n] = g.k, g.s
    return k, s


def moment_report(Ms=range(1, 5), Ns=range(1, 5), n_samples: int = 10 ** 6, seed=0) -> list[dict]:
    """Closed-form Gamma moments next to oracle moments for each (M, N)."""
    rows = []
    for M in Ms:
        for N in Ns:
            g = gamma_params(M, N)
            mean, var = ratio_moments_oracle(M, N, n_samples, seed=(seed, M, N))
            rows.append(dict(M=M, N=N, k=g.k, s=g.s, gamma_mean=g.mean, gamma_var=g.var,
                             oracle_mean=mean, oracle_var=var))
    return rows
