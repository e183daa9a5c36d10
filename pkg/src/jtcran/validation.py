"""Closed-form oracle checks shared by the ``validate`` command and the tests."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .charfn import AnalyticOptions, campbell_mean_PI2, gamma_cf, get_model
from .core_model import FIG5, DEFAULT_POLICY
from .coverage import gil_pelaez
from .gamma_moments import gamma_params, ratio_moments_oracle

QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass
class Check:
    name: str
    passed: bool
    value: float          # the measured error or statistic
    limit: float
    seconds: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: {self.value:.3g} (limit {self.limit:g}, {self.seconds:.1f}s)"


def _shifted_gamma_sum_cdf(x, k1=1.5, k2=2.5, shift=1.0):
    # Gamma(k1) + Gamma(k2) with unit scale is Gamma(k1 + k2)
    return stats.gamma(k1 + k2).cdf(x - shift)


def gil_pelaez_oracles():
    """(name, cf, exact CDF, quantile function) for five closed-form laws."""
    sum_law = stats.gamma(4.0, loc=1.0)
    return [
        ("exponential(1)", lambda t: gamma_cf(t, 1.0), stats.expon.cdf, stats.expon.ppf),
        ("gamma(2, 1)", lambda t: gamma_cf(t, 2.0), stats.gamma(2.0).cdf, stats.gamma(2.0).ppf),
        ("gamma(0.5, 2)", lambda t: gamma_cf(2.0 * t, 0.5), stats.gamma(0.5, scale=2.0).cdf,
         stats.gamma(0.5, scale=2.0).ppf),
        ("normal(1, 2^2)", lambda t: np.exp(1j * t - 2.0 * t * t), stats.norm(1.0, 2.0).cdf,
         stats.norm(1.0, 2.0).ppf),
        ("1 + gamma(1.5) + gamma(2.5)",
         lambda t: np.exp(1j * t) * gamma_cf(t, 1.5) * gamma_cf(t, 2.5), _shifted_gamma_sum_cdf, sum_law.ppf),
    ]


def gil_pelaez_errors() -> np.ndarray:
    """Absolute CDF errors, one row per law and one column per quantile."""
    out = np.empty((5, len(QUANTILES)))
    for i, (_, cf, cdf, ppf) in enumerate(gil_pelaez_oracles()):
        for j, q in enumerate(QUANTILES):
            x = float(ppf(q))
            out[i, j] = abs((1.0 - gil_pelaez(cf, x)) - cdf(x))
    return out


def check_gil_pelaez(limit: float = 1e-4) -> Check:
    t0 = time.perf_counter()
    err = float(gil_pelaez_errors().max())
    return Check("Gil-Pelaez closed-form suite", err <= limit, err, limit, time.perf_counter() - t0)


def check_gamma_exact_case(n_samples: int = 1_000_000, limit: float = 0.01, seed: int = 2) -> Check:
    t0 = time.perf_counter()
    g = gamma_params(1, 1)
    _, z = ratio_moments_oracle(1, 1, n_samples, seed, return_samples=True)
    ks = stats.kstest(z, stats.gamma(1.0).cdf).statistic
    ok = (g.k, g.s) == (1.0, 1.0) and ks < limit
    return Check("Gamma fit, single antenna and single RRH", ok, float(ks), limit, time.perf_counter() - t0)


def check_campbell_mean(params=FIG5, options: AnalyticOptions = AnalyticOptions(), limit: float = 0.02) -> Check:
    t0 = time.perf_counter()
    ref = campbell_mean_PI2(params, DEFAULT_POLICY, options.gamma_source, options.interferer_sets)
    model = get_model(params, DEFAULT_POLICY, options)
    h = 1e-3 / ref
    fd = (model.phi_PI2(np.array([h]))[0] - model.phi_PI2(np.array([-h]))[0]) / (2 * h)
    rel = abs((-1j * fd).real / ref - 1.0)
    return Check("out-of-set CF mean vs Campbell", rel <= limit, rel, limit, time.perf_counter() - t0)


def check_theta_zero_limit(params=FIG5, limit: float = 1e-5) -> Check:
    from .coverage import coverage_probability

    t0 = time.perf_counter()
    exact = -math.expm1(-params.lambda_R * params.annulus_area)
    err = abs(coverage_probability(params, 1e-9) - exact)
    return Check("coverage at vanishing threshold", err <= limit, err, limit, time.perf_counter() - t0)


def run_all() -> list[Check]:
    return [check_gil_pelaez(), check_gamma_exact_case(), check_campbell_mean(), check_theta_zero_limit()]
