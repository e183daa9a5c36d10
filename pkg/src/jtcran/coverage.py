"""Gil-Pelaez inversion, coverage probability and spectral-efficiency statistics.

Coverage sums the (n_R, n_U) strata of the combined characteristic function
before inverting, so every threshold costs one inversion. The mean of the
out-of-set interference is moved from its CF into the threshold shift,
which removes the fast phase rotation that this mean would otherwise add
to the integrand.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate

from .charfn import AnalyticOptions, get_model
from .core_model import DEFAULT_POLICY, NetworkParams, TruncationPolicy
from .quadrature import QuadratureError, adaptive_gk

_PROBE = 10.0 ** (np.arange(-120, 121) / 4.0)


class CoverageError(QuadratureError):
    pass


@dataclass
class GPResult:
    integral: float           # (1/pi) int_0^inf Im[cf(t) e^(-j t shift)] / t dt
    head: float               # small-t correction included in ``integral``
    t_lo: float
    t_body: float
    t_hi: float
    body_error: float
    tail_error: float
    tail_bound: float         # |cf| at the last point the integral reaches
    n_evals: int


def _as_cf(cf):
    def f(t):
        return np.asarray(cf(np.asarray(t, dtype=float)), dtype=complex)
    return f


def gil_pelaez_integral(cf, threshold_shift: float = 0.0, *, rel_tol: float = 1e-8, abs_tol: float = 1e-11,
                        head_tol: float = 1e-7, decay: float = 1e-10, osc_cycles: float = 200.0,
                        cf0: complex | None = None) -> GPResult:
    """The inversion integral, with ``cf`` evaluated on whole arrays of t."""
    f = _as_cf(cf)
    s = float(threshold_shift)
    vals = f(_PROBE)
    c0 = complex(f(np.zeros(1))[0]) if cf0 is None else complex(cf0)
    near = (np.abs(vals - c0) <= head_tol * max(abs(c0), 1e-300)) & (_PROBE * abs(s) <= head_tol)
    bad = np.flatnonzero(~near)
    i_lo = (bad[0] - 1) if len(bad) else len(_PROBE) - 1
    t_lo = _PROBE[max(i_lo, 0)]
    small = np.abs(vals) <= decay
    big = np.flatnonzero(~small)
    i_hi = min(big[-1] + 1, len(_PROBE) - 1) if len(big) else 0
    t_hi = max(_PROBE[i_hi], t_lo)
    tail_bound = float(np.abs(vals[i_hi]))

    head = float((f(np.array([t_lo]))[0] * np.exp(-1j * t_lo * s)).imag)

    def integrand(x):
        t = np.exp(x)
        return (f(t) * np.exp(-1j * t * s)).imag

    t_body = t_hi
    tail = tail_err = 0.0
    if s != 0 and t_hi * abs(s) > 2 * math.pi * osc_cycles:
        t_body = max(2 * math.pi * osc_cycles / abs(s), t_lo)
    n_evals = len(_PROBE)
    try:
        body, body_err, n = adaptive_gk(integrand, math.log(t_lo), math.log(t_body),
                                        rel_tol=rel_tol, abs_tol=abs_tol)
    except QuadratureError as exc:
        raise QuadratureError("Gil-Pelaez body integral did not converge", exc.residual) from None
    n_evals += n
    if t_body < t_hi:
        w = abs(s)
        sign = 1.0 if s > 0 else -1.0

        def im_part(t):
            return float(f(np.array([t]))[0].imag) / t

        def re_part(t):
            return float(f(np.array([t]))[0].real) / t

        opts = dict(weight=None, full_output=1, limlst=200, limit=200, epsabs=abs_tol)
        c = integrate.quad(im_part, t_body, np.inf, **{**opts, "weight": "cos", "wvar": w})
        sn = integrate.quad(re_part, t_body, np.inf, **{**opts, "weight": "sin", "wvar": w})
        tail = c[0] - sign * sn[0]
        tail_err = c[1] + sn[1]
        n_evals += c[2].get("neval", 0) + sn[2].get("neval", 0)
        if len(c) > 3 or len(sn) > 3:
            if tail_err > max(abs_tol, rel_tol * abs(body + tail)) * 1e3:
                raise QuadratureError("Gil-Pelaez oscillatory tail did not converge", tail_err)
    total = (head + body + tail) / math.pi
    return GPResult(total, head / math.pi, t_lo, t_body, t_hi, body_err / math.pi, tail_err / math.pi,
                    tail_bound, n_evals)


def gil_pelaez(cf, threshold_shift: float = 0.0, **kwargs) -> float:
    """P[X > threshold_shift] for a random variable with CF ``cf``."""
    res = gil_pelaez_integral(cf, threshold_shift, **kwargs)
    return float(min(max(0.5 + res.integral, 0.0), 1.0))


@dataclass
class CoverageCurve:
    thetas: np.ndarray
    probs: np.ndarray
    source: str                       # "analytic" or "empirical"
    params: NetworkParams | None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.thetas = np.asarray(self.thetas, dtype=float)
        self.probs = np.clip(np.asarray(self.probs, dtype=float), 0.0, 1.0)

    def is_monotone(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.diff(self.probs) <= tol))

    def max_gap(self, other: "CoverageCurve") -> float:
        if not np.allclose(self.thetas, other.thetas):
            raise ValueError("curves use different threshold grids")
        return float(np.max(np.abs(self.probs - other.probs)))


@dataclass
class CoveragePoint:
    theta: float
    prob: float
    served_mass: float          # weight of included strata with n_R >= 1
    neglected_mass: float       # strata dropped by the truncation policy
    n_strata: int
    gp: GPResult | None


def coverage_point(params: NetworkParams, theta: float, policy: TruncationPolicy = DEFAULT_POLICY,
                   options: AnalyticOptions = AnalyticOptions()) -> CoveragePoint:
    if theta < 0:
        raise ValueError("theta must be non-negative")
    model = get_model(params, policy, options)
    strata = model.strata()
    nR, nU, w, neglected = strata
    served = float(w[nR >= 1].sum())
    if theta == 0:
        return CoveragePoint(0.0, served, served, neglected, len(w), None)
    shift = theta * (params.N0 + model.mean_PI2())

    def cf(t):
        return model.strata_cf(t, theta, strata) * model.phi_PI2(-theta * t, centered=True)

    try:
        res = gil_pelaez_integral(cf, shift, rel_tol=policy.quad_rel_tol * 1e-2,
                                  abs_tol=policy.quad_rel_tol * 1e-3, decay=policy.t_max_heuristic,
                                  cf0=served)
    except QuadratureError as exc:
        raise CoverageError(f"coverage failed at theta={theta:g} over strata n_R<={int(nR.max())}, "
                            f"n_U<={int(nU.max())}", exc.residual) from None
    prob = float(min(max(0.5 * served + res.integral, 0.0), 1.0))
    return CoveragePoint(theta, prob, served, neglected, len(w), res)


def coverage_probability(params: NetworkParams, theta: float, policy: TruncationPolicy = DEFAULT_POLICY,
                         options: AnalyticOptions = AnalyticOptions()) -> float:
    return coverage_point(params, theta, policy, options).prob


def coverage_curve(params: NetworkParams, thetas, policy: TruncationPolicy = DEFAULT_POLICY,
                   options: AnalyticOptions = AnalyticOptions()) -> CoverageCurve:
    pts = [coverage_point(params, float(th), policy, options) for th in thetas]
    probs = np.array([p.prob for p in pts])
    # monotone by construction up to quadrature error; enforce after clamping
    probs = np.minimum.accumulate(probs)
    diag = dict(neglected_mass=max(p.neglected_mass for p in pts),
                body_error=max((p.gp.body_error for p in pts if p.gp), default=0.0),
                tail_error=max((p.gp.tail_error for p in pts if p.gp), default=0.0),
                tail_bound=max((p.gp.tail_bound for p in pts if p.gp), default=0.0),
                raw_probs=np.array([p.prob for p in pts]))
    return CoverageCurve(np.asarray(thetas, dtype=float), probs, "analytic", params, diag)


def se_cdf(params: NetworkParams, se_threshold: float, policy: TruncationPolicy = DEFAULT_POLICY,
           options: AnalyticOptions = AnalyticOptions()) -> float:
    if se_threshold < 0:
        raise ValueError("se_threshold must be non-negative")
    return 1.0 - coverage_probability(params, 2.0 ** se_threshold - 1.0, policy, options)


@dataclass
class MeanSE:
    value: float
    tail: float            # extrapolated contribution beyond the last grid point
    s_max: float
    n_points: int


def mean_se(params: NetworkParams, policy: TruncationPolicy = DEFAULT_POLICY,
            options: AnalyticOptions = AnalyticOptions(), panel: float = 1.0, order: int = 4,
            stop_prob: float = 1e-3, max_bits: float = 40.0, detail: bool = False):
    """int_0^inf P[SE > s] ds: Gauss-Legendre panels, then an exponential tail."""
    xg, wg = leggauss(order)
    total = 0.0
    lo = 0.0
    n = 0
    prev_end = coverage_probability(params, 0.0, policy, options)
    c_end = prev_end
    while lo < max_bits:
        hi = lo + panel
        nodes = 0.5 * (hi + lo) + 0.5 * panel * xg
        vals = np.array([coverage_probability(params, 2.0 ** s - 1.0, policy, options) for s in nodes])
        total += 0.5 * panel * float(vals @ wg)
        c_end = coverage_probability(params, 2.0 ** hi - 1.0, policy, options)
        n += order + 1
        lo = hi
        if c_end < stop_prob:
            break
        prev_end = c_end
    tail = 0.0
    if c_end > 0 and prev_end > c_end:
        rate = math.log(prev_end / c_end) / panel
        tail = c_end / rate
    out = MeanSE(total + tail, tail, lo, n)
    return out if detail else out.value
