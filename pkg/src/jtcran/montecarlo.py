"""Monte Carlo SINR engine: the oracle for every analytic approximation.

Each realization draws RRHs (outside the exclusion disk of the origin),
thinned users, and the centric user at the origin, then evaluates the
centric user's SINR under one of three fidelity modes. Every realization
has its own RNG stream derived from ``(master_seed, index)``, so results
do not depend on how realizations are split across workers.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .core_model import NetworkParams, realization_rng, validate
from .gamma_moments import gamma_table
from .geometry import SimWindow, pairwise_distances, sample_ppp, sample_users


class SimMode(enum.Enum):
    EXACT = "exact"                    # full MRT sum with cross terms
    NO_CROSS_TERMS = "no_cross_terms"  # cross terms dropped, exact fading
    GAMMA_APPROX = "gamma_approx"      # per-pair Gamma coefficient

    @classmethod
    def parse(cls, value) -> "SimMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown simulation mode {value!r}") from None


@dataclass(frozen=True)
class SimOptions:
    far_field: bool = True          # add the Campbell mean of users beyond the window
    gamma_source: str = "printed"   # Gamma (k, s) used by GAMMA_APPROX
    workers: int = 1
    chunk: int = 2000               # realizations per work item


@dataclass
class SinrSamples:
    values: np.ndarray
    mode: SimMode
    params: NetworkParams
    n_realizations: int
    window: SimWindow
    P_U: np.ndarray
    P_I1: np.ndarray
    P_I2: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def far_field_mean(params: NetworkParams, mode: SimMode, R: float, gamma_source: str = "printed") -> float:
    """Mean interference from users beyond radius R (Campbell, RRH ~ user distance)."""
    mu_R = params.lambda_R * math.pi * params.r1 ** 2
    if mode is SimMode.GAMMA_APPROX:
        n_max = max(int(mu_R + 12 * math.sqrt(mu_R) + 10), 2)
        k, s = gamma_table(params.M, n_max, gamma_source)
        n = np.arange(1, n_max + 1)
        per_user = float(np.sum(stats.poisson.pmf(n, mu_R) * n * k[1:] * s[1:]))
    else:
        # every served user radiates unit total power, Rayleigh gain of mean 1
        per_user = -math.expm1(-mu_R)
    a = params.alpha
    return 2.0 * math.pi * params.lambda_U * per_user * R ** (2.0 - a) / (a - 2.0)


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    z = rng.standard_normal(tuple(shape) + (2,)) * math.sqrt(0.5)
    return z[..., 0] + 1j * z[..., 1]


def _powers(params: NetworkParams, mode: SimMode, rrhs: np.ndarray, users: np.ndarray,
            rng: np.random.Generator, gamma_ks) -> tuple[float, float, float]:
    """(P_U, P_I1, P_I2) at the origin; ``users`` excludes the centric user."""
    a, M, r1 = params.alpha, params.M, params.r1
    n_rrh = rrhs.shape[0]
    pts = np.vstack((np.zeros((1, 2)), users))
    n_user = pts.shape[0]
    d = pairwise_distances(rrhs, pts)
    ii, jj = np.nonzero(d <= r1)
    if n_rrh == 0 or not np.any(jj == 0):
        return 0.0, 0.0, 0.0
    r_t = d[:, 0]
    pl_t = r_t ** (-a)
    in_set = d[:, 0] <= r1
    pl_pair = d[ii, jj] ** (-a)
    own = jj == 0

    if mode is SimMode.GAMMA_APPROX:
        h_own = _cn(rng, (int(own.sum()), M))
        P_U = float(np.sum(np.abs(h_own) ** 2 * pl_t[ii[own], None]))
        other = ~own
        N_j = np.bincount(jj, minlength=n_user)[jj[other]]
        k, s = gamma_ks
        z = rng.gamma(k[N_j], s[N_j])
        q = z * pl_t[ii[other]]
        inside = in_set[ii[other]]
        return P_U, float(q[inside].sum()), float(q[~inside].sum())

    h_t = _cn(rng, (n_rrh, M))                 # RRH -> centric user
    h_p = _cn(rng, (len(ii), M))               # RRH -> its served users
    h_p[own] = h_t[ii[own]]
    gain = np.sum(np.abs(h_p) ** 2, axis=1) * pl_pair
    norm2 = np.bincount(jj, weights=gain, minlength=n_user)
    P_U = float(norm2[0])
    other = ~own
    io, jo = ii[other], jj[other]
    scale = np.sqrt(pl_pair[other] * pl_t[io] / norm2[jo])
    if mode is SimMode.NO_CROSS_TERMS:
        q = np.sum(np.abs(h_p[other]) ** 2 * np.abs(h_t[io]) ** 2, axis=1) * scale ** 2
        inside = in_set[io]
        return P_U, float(q[inside].sum()), float(q[~inside].sum())

    c = np.sum(np.conj(h_p[other]) * h_t[io], axis=1) * scale
    inside = in_set[io]
    ca = np.where(inside, c, 0.0)
    cb = np.where(inside, 0.0, c)
    A = (np.bincount(jo, weights=ca.real, minlength=n_user)
         + 1j * np.bincount(jo, weights=ca.imag, minlength=n_user))
    B = (np.bincount(jo, weights=cb.real, minlength=n_user)
         + 1j * np.bincount(jo, weights=cb.imag, minlength=n_user))
    P_I1 = float(np.sum(np.abs(A) ** 2 + 2.0 * (A * np.conj(B)).real))
    P_I2 = float(np.sum(np.abs(B) ** 2))
    return P_U, P_I1, P_I2


def _sample_topology(params: NetworkParams, window: SimWindow, rng: np.random.Generator):
    rrhs = sample_ppp(params.lambda_R, window.R_sim + params.r1, rng, r_in=params.r0)
    users = sample_users(params.lambda_U, window, rrhs, params.r0, rng)
    return rrhs, users


def _gamma_ks(params: NetworkParams, gamma_source: str, n_max: int = 400):
    return gamma_table(params.M, n_max, gamma_source)


def _run_chunk(args):
    params, mode, window, seed, start, stop, gamma_source = args
    ks = _gamma_ks(params, gamma_source) if mode is SimMode.GAMMA_APPROX else None
    out = np.empty((stop - start, 4))
    for row, idx in enumerate(range(start, stop)):
        rng = realization_rng(seed, idx)
        rrhs, users = _sample_topology(params, window, rng)
        out[row, :3] = _powers(params, mode, rrhs, users, rng, ks)
        out[row, 3] = np.count_nonzero(np.hypot(*rrhs.T) <= params.r1) if len(rrhs) else 0
    return out


def _run(params, mode, n_realizations, window, seed, options: SimOptions) -> np.ndarray:
    bounds = list(range(0, n_realizations, options.chunk)) + [n_realizations]
    jobs = [(params, mode, window, seed, lo, hi, options.gamma_source)
            for lo, hi in zip(bounds[:-1], bounds[1:])]
    if options.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(options.workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    return np.vstack(parts) if parts else np.empty((0, 4))


def _sinr(P_U, P_I1, P_I2, N0):
    den = P_I1 + P_I2 + N0
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(P_U > 0, P_U / den, 0.0)
    return np.where(np.isnan(v), 0.0, v)


def simulate_sinr(params: NetworkParams, mode=SimMode.EXACT, n_realizations: int = 10_000,
                  window: SimWindow | None = None, seed: int = 0,
                  options: SimOptions = SimOptions()) -> SinrSamples:
    validate(params)
    mode = SimMode.parse(mode)
    window = (window or SimWindow.default(params)).check(params)
    P = _run(params, mode, n_realizations, window, seed, options)
    tail = far_field_mean(params, mode, window.R_sim, options.gamma_source) if options.far_field else 0.0
    P_U, P_I1, P_I2 = P[:, 0], P[:, 1], P[:, 2] + tail
    diag = dict(far_field_mean=tail, empty_serving_set=int(np.sum(P_U == 0)),
                n_serving=P[:, 3].astype(int))
    return SinrSamples(_sinr(P_U, P_I1, P_I2, params.N0), mode, params, n_realizations, window,
                       P_U, P_I1, P_I2, diag)


def simulate_topology(params: NetworkParams, rrhs, users, mode=SimMode.EXACT, n_draws: int = 1,
                      seed: int = 0, options: SimOptions = SimOptions(far_field=False)) -> SinrSamples:
    """Repeat the fading draw on a fixed topology (centric user at the origin)."""
    mode = SimMode.parse(mode)
    rrhs = np.asarray(rrhs, dtype=float).reshape(-1, 2)
    users = np.asarray(users, dtype=float).reshape(-1, 2)
    ks = _gamma_ks(params, options.gamma_source) if mode is SimMode.GAMMA_APPROX else None
    P = np.array([_powers(params, mode, rrhs, users, realization_rng(seed, i), ks)
                  for i in range(n_draws)]).reshape(-1, 3)
    R = max(float(np.max(np.hypot(*users.T), initial=params.r1)), params.r1)
    window = SimWindow(R)
    tail = far_field_mean(params, mode, R, options.gamma_source) if options.far_field else 0.0
    P_U, P_I1, P_I2 = P[:, 0], P[:, 1], P[:, 2] + tail
    return SinrSamples(_sinr(P_U, P_I1, P_I2, params.N0), mode, params, n_draws, window,
                       P_U, P_I1, P_I2, dict(far_field_mean=tail))


def wilson_half_width(p, n: int, z: float = 1.959963984540054):
    p = np.asarray(p, dtype=float)
    return z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)


def empirical_coverage(samples, thetas):
    """Exceedance fractions P[SINR > theta] with Wilson 95% half-widths."""
    from .coverage import CoverageCurve

    thetas = np.asarray(thetas, dtype=float)
    if np.any(np.diff(thetas) < 0):
        raise ValueError("thetas must be sorted ascending")
    values = np.sort(np.asarray(samples.values if isinstance(samples, SinrSamples) else samples, dtype=float))
    n = len(values)
    probs = (n - np.searchsorted(values, thetas, side="right")) / n
    params = samples.params if isinstance(samples, SinrSamples) else None
    return CoverageCurve(thetas, probs, "empirical", params,
                         dict(half_width=wilson_half_width(probs, n), n_samples=n))


@dataclass
class RatioResult:
    ratio: float
    mean_P_I1: float
    mean_P_I2: float
    n_realizations: int
    zero_out_of_set: int     # realizations without any sampled out-of-set interference
    std_error: float = math.nan   # delta-method standard error of the ratio


def interference_ratio(params: NetworkParams, n_realizations: int = 10_000, window: SimWindow | None = None,
                       seed: int = 0, options: SimOptions = SimOptions()) -> RatioResult:
    """mean(P_I1) / mean(P_I2) with Gamma coefficients and no cross terms."""
    s = simulate_sinr(params, SimMode.GAMMA_APPROX, n_realizations, window, seed, options)
    tail = s.diagnostics["far_field_mean"]
    m1, m2 = float(s.P_I1.mean()), float(s.P_I2.mean())
    ratio = m1 / m2 if m2 > 0 else math.inf
    se = math.nan
    if m1 > 0 and m2 > 0 and n_realizations > 1:
        c = np.cov(s.P_I1, s.P_I2)
        rel2 = (c[0, 0] / m1 ** 2 + c[1, 1] / m2 ** 2 - 2 * c[0, 1] / (m1 * m2)) / n_realizations
        se = ratio * math.sqrt(max(rel2, 0.0))
    return RatioResult(ratio, m1, m2, n_realizations, int(np.sum(s.P_I2 - tail <= 0)), se)


def window_bias_probe(params: NetworkParams, mode=SimMode.EXACT, window: SimWindow | None = None,
                      seed: int = 0, n_probe: int = 10, options: SimOptions = SimOptions()) -> dict:
    """Mean interference with R_sim and 2 R_sim on the same seeds."""
    window = window or SimWindow.default(params)
    a = simulate_sinr(params, mode, n_probe, window, seed, options)
    b = simulate_sinr(params, mode, n_probe, window.scaled(2.0), seed, options)
    ia = float(np.mean(a.P_I1 + a.P_I2))
    ib = float(np.mean(b.P_I1 + b.P_I2))
    return dict(R_sim=window.R_sim, interference=ia, interference_doubled=ib,
                relative_bias=(ib - ia) / ib if ib > 0 else 0.0)


@dataclass
class SetCounts:
    """Per-serving-RRH records of the overlap counts around the centric user.

    ``user_records`` rows: (r, n_U, n_U'). ``rrh_records`` rows: (r, n_R, n_R'),
    one randomly chosen co-served user per serving RRH.
    """
    user_records: np.ndarray
    rrh_records: np.ndarray
    n_U: np.ndarray          # per realization
    n_R: np.ndarray          # per realization
    n_realizations: int

    def conditional_hist(self, side: str, n: int, r_lo: float, r_hi: float, support) -> tuple[np.ndarray, int]:
        rec = self.user_records if side == "user" else self.rrh_records
        sel = rec[(rec[:, 0] >= r_lo) & (rec[:, 0] < r_hi) & (rec[:, 1] == n)]
        support = np.asarray(support)
        counts = np.array([(sel[:, 2] == k).sum() for k in support])
        return counts, len(sel)


def _set_counts_chunk(args):
    params, window, seed, start, stop = args
    r0, r1 = params.r0, params.r1
    urec, rrec, nU_all, nR_all = [], [], [], []
    for idx in range(start, stop):
        rng = realization_rng(seed, idx)
        rrhs, users = _sample_topology(params, window, rng)
        du = np.hypot(*users.T) if len(users) else np.empty(0)
        dr = np.hypot(*rrhs.T) if len(rrhs) else np.empty(0)
        n_U = int(np.sum((du >= r0) & (du <= r1)))
        serving = np.flatnonzero(dr <= r1)
        nU_all.append(n_U)
        nR_all.append(len(serving))
        if len(serving) == 0:
            continue
        d_ru = pairwise_distances(rrhs, users) if len(users) else np.empty((len(rrhs), 0))
        for i in serving:
            js = np.flatnonzero(d_ru[i] <= r1)
            urec.append((dr[i], n_U, len(js)))
            if len(js):
                j = js[rng.integers(len(js))]
                rrec.append((dr[i], len(serving), int(np.sum(d_ru[:, j] <= r1))))
    return (np.array(urec).reshape(-1, 3), np.array(rrec).reshape(-1, 3),
            np.array(nU_all, dtype=int), np.array(nR_all, dtype=int))


def empirical_set_counts(params: NetworkParams, n_realizations: int = 100_000, window: SimWindow | None = None,
                         seed: int = 0, options: SimOptions = SimOptions()) -> SetCounts:
    validate(params)
    window = (window or SimWindow(params.r1 + 2 * params.r1)).check(params)
    bounds = list(range(0, n_realizations, options.chunk)) + [n_realizations]
    jobs = [(params, window, seed, lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]
    if options.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(options.workers) as pool:
            parts = list(pool.map(_set_counts_chunk, jobs))
    else:
        parts = [_set_counts_chunk(j) for j in jobs]
    return SetCounts(np.vstack([p[0] for p in parts]), np.vstack([p[1] for p in parts]),
                     np.concatenate([p[2] for p in parts]), np.concatenate([p[3] for p in parts]),
                     n_realizations)
