"""Characteristic functions of the useful power and of both interference terms.

Notation used in code:

* ``phi_S``      one serving RRH's useful power, Gamma(M, r^-alpha)
* ``phi_V``      one interferer's Gamma term through a serving RRH
* ``phi_T``      all interferers sharing one serving RRH of the centric user
* ``phi_PUprime`` P_U - theta * P_I1 for given set sizes (n_R, n_U)
* ``phi_PI2``    interference from RRHs outside the cooperative set (PGFL)

``AnalyticModel`` precomputes every pmf table on the radial quadrature grid
and a cumulative table for the out-of-set exponent, so that coverage can
evaluate the combined CF on thousands of t values at once.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, stats
from scipy.special import gammaln

from .core_model import DEFAULT_POLICY, NetworkParams, TruncationPolicy, validate
from .gamma_moments import gamma_table
from .quadrature import composite_gauss_legendre
from .setstats import (annulus_mean, chi_zeta, cond_rrh_count_pmf, cond_user_count_pmf,
                       truncated_poisson_pmf, user_region_areas)


def gamma_cf(x, k):
    """(1 - j x)^(-k) on the principal branch, for real x and k > 0."""
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * k * np.log1p(x * x) + 1j * k * np.arctan(x))


def one_minus_gamma_cf(x, k):
    """1 - (1 - j x)^(-k) without cancellation for small x."""
    x = np.asarray(x, dtype=float)
    a = -0.5 * k * np.log1p(x * x)
    b = k * np.arctan(x)
    em1 = np.expm1(a) * np.cos(b) - 2.0 * np.sin(0.5 * b) ** 2 + 1j * np.exp(a) * np.sin(b)
    return -em1


def phi_S(t, r, M: int, alpha: float):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    return gamma_cf(np.asarray(t) * r ** (-alpha), M)


def phi_V(t, r, n_Rprime: int, alpha: float, M: int, gamma_source: str = "printed"):
    if n_Rprime < 1:
        raise ValueError("n_Rprime must be >= 1")
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    k, s = gamma_table(M, n_Rprime, gamma_source)
    return gamma_cf(np.asarray(t) * r ** (-alpha) * s[n_Rprime], k[n_Rprime])


@dataclass(frozen=True)
class AnalyticOptions:
    gamma_source: str = "printed"        # Gamma (k, s): "printed" or "empirical"
    lens_coeffs: str = "derived"         # RRH-side lens line: "derived" or "printed"
    rrh_overlap: str = "conditioned"     # "conditioned" (shared count >= 1) or "palm"
    user_lens: str = "linearized"        # "linearized" or "exact"
    # serving-set size of an out-of-set interferer: "truncated" Poisson or the
    # "size_biased" law 1 + Poisson seen from one of its serving RRHs
    interferer_sets: str = "truncated"
    radial_panels: int = 4
    radial_order: int = 12

    def with_(self, **changes) -> "AnalyticOptions":
        return replace(self, **changes)

    @classmethod
    def calibrated(cls) -> "AnalyticOptions":
        """Sampled Gamma coefficients and size-biased interferer sets."""
        return cls(gamma_source="empirical", interferer_sets="size_biased")


def _raw_to_cumulants(m):
    m1, m2, m3, m4 = m
    return np.array([m1, m2 - m1 ** 2, m3 - 3 * m2 * m1 + 2 * m1 ** 3,
                     m4 - 4 * m3 * m1 - 3 * m2 ** 2 + 12 * m2 * m1 ** 2 - 6 * m1 ** 4])


def _cumulants_to_raw(K):
    K1, K2, K3, K4 = K
    return np.array([K1, K2 + K1 ** 2, K3 + 3 * K2 * K1 + K1 ** 3,
                     K4 + 4 * K3 * K1 + 3 * K2 ** 2 + 6 * K2 * K1 ** 2 + K1 ** 4])


class AnalyticModel:
    """Cached tables for one (params, policy, options) triple."""

    def __init__(self, params: NetworkParams, policy: TruncationPolicy = DEFAULT_POLICY,
                 options: AnalyticOptions = AnalyticOptions()):
        self.params = validate(params)
        self.policy = policy
        self.options = options
        p = params
        self.mu_R = annulus_mean(p.lambda_R, p.r0, p.r1)
        self.mu_U = annulus_mean(p.lambda_U, p.r0, p.r1)
        self.nR_max = policy.n_terms(self.mu_R)
        self.nU_max = policy.n_terms(self.mu_U)
        self.pR = stats.poisson.pmf(np.arange(self.nR_max + 1), self.mu_R)
        self.pU = stats.poisson.pmf(np.arange(self.nU_max + 1), self.mu_U)
        # n_R' = shared + exclusive count, the exclusive part has mean <= lambda_R pi r1^2
        self.m_max = min(self.nR_max + policy.n_terms(p.lambda_R * math.pi * p.r1 ** 2), policy.max_terms)
        self.nUp_max = min(self.nU_max + policy.n_terms(p.lambda_U * math.pi * p.r1 ** 2), policy.max_terms)
        self.k_tab, self.s_tab = gamma_table(p.M, self.m_max, options.gamma_source)
        self.lens = chi_zeta(p.r1)[options.lens_coeffs]
        self._build_radial()
        self._out = _OutOfSetExponent(self)

    # ------------------------------------------------------------------ pmfs
    def rrh_pmf(self, r) -> np.ndarray:
        """p(n_R' | n_R, r) as an array ``[..., n_R - 1, n_R' - 1]``."""
        r = np.asarray(r, dtype=float)
        nR = np.arange(1, self.nR_max + 1)
        m = np.arange(1, self.m_max + 1)
        return cond_rrh_count_pmf(m[None, :], nR[:, None], r[..., None, None], self.params.lambda_R,
                                  self.params.r1, self.lens, self.options.rrh_overlap)

    def user_split(self, r):
        """(mean of the exclusive region, shared fraction) of the user-side overlap."""
        p = self.params
        excl, shared = user_region_areas(np.asarray(r, dtype=float), p.r1, self.options.user_lens)
        return p.lambda_U * excl, shared / (math.pi * p.r1 ** 2)

    def user_pmf(self, r, n_U: int) -> np.ndarray:
        """p(n_U' | n_U, r) for n_U' = 0..nUp_max."""
        p = self.params
        n_up = np.arange(self.nUp_max + 1)
        return cond_user_count_pmf(n_up, n_U, np.asarray(r, dtype=float)[..., None], p.lambda_U, p.r1,
                                   self.options.user_lens)

    # ---------------------------------------------------------------- radial
    def _build_radial(self):
        p = self.params
        v, w = composite_gauss_legendre(math.log(p.r0), math.log(p.r1),
                                        self.options.radial_panels, self.options.radial_order)
        self.r_nodes = np.exp(v)
        # density 2r/(r1^2 - r0^2) dr = 2 r^2/(r1^2 - r0^2) d(ln r)
        self.r_weights = w * 2.0 * self.r_nodes ** 2 / (p.r1 ** 2 - p.r0 ** 2)
        self.pl_nodes = self.r_nodes ** (-p.alpha)
        self.PR_nodes = self.rrh_pmf(self.r_nodes)                  # (Nr, nR_max, m_max)
        self.user_excl_nodes, self.user_frac_nodes = self.user_split(self.r_nodes)

    # ------------------------------------------------------------ inner CFs
    def _psi_nodes(self, tau) -> np.ndarray:
        """Mixture over n_R' of phi_V at the radial nodes: (Nr, Nt, nR_max)."""
        x = tau[None, :, None] * self.pl_nodes[:, None, None] * self.s_tab[None, None, 1:]
        V = gamma_cf(x, self.k_tab[None, None, 1:])                  # (Nr, Nt, m)
        return np.matmul(V, np.swapaxes(self.PR_nodes, 1, 2))        # (Nr, Nt, nR)

    def phi_T(self, t, r, n_R: int, n_U: int, form: str = "closed"):
        """phi_T(t | r, n_R, n_U) at arbitrary radii.

        ``form="series"`` sums the truncated mixture over n_U' directly;
        ``form="closed"`` uses its generating function: given n_U users in
        the centric disk, the shared count is Binomial(n_U, fraction) and the
        exclusive count Poisson, so the series collapses to
        exp(a (psi - 1)) (1 - f + f psi)^n_U.
        """
        if not 1 <= n_R <= self.nR_max:
            raise ValueError("n_R outside the truncated support")
        if n_U < 0:
            raise ValueError("n_U must be >= 0")
        t = np.atleast_1d(np.asarray(t, dtype=float))
        r = np.atleast_1d(np.asarray(r, dtype=float))
        pl = r ** (-self.params.alpha)
        PR = self.rrh_pmf(r)[:, n_R - 1, :]                             # (Nr, m)
        x = t[None, :, None] * pl[:, None, None] * self.s_tab[None, None, 1:]
        psi = np.einsum("rtm,rm->rt", gamma_cf(x, self.k_tab[None, None, 1:]), PR)
        if form == "closed":
            a, f = self.user_split(r)
            out = np.exp(a[:, None] * (psi - 1.0)) * (1.0 - f[:, None] + f[:, None] * psi) ** n_U
        elif form == "series":
            PU = self.user_pmf(r, n_U)                                   # (Nr, n')
            powers = psi[:, :, None] ** np.arange(self.nUp_max + 1)[None, None, :]
            out = np.einsum("rtn,rn->rt", powers, PU)
        else:
            raise ValueError(f"unknown form {form!r}")
        return out.T                                                      # (Nt, Nr)

    def radial_average(self, t, theta: float, nR_top: int | None = None, nU_top: int | None = None):
        """A[t, n_R - 1, n_U] = E_r[phi_S(t|r) phi_T(-theta t|r, n_R, n_U)]."""
        nR_top = self.nR_max if nR_top is None else nR_top
        nU_top = self.nU_max if nU_top is None else nU_top
        t = np.asarray(t, dtype=float)
        S = gamma_cf(t[None, :] * self.pl_nodes[:, None], self.params.M)      # (Nr, Nt)
        psi = self._psi_nodes(-theta * t)[:, :, :nR_top]                       # (Nr, Nt, nR)
        base = (np.exp(self.user_excl_nodes[:, None, None] * (psi - 1.0))
                * (S * self.r_weights[:, None])[:, :, None])
        f = self.user_frac_nodes[:, None, None]
        binom = 1.0 - f + f * psi
        out = np.empty((len(t), nR_top, nU_top + 1), dtype=complex)
        term = base
        for n_U in range(nU_top + 1):
            out[:, :, n_U] = term.sum(axis=0)
            term = term * binom
        return out

    def phi_PUprime(self, t, theta: float, n_R: int, n_U: int):
        if n_R == 0:
            return np.ones(np.shape(t), dtype=complex)
        A = self.radial_average(np.atleast_1d(t), theta, n_R, max(n_U, 0))[:, n_R - 1, n_U]
        return (A ** n_R).reshape(np.shape(t))

    # ----------------------------------------------------------- out of set
    def phi_PI2(self, t, centered: bool = False, method: str = "table"):
        t = np.asarray(t, dtype=float)
        if method == "table":
            return self._out.phi(t, centered)
        if method == "adaptive":
            vals = np.array([self._out.phi_adaptive(tt) for tt in np.ravel(t)]).reshape(t.shape)
            return vals * np.exp(-1j * t * self.mean_PI2()) if centered else vals
        raise ValueError(f"unknown method {method!r}")

    def mean_PI2(self) -> float:
        return self._out.mean

    # --------------------------------------------------------------- strata
    def strata(self):
        """(n_R, n_U, weight) by decreasing weight until the remainder is below eps."""
        w = self.pR[:, None] * self.pU[None, :]
        order = np.argsort(-w, axis=None, kind="stable")
        nR_idx, nU_idx = np.unravel_index(order, w.shape)
        ws = w.ravel()[order]
        cum = np.cumsum(ws)
        eps = self.policy.tail_mass_eps
        n_keep = int(np.searchsorted(cum, 1.0 - eps, side="left")) + 1
        n_keep = min(n_keep, len(ws))
        neglected = max(1.0 - cum[n_keep - 1], 0.0)
        return nR_idx[:n_keep], nU_idx[:n_keep], ws[:n_keep], neglected

    def strata_cf(self, t, theta: float, strata=None):
        """sum over strata with n_R >= 1 of w * phi_PUprime(t | n_R, n_U)."""
        nR, nU, w, _ = strata if strata is not None else self.strata()
        use = nR >= 1
        nR, nU, w = nR[use], nU[use], w[use]
        A = self.radial_average(t, theta, int(nR.max()), int(nU.max()))
        vals = A[:, nR - 1, nU] ** nR[None, :]
        return vals @ w


class _OutOfSetExponent:
    """log phi_PI2(t) = -(2 pi lambda_R / alpha) t^(2/alpha) G(t r1^-alpha).

    G(x) = int_0^x g(s) s^(-2/alpha - 1) ds with g(s) = sum_n p(n)(1 - psi(s)^n)
    and psi the truncated-Poisson mixture of Gamma CFs. G is tabulated
    cumulatively on a log grid; below ``x_small`` a moment series is used.
    """

    GRID_STEP = 0.1
    GL_ORDER = 10

    def __init__(self, model: AnalyticModel):
        p = model.params
        pol = model.policy
        self.alpha = p.alpha
        self.beta = 2.0 / p.alpha
        self.lam = p.lambda_R
        self.u1 = p.r1 ** (-p.alpha)
        m_top = pol.n_terms(model.mu_R)
        m = np.arange(1, m_top + 1)
        if model.options.interferer_sets == "truncated":
            pm = truncated_poisson_pmf(p.lambda_R, p.r0, p.r1, m)
        elif model.options.interferer_sets == "size_biased":
            pm = stats.poisson.pmf(m - 1, model.mu_R)
        else:
            raise ValueError(f"unknown interferer set law {model.options.interferer_sets!r}")
        self.pm = pm / pm.sum()
        k, s = gamma_table(p.M, m_top, model.options.gamma_source)
        self.km, self.sm = k[1:], s[1:]
        self.pn = model.pU.copy()
        self.pn[0] = 0.0                       # n = 0 contributes nothing
        # raw moments of the per-pair coefficient and of the per-RRH sum
        raw = np.array([np.sum(self.pm * self.sm ** q * np.exp(gammaln(self.km + q) - gammaln(self.km)))
                        for q in range(1, 5)])
        K = _raw_to_cumulants(raw)
        raw_sums = np.array([_cumulants_to_raw(i * K) for i in range(len(self.pn))])
        self.mu = self.pn @ raw_sums           # E over n of the raw moments of the n-term sum
        self.mean = 2.0 * math.pi * self.lam * self.mu[0] * p.r1 ** (2.0 - p.alpha) / (p.alpha - 2.0)
        scale = max(float(np.max(self.sm)), 1.0) * max(len(self.pn), 1)
        self.x_small = 1e-3 / scale
        self._grid(math.log(self.x_small), math.log(1e12))

    def g(self, s):
        # 1 - psi^n = (1 - psi) * sum_{i<n} psi^i avoids cancellation near s = 0
        s = np.asarray(s, dtype=float)
        x = s[..., None] * self.sm
        d = one_minus_gamma_cf(x, self.km) @ self.pm
        psi = 1.0 - d
        acc = np.zeros(s.shape, dtype=complex)
        geo = np.zeros(s.shape, dtype=complex)
        power = np.ones(s.shape, dtype=complex)
        for pn in self.pn[1:]:
            geo = geo + power
            power = power * psi
            acc += pn * geo
        return d * acc

    def _series(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for q in range(1, 5):
            out -= (1j ** q) * self.mu[q - 1] / math.factorial(q) * x ** (q - self.beta) / (q - self.beta)
        return out

    def _gl_piece(self, v_lo, v_hi):
        """int_{v_lo}^{v_hi} g(e^v) e^(-beta v) dv, elementwise."""
        xg, wg = np.polynomial.legendre.leggauss(self.GL_ORDER)
        half = 0.5 * (v_hi - v_lo)
        v = (0.5 * (v_hi + v_lo))[..., None] + half[..., None] * xg
        return half * ((self.g(np.exp(v)) * np.exp(-self.beta * v)) @ wg)

    def _grid(self, v0, v1):
        n = int(math.ceil((v1 - v0) / self.GRID_STEP))
        self.v = v0 + self.GRID_STEP * np.arange(n + 1)
        pieces = self._gl_piece(self.v[:-1], self.v[1:])
        self.G = self._series(math.exp(v0)) + np.concatenate(([0.0], np.cumsum(pieces)))
        self.g_top = self.g(np.exp(self.v[-1]))

    def G_of(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape, dtype=complex)
        small = x <= self.x_small
        out[small] = self._series(x[small])
        big = x >= math.exp(self.v[-1])
        xt = x[big]
        x_top = math.exp(self.v[-1])
        out[big] = self.G[-1] + self.g_top * (x_top ** -self.beta - xt ** -self.beta) / self.beta
        mid = ~(small | big)
        if np.any(mid):
            lv = np.log(x[mid])
            i = np.minimum(((lv - self.v[0]) / self.GRID_STEP).astype(int), len(self.v) - 2)
            out[mid] = self.G[i] + self._gl_piece(self.v[i], lv)
        return out

    def log_phi(self, t):
        t = np.asarray(t, dtype=float)
        a = np.abs(t)
        val = -(2.0 * math.pi * self.lam / self.alpha) * a ** self.beta * self.G_of(a * self.u1)
        return np.where(t < 0, np.conj(val), val)

    def phi(self, t, centered: bool = False):
        lp = self.log_phi(t)
        if centered:
            lp = lp - 1j * np.asarray(t) * self.mean
        return np.exp(lp)

    def phi_adaptive(self, t: float) -> complex:
        """Reference route: QUADPACK algebraic-weight rule in u = r^-alpha."""
        if t == 0:
            return 1.0 + 0j
        a = abs(t)
        mu1 = self.mu[0]

        def h(u, part):
            u = float(u)
            if u == 0.0:
                val = -1j * a * mu1
            else:
                val = complex(self.g(np.array(a * u))) / u
            return val.real if part == 0 else val.imag

        opts = dict(weight="alg", wvar=(-self.beta, 0.0), epsabs=0.0, epsrel=1e-10, limit=500)
        re = integrate.quad(h, 0.0, self.u1, args=(0,), **opts)[0]
        im = integrate.quad(h, 0.0, self.u1, args=(1,), **opts)[0]
        val = np.exp(-2.0 * math.pi * self.lam / self.alpha * (re + 1j * im))
        return complex(np.conj(val) if t < 0 else val)


@functools.lru_cache(maxsize=32)
def get_model(params: NetworkParams, policy: TruncationPolicy = DEFAULT_POLICY,
              options: AnalyticOptions = AnalyticOptions()) -> AnalyticModel:
    return AnalyticModel(params, policy, options)


def phi_T(t, r, n_R: int, n_U: int, params: NetworkParams, policy: TruncationPolicy = DEFAULT_POLICY,
          options: AnalyticOptions = AnalyticOptions(), form: str = "series"):
    p = params
    if np.any(np.asarray(r) < p.r0) or np.any(np.asarray(r) > p.r1):
        raise ValueError("r must lie in [r0, r1]")
    out = get_model(params, policy, options).phi_T(t, r, n_R, n_U, form)
    if np.ndim(r) == 0:
        out = out[:, 0]
    return out[0] if np.ndim(t) == 0 else out


def phi_PUprime(t, theta: float, n_R: int, n_U: int, params: NetworkParams,
                policy: TruncationPolicy = DEFAULT_POLICY, options: AnalyticOptions = AnalyticOptions()):
    return get_model(params, policy, options).phi_PUprime(t, theta, n_R, n_U)


def phi_PI2(t, params: NetworkParams, policy: TruncationPolicy = DEFAULT_POLICY,
            options: AnalyticOptions = AnalyticOptions(), method: str = "table"):
    return get_model(params, policy, options).phi_PI2(t, method=method)


def campbell_mean_PI2(params: NetworkParams, policy: TruncationPolicy = DEFAULT_POLICY,
                      gamma_source: str = "printed", interferer_sets: str = "truncated") -> float:
    """Campbell mean of the out-of-set interference, coded from scratch."""
    p = params
    mu_R = p.lambda_R * p.annulus_area
    mu_U = p.lambda_U * p.annulus_area
    m = np.arange(1, policy.n_terms(mu_R) + 1)
    if interferer_sets == "truncated":
        pm = stats.poisson.pmf(m, mu_R)
    elif interferer_sets == "size_biased":
        pm = stats.poisson.pmf(m - 1, mu_R)
    else:
        raise ValueError(f"unknown interferer set law {interferer_sets!r}")
    pm = pm / pm.sum()
    k, s = gamma_table(p.M, int(m[-1]), gamma_source)
    mean_Z = float(np.sum(pm * k[1:] * s[1:]))
    radial = p.r1 ** (2.0 - p.alpha) / (p.alpha - 2.0)   # int_{r1}^inf r^(1-alpha) dr
    return 2.0 * math.pi * p.lambda_R * mu_U * mean_Z * radial
