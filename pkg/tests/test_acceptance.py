"""Exit-criteria gate: one PASS/FAIL line per criterion in the terminal summary.

Run with ``pytest -m acceptance -s`` to see each line as it is produced.
"""
import time

import numpy as np
import pytest

from jtcran.charfn import AnalyticOptions
from jtcran.core_model import DEFAULT_POLICY, FIG4_BASE, FIG5, FIG6_BASE, density_for_mean
from jtcran.coverage import coverage_curve, coverage_point, mean_se
from jtcran.experiments import ExperimentSpec, run_experiment
from jtcran.montecarlo import SimMode, empirical_coverage, empirical_set_counts, interference_ratio, simulate_sinr
from jtcran.setstats import annulus_poisson_pmf, cond_rrh_count_pmf, cond_user_count_pmf
from jtcran.validation import (QUANTILES, check_campbell_mean, check_gamma_exact_case, gil_pelaez_errors)

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

THETAS_DB = np.arange(-10.0, 20.0 + 1e-9, 2.5)
M_VALUES = (1, 2, 4)


def test_gil_pelaez_oracle_suite(report):
    t0 = time.perf_counter()
    err = gil_pelaez_errors()
    seconds = time.perf_counter() - t0
    assert err.shape == (5, len(QUANTILES))
    ok = report("1 Gil-Pelaez oracle suite", bool(err.max() <= 1e-4),
                f"max abs CDF error {err.max():.2e} over 25 points (limit 1e-4)", seconds, 10)
    assert ok


def test_gamma_exact_case(report):
    c = check_gamma_exact_case(n_samples=1_000_000, limit=0.01)
    ok = report("2 Gamma fit exact case", c.passed, f"params (1, 1), KS {c.value:.4f} (limit 0.01)", c.seconds, 30)
    assert ok


def _bin_pmf(pmf_at, r_center, half=5.0, order=16):
    """pmf averaged over an r bin, weighted by the area density of a uniform point."""
    x, w = np.polynomial.legendre.leggauss(order)
    r = r_center + half * x
    wr = w * r / np.sum(w * r)
    return wr @ np.array([pmf_at(ri) for ri in r])


def _max_z(counts, side, pmf_for, n_max=4, support=np.arange(0, 40)):
    """Largest |observed - expected| / SE over (n, r, n') cells with expected count >= 5."""
    r1 = FIG5.r1
    worst, cells = 0.0, 0
    for rc in (r1 / 4, r1 / 2, 3 * r1 / 4):
        for n in range(1, n_max + 1):
            obs, total = counts.conditional_hist(side, n, rc - 5, rc + 5, support)
            p = _bin_pmf(lambda r: pmf_for(support, n, r), rc)
            expected = total * p
            use = expected >= 5
            z = (obs - expected)[use] / np.sqrt(expected * (1 - p))[use]
            cells += int(use.sum())
            worst = max(worst, float(np.abs(z).max(initial=0.0)))
    return worst, cells


def test_conditional_set_counts(report):
    t0 = time.perf_counter()
    p = FIG5
    counts = empirical_set_counts(p, 100_000, seed=3)
    user_z, user_cells = _max_z(counts, "user", lambda s, n, r: cond_user_count_pmf(s, n, r, p.lambda_U, p.r1))
    rrh_support = np.arange(1, 40)
    rrh_z, rrh_cells = _max_z(
        counts, "rrh",
        lambda s, n, r: cond_rrh_count_pmf(s, n, r, p.lambda_R, p.r1, overlap="palm", geometry="mixture"),
        support=rrh_support)
    # the default closed-form RRH pmf, reported for comparison only
    lin_z, _ = _max_z(counts, "rrh", lambda s, n, r: cond_rrh_count_pmf(s, n, r, p.lambda_R, p.r1),
                      support=rrh_support)

    sums = []
    for r in (25.0, 50.0, 75.0):
        for n in range(1, 5):
            sums.append(cond_user_count_pmf(np.arange(0, 200), n, r, p.lambda_U, p.r1).sum())
            for kw in ({}, dict(overlap="palm", geometry="mixture")):
                sums.append(cond_rrh_count_pmf(np.arange(1, 200), n, r, p.lambda_R, p.r1, **kw).sum())
    n_keep = DEFAULT_POLICY.n_terms(p.lambda_R * p.annulus_area)
    sums.append(annulus_poisson_pmf(p.lambda_R, p.r0, p.r1, np.arange(n_keep + 1)).sum())
    norm_err = float(np.max(np.abs(np.array(sums) - 1.0)))
    seconds = time.perf_counter() - t0
    print(f"info: default linear-lens RRH pmf max |z| {lin_z:.2f}")
    ok = report("3 conditional set-count pmfs",
                user_z < 3 and rrh_z < 3 and norm_err < 1e-6,
                f"user max |z| {user_z:.2f} ({user_cells} cells), RRH max |z| {rrh_z:.2f} ({rrh_cells} cells), "
                f"normalisation error {norm_err:.1e}", seconds, 300)
    assert ok


def test_coverage_against_simulation(report):
    t0 = time.perf_counter()
    thetas = 10.0 ** (THETAS_DB / 10.0)
    calibrated = AnalyticOptions.calibrated()
    gaps, printed_gaps, emp, ana = [], [], [], []
    for M in M_VALUES:
        params = FIG5.with_(M=M)
        e = empirical_coverage(simulate_sinr(params, SimMode.EXACT, 10_000, seed=7), thetas)
        a = coverage_curve(params, thetas, options=calibrated)
        a_printed = coverage_curve(params, thetas)
        gaps.append(a.max_gap(e))
        printed_gaps.append(a_printed.max_gap(e))
        emp.append(e)
        ana.append(a)
    # a larger array must not lower coverage by more than the sampling noise
    mono_emp = all(np.all(lo.probs <= hi.probs + hi.diagnostics["half_width"]) for lo, hi in zip(emp, emp[1:]))
    mono_ana = all(np.all(lo.probs <= hi.probs + 1e-9) for lo, hi in zip(ana, ana[1:]))
    seconds = time.perf_counter() - t0
    print("info: gaps with the printed Gamma profile " + ", ".join(f"{g:.3f}" for g in printed_gaps))
    ok = report("4 coverage vs exact simulation", max(gaps) <= 0.1 and mono_emp and mono_ana,
                "max gap " + ", ".join(f"M={M}: {g:.3f}" for M, g in zip(M_VALUES, gaps))
                + f" (limit 0.1), monotone in M: simulated {mono_emp}, analytic {mono_ana}", seconds, 900)
    assert ok


def test_interference_ratio_map(report):
    t0 = time.perf_counter()
    nodes = (1.0, 3.0, 5.0)
    ratio = np.empty((3, 3))
    se = np.empty((3, 3))
    for i, nr in enumerate(nodes):
        for j, nu in enumerate(nodes):
            params = FIG4_BASE.with_(lambda_R=density_for_mean(nr), lambda_U=density_for_mean(nu))
            res = interference_ratio(params, 100_000, seed=4)
            ratio[i, j], se[i, j] = res.ratio, res.std_error
    seconds = time.perf_counter() - t0
    up_R = bool(np.all(np.diff(ratio, axis=0) > 0))
    up_U = bool(np.all(np.diff(ratio, axis=1) > 0))
    corner = ratio[-1, -1] > 1
    print("info: ratio rows by RRH density, columns by user density\n"
          + "\n".join("  " + "  ".join(f"{v:7.1f}+-{s:5.1f}" for v, s in zip(rv, sv)) for rv, sv in zip(ratio, se)))
    ok = report("5 interference ratio map", up_R and up_U and corner,
                f"increasing in RRH density {up_R}, in user density {up_U}, "
                f"upper corner {ratio[-1, -1]:.1f} > 1 {corner}", seconds, 600)
    assert ok


def test_mean_se_map(report):
    t0 = time.perf_counter()
    nodes = (1.0, 3.75, 6.5)
    se = np.array([[mean_se(FIG6_BASE.with_(lambda_R=density_for_mean(nr), lambda_U=density_for_mean(nu)))
                    for nu in nodes] for nr in nodes])
    seconds = time.perf_counter() - t0
    up_R = bool(np.all(np.diff(se, axis=0) > 0))
    down_U = bool(np.all(np.diff(se, axis=1) < 0))
    print("info: mean SE rows by RRH density, columns by user density\n"
          + "\n".join("  " + "  ".join(f"{v:.4f}" for v in row) for row in se))
    ok = report("6 mean SE map", up_R and down_U,
                f"increasing in RRH density {up_R}, decreasing in user density {down_U}", seconds, 1200)
    assert ok


def test_campbell_mean(report):
    c = check_campbell_mean(FIG5)
    ok = report("7 out-of-set CF mean vs Campbell", c.passed, f"relative error {c.value:.2e} (limit 0.02)",
                c.seconds, 60)
    assert ok


def _spec(tmp_path, kind, workers, sweep, **kw):
    return ExperimentSpec(kind=kind, params=FIG5, sweep=sweep, output=str(tmp_path / f"{kind}-{workers}"),
                          workers=workers, master_seed=11, **kw)


def test_determinism_across_workers(report, tmp_path):
    t0 = time.perf_counter()
    runs = [
        ("coverage_curve", (("M", (1.0, 2.0)), ("theta_db", (0.0, 10.0))),
         dict(n_realizations=600, chunk=150, analytic=False)),
        ("interference_ratio_map", (("nodes_R", (1.0, 3.0)), ("nodes_U", (2.0,))),
         dict(n_realizations=400, chunk=100)),
    ]
    same = []
    for kind, sweep, kw in runs:
        a = run_experiment(_spec(tmp_path, kind, 1, sweep, **kw))
        b = run_experiment(_spec(tmp_path, kind, 2, sweep, **kw))
        same += [fa.read_bytes() == fb.read_bytes() for fa, fb in zip(a.files, b.files)]
    ok = report("8 determinism across worker counts", all(same), f"{sum(same)}/{len(same)} CSVs byte-identical",
                time.perf_counter() - t0, 600)
    assert ok


def test_truncation_stability(report):
    t0 = time.perf_counter()
    base = DEFAULT_POLICY
    halved = base.with_(tail_mass_eps=base.tail_mass_eps / 2)
    points = [(1.0, FIG5), (10.0, FIG5.with_(M=2)), (0.1, FIG6_BASE)]
    deltas = [abs(coverage_point(p, th, halved).prob - coverage_point(p, th, base).prob) for th, p in points]
    limit = 2 * base.quad_rel_tol
    ok = report("9 truncation stability", max(deltas) < limit,
                "coverage change " + ", ".join(f"{d:.1e}" for d in deltas) + f" (limit {limit:g})",
                time.perf_counter() - t0, 600)
    assert ok
