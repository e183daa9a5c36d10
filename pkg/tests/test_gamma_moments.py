import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from jtcran.gamma_moments import (GammaParams, empirical_gamma_params, gamma_params, gamma_table,
                                  moment_report, ratio_moments_oracle)


def test_printed_examples():
    g = gamma_params(1, 1)
    assert (g.k, g.s) == (1.0, 1.0)
    g = gamma_params(2, 1)
    assert g.k == pytest.approx(7 / 4) and g.s == pytest.approx(4 / 7)
    g = gamma_params(1, 2)
    assert g.k == pytest.approx(1 / 6) and g.s == pytest.approx(3 / 2)


@given(st.integers(1, 8), st.integers(2, 40))
def test_printed_mean_closed_form(M, N):
    assert gamma_params(M, N).mean == pytest.approx(1 / (M * N ** 2))


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        gamma_params(0, 1)
    with pytest.raises(ValueError):
        gamma_params(1, 0)
    with pytest.raises(ValueError):
        GammaParams(0.0, 1.0)
    with pytest.raises(ValueError):
        ratio_moments_oracle(1, 1, n_samples=100)


def test_cf_at_zero_and_from_moments():
    g = GammaParams(2.5, 0.3)
    assert g.cf(0.0) == 1.0
    h = GammaParams.from_moments(g.mean, g.var)
    assert h.k == pytest.approx(2.5) and h.s == pytest.approx(0.3)


def test_oracle_single_rrh_single_antenna_is_exponential():
    (mean, var), z = ratio_moments_oracle(1, 1, 10 ** 6, seed=1, return_samples=True)
    assert 0.99 <= mean <= 1.01
    assert 0.97 <= var <= 1.03
    assert stats.kstest(z, "expon").statistic < 0.01


def test_oracle_repeatable_within_two_percent():
    a = ratio_moments_oracle(4, 1, 10 ** 6, seed=2)[0]
    b = ratio_moments_oracle(4, 1, 10 ** 6, seed=3)[0]
    assert abs(a - b) / b < 0.02


def test_oracle_mean_is_inverse_n_for_single_antenna():
    # E[Z] = E[|h_own|^2 / sum] * E[|h_tagged|^2] = 1/N when M = 1
    for N in (2, 3, 4):
        mean, _ = ratio_moments_oracle(1, N, 4 * 10 ** 5, seed=N)
        assert mean == pytest.approx(1 / N, rel=0.01)


def test_moment_report_positive_finite():
    rows = moment_report(range(1, 5), range(1, 5), n_samples=2 * 10 ** 4)
    assert len(rows) == 16
    for r in rows:
        assert np.isfinite(r["oracle_mean"]) and r["oracle_mean"] > 0
        assert np.isfinite(r["oracle_var"]) and r["oracle_var"] > 0


def test_gamma_table_sources():
    k, s = gamma_table(1, 5)
    assert np.isnan(k[0]) and k[1] == 1.0
    ke, se = gamma_table(1, 3, "empirical")
    assert ke[2] * se[2] == pytest.approx(0.5, rel=0.02)
    assert empirical_gamma_params(1, 2) is empirical_gamma_params(1, 2)
    with pytest.raises(ValueError):
        gamma_table(1, 3, "other")
