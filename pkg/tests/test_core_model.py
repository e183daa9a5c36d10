import math

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from jtcran.core_model import (DEFAULT_POLICY, FIG5, NetworkParams, ParameterError, SeedSpec,
                               TruncationPolicy, density_for_mean, stream_seed, validate)


def test_fig5_params_validate():
    assert validate(FIG5) is FIG5


@pytest.mark.parametrize("change, message", [
    (dict(alpha=2.0), "alpha must exceed 2"),
    (dict(r0=0.0), "r0 must be positive"),
    (dict(r0=100.0), "r0 < r1 violated"),
    (dict(lambda_R=0.0), "lambda_R must be positive"),
    (dict(lambda_U=-1e-5), "lambda_U must be positive"),
    (dict(M=0), "M must be an integer >= 1"),
    (dict(M=1.5), "M must be an integer >= 1"),
    (dict(N0=-1.0), "N0 must be non-negative"),
    (dict(alpha=float("nan")), "alpha must be finite"),
])
def test_validate_rejects(change, message):
    with pytest.raises(ParameterError, match=message):
        validate(FIG5.with_(**change))


def test_density_for_mean_round_trip():
    lam = density_for_mean(3.0)
    p = NetworkParams(lam, lam)
    assert p.mean_rrh_per_set == pytest.approx(3.0, rel=1e-14)


def test_policy_validation():
    with pytest.raises(ParameterError):
        TruncationPolicy(tail_mass_eps=0.0)
    with pytest.raises(ParameterError):
        TruncationPolicy(max_terms=0)


@given(st.floats(min_value=0.0, max_value=60.0))
@example(0.125)
def test_n_terms_covers_poisson_mass(mean):
    from scipy import stats
    n = DEFAULT_POLICY.n_terms(mean)
    assert 1 <= n <= DEFAULT_POLICY.max_terms
    assert stats.poisson.sf(n, mean) < DEFAULT_POLICY.tail_mass_eps


@settings(max_examples=50)
@given(st.integers(min_value=0, max_value=2 ** 63), st.integers(min_value=0, max_value=10 ** 6))
def test_stream_seed_is_pure(master, index):
    assert stream_seed(master, index) == stream_seed(master, index)
    assert SeedSpec(master, index).stream_seed() == stream_seed(master, index)


def test_stream_seeds_differ_across_indices():
    seeds = {stream_seed(1, i) for i in range(1000)}
    assert len(seeds) == 1000


def test_seed_spec_rejects_negative_index():
    with pytest.raises(ParameterError):
        SeedSpec(1, -1)


def test_params_hashable_and_replace():
    p = FIG5.with_(M=4)
    assert p.M == 4 and FIG5.M == 1
    assert hash(p) != hash(FIG5)
    assert p.as_dict()["M"] == 4
    assert math.isclose(p.annulus_area, math.pi * (100 ** 2 - 1))
