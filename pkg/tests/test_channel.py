import math

import numpy as np
import pytest
from scipy import stats

from jtcran.channel import (PowerSplit, Realization, mrt_weights, received_power_exact, sample_fading,
                            total_received_power)
from jtcran.geometry import build_assignment, pairwise_distances


def _instance(rng, n_rrh, n_user, M, spread=150.0, alpha=3.0):
    rrhs = rng.uniform(-spread, spread, (n_rrh, 2))
    users = np.vstack((np.zeros((1, 2)), rng.uniform(-spread, spread, (n_user - 1, 2))))
    h = sample_fading(n_rrh, n_user, M, rng)
    return Realization(rrhs, users, h, alpha)


def test_fading_moments_and_law():
    h = sample_fading(1000, 1000, 1, 7).ravel()
    power = np.abs(h) ** 2
    assert 0.997 <= power.mean() <= 1.003
    assert abs(h.mean()) <= 0.003
    assert stats.kstest(power, "expon").statistic < 0.005
    assert h.real.var() == pytest.approx(0.5, rel=0.01)
    assert abs(np.corrcoef(h.real, h.imag)[0, 1]) < 0.005


def test_fading_shapes():
    assert sample_fading(0, 3, 2, 1).shape == (0, 3, 2)
    with pytest.raises(ValueError):
        sample_fading(-1, 3, 2, 1)


def test_single_serving_rrh_gets_unit_power(rng):
    r = Realization(np.array([[40.0, 0.0]]), np.zeros((1, 2)), sample_fading(1, 1, 3, rng), 3.0)
    w = mrt_weights(r, build_assignment(r.rrhs, r.users, 100.0))
    assert np.sum(np.abs(w[0, 0]) ** 2) == pytest.approx(1.0, abs=1e-14)


def test_equal_norms_share_power_equally():
    h = np.ones((2, 1, 1), dtype=complex)
    r = Realization(np.array([[30.0, 0.0], [-30.0, 0.0]]), np.zeros((1, 2)), h, 3.0)
    w = mrt_weights(r, build_assignment(r.rrhs, r.users, 100.0))
    np.testing.assert_allclose(np.abs(w[:, 0, 0]) ** 2, [0.5, 0.5], atol=1e-14)


@pytest.mark.parametrize("M", [1, 2, 4])
def test_joint_normalisation_and_shares(rng, M):
    r = _instance(rng, 5, 3, M, spread=60.0)
    a = build_assignment(r.rrhs, r.users, 100.0)
    w = mrt_weights(r, a)
    g = r.gains()
    for j, Cj in enumerate(a.serving_sets):
        if len(Cj) == 0:
            assert np.all(w[:, j] == 0)
            continue
        assert np.sum(np.abs(w[Cj, j]) ** 2) == pytest.approx(1.0, abs=1e-12)
        share = np.sum(np.abs(w[Cj, j]) ** 2, axis=1)
        expect = np.sum(np.abs(g[Cj, j]) ** 2, axis=1) / np.sum(np.abs(g[Cj, j]) ** 2)
        np.testing.assert_allclose(share, expect, rtol=1e-12)


def test_no_interferers_gives_zero_interference(rng):
    r = Realization(np.array([[20.0, 5.0], [-50.0, 10.0]]), np.zeros((1, 2)), sample_fading(2, 1, 2, rng), 3.0)
    a = build_assignment(r.rrhs, r.users, 100.0)
    ps = received_power_exact(r, a, mrt_weights(r, a))
    assert ps.P_I1 == 0.0 and ps.P_I2 == 0.0


def test_single_rrh_useful_power(rng):
    h = sample_fading(1, 1, 1, rng)
    r = Realization(np.array([[30.0, 0.0]]), np.zeros((1, 2)), h, 3.0)
    a = build_assignment(r.rrhs, r.users, 100.0)
    ps = received_power_exact(r, a, mrt_weights(r, a))
    assert ps.P_U == pytest.approx(abs(h[0, 0, 0]) ** 2 * 30.0 ** -3, rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_split_sums_to_unsplit_total(seed):
    rng = np.random.default_rng(seed)
    r = _instance(rng, 20, 20, 2)
    a = build_assignment(r.rrhs, r.users, 100.0)
    w = mrt_weights(r, a)
    ps = received_power_exact(r, a, w)
    total = total_received_power(r, a, w)
    assert ps.P_I1 + ps.P_I2 == pytest.approx(total, rel=1e-10)
    assert ps.P_U == pytest.approx(np.sum(np.abs(r.gains()[a.serving_sets[0], 0]) ** 2), rel=1e-12)


def test_useful_power_mean_increases_with_antennas():
    rrhs = np.array([[30.0, 0.0], [0.0, 70.0]])
    users = np.zeros((1, 2))
    a = build_assignment(rrhs, users, 100.0)
    means = []
    for M in (1, 2, 4):
        rng = np.random.default_rng(99)          # same stream for every M
        pu = []
        for _ in range(10 ** 4):
            r = Realization(rrhs, users, sample_fading(2, 1, M, rng), 3.0)
            pu.append(received_power_exact(r, a, mrt_weights(r, a)).P_U)
        means.append(np.mean(pu))
    assert means[0] < means[1] < means[2]


def test_out_of_set_interference_sanity_bound():
    rng = np.random.default_rng(5)
    D, vals = 200.0, []
    rrhs = np.array([[30.0, 0.0], [260.0, 0.0], [0.0, -240.0]])
    users = np.array([[0.0, 0.0], [300.0, 0.0], [0.0, -300.0]])
    a = build_assignment(rrhs, users, 100.0)
    for _ in range(4000):
        r = Realization(rrhs, users, sample_fading(3, 3, 1, rng), 3.0)
        vals.append(received_power_exact(r, a, mrt_weights(r, a)).P_I2)
    n_interferers = 2
    assert np.mean(vals) <= n_interferers * D ** -3.0 * 1.0


def test_power_split_validation():
    with pytest.raises(ValueError):
        PowerSplit(1.0, -1.0, 0.0)
    assert PowerSplit(1.0, -1e-3, 0.5, signed=True).interference == pytest.approx(0.499)
    assert PowerSplit(0.0, 1.0, 1.0).sinr == 0.0
    assert PowerSplit(2.0, 0.5, 0.5, 1.0).sinr == pytest.approx(1.0)


def test_received_power_rejects_missing_target(rng):
    r = _instance(rng, 3, 2, 1)
    a = build_assignment(r.rrhs, r.users, 100.0)
    with pytest.raises(ValueError):
        received_power_exact(r, a, mrt_weights(r, a), target_user=5)
