from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from fdrstream.errors import ConfigurationError, UsageError
from fdrstream.multiple_testing import (BH, LORD3, MBH, MBHConfig, as_rational, bh, bh_bruteforce, bh_counts,
                                        calibration_cardinality, count_bounds, float_bounds, lord3_init,
                                        lord3_next, lord_gamma, matching_ell, mbh, mbh_alpha_prime,
                                        policy_level)
from fdrstream.pvalues import LatticeP


def _same(a, b):
    return a.k_star == b.k_star and a.threshold == b.threshold and sorted(a.rejected.tolist()) == sorted(b.rejected.tolist())


def test_hand_example():
    r = bh([0.01, 0.5, 0.9], 0.15)
    assert r.k_star == 1
    assert r.eps == Fraction(1, 20)
    assert r.rejected.tolist() == [0]


def test_all_zero_rejects_all():
    r = bh(np.zeros(7), 0.1)
    assert r.k_star == 7 and r.eps == Fraction(1, 10)


def test_all_one_rejects_none():
    r = bh(np.ones(7), 0.1)
    assert r.k_star == 0 and r.eps == 0 and r.rejected.size == 0


def test_repeated_alpha_over_m_rejects_all():
    m = 13
    for f in (bh, bh_bruteforce):
        assert f([Fraction(1, 10) / m] * m, 0.1).k_star == m
        assert f(np.full(m, 0.1 / m), 0.1).k_star == m


@pytest.mark.parametrize("p", [0.05, 0.1, 0.1000001, 0.3])
def test_single_pvalue(p):
    assert bh([p], 0.1).k_star == int(p <= 0.1)


def test_float_boundary_is_exact():
    # 0.1*3/100 in floating point is 0.0030000000000000005 > the decimal 0.003
    p = [0.003, 0.5, 0.5] + [0.9] * 97
    assert bh(p, 0.1).k_star == bh_bruteforce(p, 0.1).k_star


def test_float_bounds_are_decimal_floors():
    a = as_rational(0.1)
    for k, b in enumerate(float_bounds(0.1, 100), start=1):
        assert as_rational(b) <= a * k / 100 < as_rational(np.nextafter(b, 1.0))


def test_count_bounds_formula():
    np.testing.assert_array_equal(count_bounds(0.1, 100, 999)[:3], [0, 1, 2])
    np.testing.assert_array_equal(count_bounds(0.1, 100, 1000)[:3], [1, 2, 3])


def test_lattice_and_counts_paths_agree():
    rng = np.random.default_rng(0)
    for n in (9, 10, 999, 1000):
        for _ in range(50):
            c = rng.integers(0, n + 1, size=100)
            c[: rng.integers(0, 5)] = 0
            lat = [LatticeP(int(x), n) for x in c]
            ref = bh_bruteforce([Fraction(int(x), n) for x in c], 0.1)
            assert _same(bh(lat, 0.1), ref)
            assert _same(bh_counts(c, n, 0.1), ref)


lattice_instances = st.integers(1, 50).flatmap(lambda m: st.tuples(
    st.sampled_from([1, 2, 9, 10, 99, 100, 999, 1000]),
    st.lists(st.integers(0, 1000), min_size=m, max_size=m),
    st.sampled_from([0.01, 0.05, 0.1, 0.15, 0.2, 0.5, 1.0])))


@settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(lattice_instances)
def test_property_lattice(inst):
    n, raw, alpha = inst
    c = [x % (n + 1) for x in raw]
    assert _same(bh([LatticeP(x, n) for x in c], alpha), bh_bruteforce([Fraction(x, n) for x in c], alpha))


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=50), st.sampled_from([0.05, 0.1, 0.2, 0.3]))
def test_property_floats(p, alpha):
    assert _same(bh(np.array(p), alpha), bh_bruteforce(p, alpha))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=20), st.randoms())
def test_permutation_invariance(p, rnd):
    q = list(p)
    rnd.shuffle(q)
    a, b = bh(np.array(p), 0.1), bh(np.array(q), 0.1)
    assert a.k_star == b.k_star and a.threshold == b.threshold
    assert sorted(np.array(p)[a.rejected]) == sorted(np.array(q)[b.rejected])


def test_stepup_monotonicity():
    rng = np.random.default_rng(5)
    for _ in range(300):
        m = rng.integers(1, 10)
        p = [Fraction(int(x), 50) for x in rng.integers(0, 51, m)]
        base = set(bh_bruteforce(p, 0.2).rejected.tolist())
        extra = bh_bruteforce(p + [Fraction(0)], 0.2)
        assert base <= set(extra.rejected.tolist())


def test_input_validation():
    with pytest.raises(UsageError):
        bh([], 0.1)
    with pytest.raises(UsageError):
        bh([1.5], 0.1)
    with pytest.raises(UsageError):
        bh([float("nan")], 0.1)
    with pytest.raises(ConfigurationError):
        bh([0.1], 0.0)
    with pytest.raises(UsageError):
        bh_counts([11], 10, 0.1)


def test_mbh_alpha_prime():
    assert mbh_alpha_prime(0.1, 100, 0.01) == Fraction(1, 19)
    assert mbh_alpha_prime(1, 100, 0.01) == 1
    for a in (0.01, 0.05, 0.1, 0.5, 0.9):
        assert mbh_alpha_prime(a, 100, 0.03) < as_rational(a)


def test_mbh_limit_large_m_pi():
    ap = mbh_alpha_prime(0.1, 10**6, 1)
    assert abs(float(ap) - 0.1) < 1e-6


def test_mbh_subset_of_bh():
    rng = np.random.default_rng(1)
    for _ in range(200):
        p = rng.random(30) ** 3
        cfg = MBHConfig(0.2, 0.05, 30)
        assert set(mbh(p, cfg).rejected.tolist()) <= set(bh(p, 0.2).rejected.tolist())


def test_mbh_requires_pi():
    with pytest.raises(ConfigurationError):
        MBH(0.1)


@pytest.mark.parametrize("m,alpha,ell,n", [(100, 0.1, 1, 999), (150, 0.1, 1, 1499), (100, 0.1, 2, 1999)])
def test_calibration_cardinality(m, alpha, ell, n):
    assert calibration_cardinality(m, alpha, ell) == n
    assert matching_ell(n, m, alpha) == ell


def test_matching_ell_rejects():
    assert matching_ell(1000, 100, 0.1) is None
    assert matching_ell(1899, 100, Fraction(1, 19)) == 1


def test_policy_level():
    assert policy_level(BH(0.1), 100) == Fraction(1, 10)
    assert policy_level(MBH(0.1, 0.01), 100) == Fraction(1, 19)
    with pytest.raises(UsageError):
        policy_level(LORD3(0.1), 100)


def test_lord_gamma_normalised_and_decreasing_tail():
    g = lord_gamma(1000)
    assert g.sum() < 1
    assert np.all(np.diff(g[2:]) < 0)


def test_lord_no_rejections_decreasing():
    s = lord3_init(0.1)
    w0 = s.w0
    thr = [s.threshold]
    for t in range(1, 200):
        t_next, s = lord3_next(s, 0.9, 0)
        thr.append(t_next)
    np.testing.assert_allclose(thr, w0 * lord_gamma(200))
    assert all(a > b for a, b in zip(thr[2:], thr[3:]))


def test_lord_wealth_nonnegative_and_reset():
    rng = np.random.default_rng(2)
    s = lord3_init(0.1)
    for t in range(2000):
        p = rng.random() * (1e-6 if rng.random() < 0.05 else 1.0)
        d = int(p <= s.threshold)
        _, s = lord3_next(s, p, d)
        assert s.wealth >= 0
    assert s.last_rejection_times


def test_lord_invalid():
    with pytest.raises(ConfigurationError):
        lord3_init(0.1, w0=0.5)
    with pytest.raises(ConfigurationError):
        LORD3(1.0)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 1000), min_size=1, max_size=50), st.sampled_from([0.05, 0.1, 0.2]))
def test_property_decimal_grid_floats(c, alpha):
    # floats like 0.003 sit exactly on the step-up boundaries
    p = [x / 1000 for x in c]
    assert _same(bh(np.array(p), alpha), bh_bruteforce(p, alpha))
