import logging
from fractions import Fraction

import numpy as np
import pytest

from fdrstream.errors import DomainError, UsageError
from fdrstream.generator import GaussianStd
from fdrstream.metrics import (ConfusionCounts, RejectionDistribution, expected_rejections, fdp, fdr_weights, fnp,
                               heuristic_gap, mfdr_bh_prediction, mfdr_estimate, n_partitions,
                               permutation_test_max_gap, q_fractional, theoretical_fdr_empirical_bh)
from fdrstream.multiple_testing import bh_counts, calibration_cardinality
from fdrstream.simulation import oracle_window_counts, oracle_windows, uniform_window_counts


def cc(r, fp, fn=0, m1=0, nulls=100):
    return ConfusionCounts(r, fp, fn, m1, nulls)


def test_fdp_conventions():
    assert fdp(cc(0, 0)) == 0
    assert fdp(cc(2, 1)) == Fraction(1, 2)


def test_fnp_conventions():
    assert fnp(cc(0, 0, 0, 0)) == 0
    assert fnp(cc(0, 0, 5, 5)) == 1
    assert fnp(cc(4, 0, 1, 5)) == Fraction(1, 5)


def test_worked_example_pooled_vs_mean():
    # 4 subseries, 6 rejections, 2 false: pooled 1/3, mean of per-window FDP 0.375
    windows = [cc(2, 1), cc(2, 0), cc(1, 1), cc(1, 0)]
    assert mfdr_estimate(windows) == Fraction(1, 3)
    assert np.mean([float(fdp(w)) for w in windows]) == 0.375


def test_mfdr_distinguishes_criteria():
    w = [cc(2, 1), cc(1, 1)]
    assert mfdr_estimate(w) == Fraction(2, 3)
    assert np.mean([float(fdp(x)) for x in w]) == 0.75


def test_mfdr_degenerate(caplog):
    with caplog.at_level(logging.WARNING):
        assert mfdr_estimate([cc(0, 0), cc(0, 0)]) == 0
    assert "no rejection" in caplog.text
    assert mfdr_estimate([cc(3, 1)]) == fdp(cc(3, 1))


def test_scale_free():
    c = ConfusionCounts(7, 3, 2, 9, 50)
    for k in (2, 5, 11):
        assert fdp(c.scaled(k)) == fdp(c) and fnp(c.scaled(k)) == fnp(c)


def test_confusion_validation():
    with pytest.raises(UsageError):
        ConfusionCounts(1, 2, 0, 0, 5)
    with pytest.raises(UsageError):
        ConfusionCounts.from_decisions([1, 0], None)


def test_from_decisions():
    c = ConfusionCounts.from_decisions([1, 1, 0, 0], [1, 0, 1, 0])
    assert c.astuple() == (2, 1, 1, 2, 2)


def test_theory_spike_values():
    pm = RejectionDistribution.point_mass(1, 100)
    assert theoretical_fdr_empirical_bh(999, 100, 99, 0.1, pm) == pytest.approx(0.099, abs=1e-15)
    assert theoretical_fdr_empirical_bh(1000, 100, 99, 0.1, pm) == pytest.approx(99 * 2 / 1001, abs=1e-15)
    assert 99 * 2 / 1001 == pytest.approx(0.19780, abs=1e-5)


def test_theory_against_lattice_mc():
    """All anomalies at p = 0 and uniform lattice nulls: formula with MC law of R(i) versus direct MC."""
    rng = np.random.default_rng(0)
    m, m1, n, alpha, b = 10, 2, 37, 0.3, 200_000
    c = uniform_window_counts(rng, b, m, m1, n)
    from fdrstream.simulation import evaluate_rows
    from fdrstream.multiple_testing import count_bounds
    zero_col = m1 + rng.integers(0, m - m1, b)
    k, fp, fn, k_i = evaluate_rows(c.astype(float), count_bounds(alpha, m, n), m1, zero_col, 0.0)
    mc = np.mean(np.where(k > 0, fp / np.maximum(k, 1), 0.0))
    theory = theoretical_fdr_empirical_bh(n, m, m - m1, alpha, RejectionDistribution.from_samples(k_i, m))
    assert abs(mc - theory) < 4 * np.sqrt(mc / b)


def test_theory_saturated_case():
    rng = np.random.default_rng(1)
    m, n, alpha = 10, 50, 0.9
    c = np.zeros((5000, m), dtype=np.int64)
    c[:, 1:] = rng.integers(0, 3, (5000, m - 1))  # tiny counts: BH rejects everything
    assert all(bh_counts(row, n, alpha).k_star == m for row in c[:50])
    w = fdr_weights(n, m, alpha)
    assert theoretical_fdr_empirical_bh(n, m, m - 1, alpha, RejectionDistribution.point_mass(m, m)) == pytest.approx((m - 1) * w[-1])


@pytest.mark.parametrize("m", [50, 100, 150])
@pytest.mark.parametrize("alpha", [0.05, 0.1, 0.2])
def test_corollary_bounds(m, alpha):
    m0 = m - 1
    for ell in range(1, 21):
        n = calibration_cardinality(m, alpha, ell)
        top = m0 * alpha / m
        for k in (1, 2, 5, m):
            v = theoretical_fdr_empirical_bh(n, m, m0, alpha, RejectionDistribution.point_mass(k, m))
            assert n / (n + 1) * top - 1e-15 <= v <= top + 1e-15


def test_q_fractional():
    assert q_fractional(1000, 1, 100, 0.1) == 0
    assert q_fractional(999, 1, 100, 0.1) == Fraction(999, 1000)
    for k in range(1, 101):
        assert q_fractional(999, k, 100, 0.1) == 1 - Fraction(k, 1000)


def test_expected_rejections():
    assert expected_rejections(100, 0.01, 0.1, 1.0) == 0
    assert expected_rejections(100, 0.01, 0.1, 0.0) == pytest.approx(1 / 0.9)
    with pytest.raises(DomainError):
        expected_rejections(100, 0.01, 1.0, 0.0)


def test_mfdr_relation_under_bh():
    rng = np.random.default_rng(3)
    m, m1, alpha, b = 100, 5, 0.2, 200_000
    p = oracle_windows(rng, b, m, m1, 50.0)
    r, fp, _ = oracle_window_counts(p, m1, alpha, m)
    # R with one null forced to 0 (the first null column)
    q = p.copy()
    q[:, m1] = 0.0
    r1, _, _ = oracle_window_counts(q, m1, alpha, m)
    mfdr = fp.sum() / r.sum()
    pred = mfdr_bh_prediction(alpha, m - m1, m, r1.mean(), r.mean())
    # delta-method standard error of the ratio estimator
    se = np.std(fp - mfdr * r) / (np.sqrt(b) * r.mean())
    assert abs(mfdr - pred) <= 2 * se + 2 * pred * np.std(r1) / (np.sqrt(b) * r1.mean())


def test_heuristic_gap_saturated_flag(caplog):
    def gen(rng):
        return np.zeros(10), np.array([1] + [0] * 9)
    with caplog.at_level(logging.WARNING):
        g = heuristic_gap(5, 0.1, gen, np.random.default_rng(0))
    assert g.saturated and g.e_r == 10 and g.e_ri == 10


def test_heuristic_gap_table_setup():
    ref = GaussianStd()

    def gen(rng):
        x = np.concatenate([[4.0, 4.0], rng.standard_normal(98)])
        return ref.sf(x), np.array([1, 1] + [0] * 98)
    g = heuristic_gap(400, 0.1, gen, np.random.default_rng(1))
    assert abs(g.gap) < 0.4


def test_permutation_identical_groups():
    assert permutation_test_max_gap([[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]) == 1.0


def test_permutation_exhaustive_example():
    assert n_partitions([3, 3]) == 20
    assert permutation_test_max_gap([[0, 0, 0], [1, 1, 1]]) == pytest.approx(0.1)


def test_permutation_monte_carlo_branch():
    rng = np.random.default_rng(0)
    same = [rng.random(30) for _ in range(4)]
    p = permutation_test_max_gap(same, n_permutations=2000, seed=1)
    assert p > 0.01
    shifted = [g + 0.5 * (i == 0) for i, g in enumerate(same)]
    assert permutation_test_max_gap(shifted, n_permutations=2000, seed=1) == pytest.approx(1 / 2001)
    assert permutation_test_max_gap(same, 2000, seed=3) == permutation_test_max_gap(same, 2000, seed=3)


def test_rejection_distribution_validation():
    with pytest.raises(UsageError):
        RejectionDistribution([0.5, 0.6])
    with pytest.raises(UsageError):
        RejectionDistribution.from_samples([0, 1], 5)
    assert RejectionDistribution.from_samples([1, 1, 3], 3).mean() == pytest.approx(5 / 3)
