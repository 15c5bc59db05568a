import io

import numpy as np
import pytest
from scipy import stats

from fdrstream.errors import ConfigurationError, UsageError
from fdrstream.generator import (GaussianStd, LabeledSeries, MixtureConfig, OraclePValueConfig, StudentDF,
                                 gaussian_sf, generate_mixture, generate_oracle_pvalues, parse_ref_dist,
                                 read_series_csv, student_matched_shift, student_sf)
from fdrstream.rng import make_rng


def test_pi_zero_gives_only_normals():
    s = generate_mixture(MixtureConfig(0.0, length=500, seed=1))
    assert s.labels.sum() == 0
    assert not np.any(s.values == 4.0)


def test_pi_one_gives_only_anomalies():
    s = generate_mixture(MixtureConfig(1.0, anomaly_shift=4.0, length=200, seed=1))
    assert np.all(s.labels == 1)
    assert np.all(s.values == 4.0)


def test_label_count_binomial_range():
    # P(Binomial(1e4, 0.01) outside [60, 140]) is below 1e-3
    assert stats.binom.cdf(59, 10_000, 0.01) + stats.binom.sf(140, 10_000, 0.01) < 1e-3
    counts = [generate_mixture(MixtureConfig(0.01, length=10_000, seed=s)).labels.sum() for s in range(20)]
    assert all(60 <= c <= 140 for c in counts)


def test_anomaly_iff_value_equals_shift():
    s = generate_mixture(MixtureConfig(0.05, anomaly_shift=3.5, length=5000, seed=7))
    np.testing.assert_array_equal(s.labels == 1, s.values == 3.5)


def test_reproducible():
    a = generate_mixture(MixtureConfig(0.02, StudentDF(5), 4.0, 1000, seed=11))
    b = generate_mixture(MixtureConfig(0.02, StudentDF(5), 4.0, 1000, seed=11))
    assert a.values.tobytes() == b.values.tobytes()
    c = generate_mixture(MixtureConfig(0.02, StudentDF(5), 4.0, 1000, seed=12))
    assert a.values.tobytes() != c.values.tobytes()


@pytest.mark.parametrize("ref,mean,var", [(GaussianStd(), 0.0, 1.0), (StudentDF(5), 0.0, 5 / 3)])
def test_normal_subsample_moments(ref, mean, var):
    s = generate_mixture(MixtureConfig(0.0, ref, length=100_000, seed=3))
    x = s.values
    assert abs(x.mean() - mean) <= 3 * np.sqrt(var / x.size)
    # variance of the sample variance uses the fourth moment: 3 (normal), 9 (Student 5)
    m4 = 3.0 if isinstance(ref, GaussianStd) else 25.0
    assert abs(x.var() - var) <= 3 * np.sqrt((m4 - var ** 2) / x.size)


def test_oracle_pvalues_delta_one_uniform():
    p, lab = generate_oracle_pvalues(OraclePValueConfig(0.5, 1.0, 20_000, seed=2))
    assert stats.ks_2samp(p[lab == 1], p[lab == 0]).pvalue > 1e-3


def test_oracle_pvalues_support():
    p, lab = generate_oracle_pvalues(OraclePValueConfig(0.02, 1000.0, 10_000, seed=2))
    assert lab.sum() > 0
    assert p[lab == 1].max() <= 0.001


def test_oracle_pvalues_null_cdf():
    p, lab = generate_oracle_pvalues(OraclePValueConfig(0.0, 10.0, 100_000, seed=5))
    assert abs(np.mean(p <= 0.5) - 0.5) <= 0.01


def test_oracle_config_validation():
    with pytest.raises(ConfigurationError):
        OraclePValueConfig(0.1, 0.5)
    with pytest.raises(ConfigurationError):
        MixtureConfig(1.5)
    with pytest.raises(ConfigurationError):
        MixtureConfig(0.1, length=0)


@pytest.mark.parametrize("df", [1, 2, 3, 4, 5, 6, 7, 30])
def test_student_sf_against_scipy(df):
    x = np.linspace(-8, 15, 301)
    np.testing.assert_allclose(student_sf(x, df), stats.t.sf(x, df), rtol=1e-12, atol=1e-16)


def test_gaussian_sf_against_scipy():
    x = np.linspace(-8, 8, 101)
    np.testing.assert_allclose(gaussian_sf(x), stats.norm.sf(x), rtol=1e-13, atol=1e-300)


def test_matched_shift_zero():
    assert abs(student_matched_shift(0.0)) < 1e-12


def test_matched_shift_equal_tails():
    d = student_matched_shift(4.0)
    assert abs(stats.t.sf(d, 5) - stats.norm.sf(4.0)) < 1e-10


def test_matched_shift_monotone():
    assert student_matched_shift(3.5) < student_matched_shift(4.0)


def test_parse_ref_dist():
    assert parse_ref_dist("gaussian") == GaussianStd()
    assert parse_ref_dist("student5") == StudentDF(5)
    assert parse_ref_dist("Student(5)") == StudentDF(5)
    with pytest.raises(ConfigurationError):
        parse_ref_dist("cauchy")


def test_csv_round_trip():
    s = generate_mixture(MixtureConfig(0.1, length=50, seed=4))
    buf = io.StringIO()
    s.to_csv(buf)
    assert buf.getvalue().splitlines()[0] == "t,value,label"
    back = read_series_csv(io.StringIO(buf.getvalue()))
    np.testing.assert_array_equal(back.values, s.values)
    np.testing.assert_array_equal(back.labels, s.labels)


def test_csv_unlabeled():
    s = LabeledSeries(np.array([1.0, 2.0]))
    buf = io.StringIO()
    s.to_csv(buf)
    back = read_series_csv(io.StringIO(buf.getvalue()))
    assert back.labels is None


@pytest.mark.parametrize("text,line", [
    ("t,value\n1,0.5\n2,abc\n", "line 3"),
    ("t,val\n1,0.5\n", "line 1"),
    ("t,value,label\n1,0.5,2\n", "line 2"),
    ("t,value\n1,0.5,7\n", "line 2"),
    ("", "line 1"),
])
def test_csv_errors_are_line_numbered(text, line):
    with pytest.raises(UsageError, match=line):
        read_series_csv(io.StringIO(text))


def test_rng_streams_independent_by_key():
    a = make_rng(1, 0).random(5)
    b = make_rng(1, 1).random(5)
    assert not np.allclose(a, b)
    np.testing.assert_array_equal(a, make_rng(1, 0).random(5))
