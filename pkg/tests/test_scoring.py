import math

import numpy as np
import pytest

from fdrstream.errors import ConfigurationError, DegenerateDataError
from fdrstream.scoring import KDE, KNN, Identity, ZScore, fit_zscore, parse_score, score


def test_zscore_value():
    assert ZScore(0.0, 1.0)(2.0) == 2.0


def test_knn_training_point_scores_zero():
    assert KNN(1, [0.0, 1.0, 3.0])(1.0) == 0.0


def test_knn_two_neighbours():
    assert KNN(2, [0.0, 1.0, 3.0])(0.0) == pytest.approx(0.5)


def test_knn_zero_iff_k_coincident_points():
    f = KNN(2, [1.0, 1.0, 5.0])
    assert f(1.0) == 0.0
    assert KNN(2, [1.0, 2.0, 5.0])(1.0) > 0.0


def test_knn_against_loop():
    rng = np.random.default_rng(0)
    train = rng.standard_normal(50)
    x = rng.standard_normal(20)
    f = KNN(4, train)
    expected = [np.mean(sorted(abs(xi - train))[:4]) for xi in x]
    np.testing.assert_allclose(f(x), expected)


def test_fit_zscore_sample_std():
    f = fit_zscore([-1.0, 1.0])
    assert f.mu == 0.0
    assert f.sigma == pytest.approx(math.sqrt(2.0))


def test_fit_zscore_degenerate():
    with pytest.raises(DegenerateDataError):
        fit_zscore([5.0, 5.0, 5.0])


def test_fit_zscore_score():
    assert fit_zscore([0.0, 2.0])(0.0) == pytest.approx(1 / math.sqrt(2))


@pytest.mark.parametrize("f", [Identity(), ZScore(0.5, 2.0)])
def test_monotone_above_mean(f):
    x = np.linspace(0.5, 10, 200)
    assert np.all(np.diff(f(x)) >= 0)


def test_kde_increases_with_distance():
    f = KDE(0.5, [0.0, 0.2, -0.3])
    x = np.linspace(0.2, 5.0, 100)
    assert np.all(np.diff(f(x)) > 0)


def test_vectorisation_and_shape():
    f = ZScore(0.0, 1.0)
    x = np.arange(6.0).reshape(2, 3)
    assert f(x).shape == (2, 3)
    assert isinstance(score(f, 1.0), float)


def test_parse_score():
    train = np.array([0.0, 1.0, 2.0, 3.0])
    assert isinstance(parse_score("identity"), Identity)
    assert isinstance(parse_score("zscore", train), ZScore)
    assert parse_score("knn:2", train).k == 2
    assert parse_score("kde:0.3", train).bandwidth == 0.3
    with pytest.raises(ConfigurationError):
        parse_score("knn:2")
    with pytest.raises(ConfigurationError):
        parse_score("lof", train)


def test_invalid_parameters():
    with pytest.raises(ConfigurationError):
        ZScore(0.0, 0.0)
    with pytest.raises(ConfigurationError):
        KNN(5, [1.0, 2.0])
    with pytest.raises(ConfigurationError):
        KDE(-1.0, [1.0])
