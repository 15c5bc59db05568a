"""Atypicity scores: larger means more atypical."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateDataError

_CHUNK = 4096


def _as_train(train):
    arr = np.asarray(train, dtype=float).ravel()
    if arr.size == 0:
        raise ConfigurationError("training set must be non-empty")
    return arr


class ScoreFunction:
    """Base class. Subclasses are immutable and vectorise over array input."""

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        out = self._score(np.atleast_1d(arr).ravel()).reshape(arr.shape)
        return float(out) if out.ndim == 0 else out

    def _score(self, x):  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class Identity(ScoreFunction):
    def _score(self, x):
        return x.copy()


@dataclass(frozen=True)
class ZScore(ScoreFunction):
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigurationError(f"sigma must be positive, got {self.sigma}")

    def _score(self, x):
        return np.abs(x - self.mu) / self.sigma


@dataclass(frozen=True, eq=False)
class KNN(ScoreFunction):
    """Mean absolute distance to the ``k`` nearest training points."""

    k: int
    train: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "train", _as_train(self.train))
        if int(self.k) != self.k or self.k < 1:
            raise ConfigurationError(f"k must be a positive integer, got {self.k}")
        if self.k > self.train.size:
            raise ConfigurationError(f"k={self.k} exceeds training size {self.train.size}")

    def _score(self, x):
        out = np.empty(x.size)
        k = self.k
        for lo in range(0, x.size, _CHUNK):
            d = np.abs(x[lo:lo + _CHUNK, None] - self.train[None, :])
            # stable sort keeps training-index order among equal distances
            nearest = np.sort(d, axis=1, kind="stable")[:, :k] if k < d.shape[1] else d
            out[lo:lo + _CHUNK] = nearest.mean(axis=1)
        return out


@dataclass(frozen=True, eq=False)
class KDE(ScoreFunction):
    """Negative mean unnormalised Gaussian kernel to the training points."""

    bandwidth: float
    train: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "train", _as_train(self.train))
        if not self.bandwidth > 0:
            raise ConfigurationError(f"bandwidth must be positive, got {self.bandwidth}")

    def _score(self, x):
        out = np.empty(x.size)
        inv = 1.0 / (2.0 * self.bandwidth ** 2)
        for lo in range(0, x.size, _CHUNK):
            d = x[lo:lo + _CHUNK, None] - self.train[None, :]
            out[lo:lo + _CHUNK] = -np.exp(-d * d * inv).mean(axis=1)
        return out


def score(f: ScoreFunction, x):
    return f(x)


def fit_zscore(train) -> ZScore:
    """Z-score with the sample mean and the unbiased sample standard deviation."""
    arr = np.asarray(train, dtype=float).ravel()
    if arr.size < 2:
        raise ConfigurationError("fit_zscore needs at least two training points")
    sigma = float(np.std(arr, ddof=1))
    if sigma == 0.0 or not math.isfinite(sigma):
        raise DegenerateDataError("training set has zero variance")
    return ZScore(float(arr.mean()), sigma)


def parse_score(text, train=None):
    """Build a score from ``identity``, ``zscore``, ``knn:K`` or ``kde:H``."""
    key = str(text).strip().lower()
    if key == "identity":
        return Identity()
    if key == "zscore":
        if train is None:
            raise ConfigurationError("zscore needs a training set")
        return fit_zscore(train)
    name, _, arg = key.partition(":")
    if train is None:
        raise ConfigurationError(f"{name} needs a training set")
    try:
        if name == "knn":
            return KNN(int(arg or 1), train)
        if name == "kde":
            return KDE(float(arg or 1.0), train)
    except ValueError:
        raise ConfigurationError(f"bad score parameter in {text!r}") from None
    raise ConfigurationError(f"unknown score {text!r}")
