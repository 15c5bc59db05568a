"""Seeded synthetic series: Bernoulli mixtures with Dirac anomalies and oracle p-values."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import optimize, special

from .errors import ConfigurationError, UsageError
from .rng import make_rng


@dataclass(frozen=True)
class GaussianStd:
    """Standard normal reference law N(0, 1)."""

    def sample(self, rng, size):
        return rng.standard_normal(size)

    def sf(self, x):
        return gaussian_sf(x)

    def __str__(self):
        return "gaussian"


@dataclass(frozen=True)
class StudentDF:
    """Student t reference law with ``df`` degrees of freedom."""

    df: int

    def __post_init__(self):
        if int(self.df) != self.df or self.df < 1:
            raise ConfigurationError(f"Student degrees of freedom must be a positive integer, got {self.df!r}")

    def sample(self, rng, size):
        # Z / sqrt(V / df) with V chi-square(df)
        z = rng.standard_normal(size)
        v = rng.chisquare(self.df, size)
        return z / np.sqrt(v / self.df)

    def sf(self, x):
        return student_sf(x, self.df)

    def __str__(self):
        return f"student{self.df}"


RefDist = Union[GaussianStd, StudentDF]


def parse_ref_dist(text):
    """Parse ``gaussian`` or ``studentN`` / ``student:N`` into a reference law."""
    key = str(text).strip().lower().replace(":", "").replace("(", "").replace(")", "")
    if key in ("gaussian", "normal", "gaussianstd"):
        return GaussianStd()
    for prefix in ("studentdf", "student", "t"):
        if key.startswith(prefix) and key[len(prefix):].isdigit():
            return StudentDF(int(key[len(prefix):]))
    raise ConfigurationError(f"unknown reference distribution {text!r}")


def gaussian_sf(x):
    """Upper tail of N(0, 1)."""
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def student_sf(x, df):
    """Upper tail of Student t: ``0.5 * I_{df/(df+x^2)}(df/2, 1/2)`` for x >= 0.

    The regularised incomplete beta keeps full relative accuracy deep in the
    tail, which the matched-shift root finder relies on.
    """
    df = float(df)
    x = np.asarray(x, dtype=float)
    half_tail = 0.5 * special.betainc(0.5 * df, 0.5, df / (df + x * x))
    out = np.where(x >= 0, half_tail, 1.0 - half_tail)
    return out if out.ndim else float(out)


def student_matched_shift(delta_gauss, df=5):
    """Shift for Student(df) whose tail mass equals the Gaussian tail mass beyond ``delta_gauss``."""
    delta_gauss = float(delta_gauss)
    if not math.isfinite(delta_gauss):
        raise ConfigurationError("delta_gauss must be finite")
    if delta_gauss == 0.0:
        return 0.0
    target = float(gaussian_sf(delta_gauss))
    if delta_gauss < 0:
        return -student_matched_shift(-delta_gauss, df)

    def gap(d):
        return float(student_sf(d, df)) - target

    hi = max(1.0, 2.0 * delta_gauss)
    while gap(hi) > 0:
        hi *= 2.0
    return optimize.brentq(gap, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


@dataclass(frozen=True)
class MixtureConfig:
    pi: float
    ref_dist: RefDist = GaussianStd()
    anomaly_shift: float = 4.0
    length: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.pi <= 1.0):
            raise ConfigurationError(f"pi must lie in [0, 1], got {self.pi}")
        if int(self.length) != self.length or self.length < 1:
            raise ConfigurationError(f"length must be a positive integer, got {self.length}")
        if not math.isfinite(self.anomaly_shift):
            raise ConfigurationError("anomaly_shift must be finite")


@dataclass(frozen=True)
class OraclePValueConfig:
    pi: float
    delta: float
    length: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.pi <= 1.0):
            raise ConfigurationError(f"pi must lie in [0, 1], got {self.pi}")
        if not self.delta >= 1.0:
            raise ConfigurationError(f"delta must be >= 1, got {self.delta}")
        if int(self.length) != self.length or self.length < 1:
            raise ConfigurationError(f"length must be a positive integer, got {self.length}")


@dataclass
class LabeledSeries:
    values: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int8)
            if self.labels.shape != self.values.shape:
                raise UsageError("values and labels must have identical length")

    def __len__(self):
        return self.values.shape[0]

    def to_csv(self, path_or_file, include_labels=True):
        """Write ``t,value[,label]`` rows with 1-based ``t``."""
        write_labels = include_labels and self.labels is not None
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "value", "label"] if write_labels else ["t", "value"])
            for i, v in enumerate(self.values):
                row = [i + 1, repr(float(v))]
                if write_labels:
                    row.append(int(self.labels[i]))
                w.writerow(row)
        finally:
            if own:
                fh.close()


def read_series_csv(path_or_file):
    """Parse a ``t,value[,label]`` CSV; errors name the offending line."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, newline="") if own else path_or_file
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise UsageError("line 1: empty input")
        cols = [h.strip().lower() for h in header]
        if cols[:2] != ["t", "value"] or len(cols) > 3 or (len(cols) == 3 and cols[2] != "label"):
            raise UsageError(f"line 1: expected header 't,value[,label]', got {','.join(header)!r}")
        has_labels = len(cols) == 3
        values, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(cols):
                raise UsageError(f"line {lineno}: expected {len(cols)} fields, got {len(row)}")
            try:
                v = float(row[1])
            except ValueError:
                raise UsageError(f"line {lineno}: value {row[1]!r} is not a number") from None
            if not math.isfinite(v):
                raise UsageError(f"line {lineno}: value must be finite")
            values.append(v)
            if has_labels:
                lab = row[2].strip()
                if lab not in ("0", "1"):
                    raise UsageError(f"line {lineno}: label must be 0 or 1, got {lab!r}")
                labels.append(int(lab))
    finally:
        if own:
            fh.close()
    return LabeledSeries(np.array(values, dtype=float), np.array(labels, dtype=np.int8) if has_labels else None)


def generate_mixture(config: MixtureConfig, rng=None) -> LabeledSeries:
    """Draw A_t ~ Bernoulli(pi); normals come from ``ref_dist`` and anomalies equal the shift exactly."""
    rng = make_rng(config.seed) if rng is None else rng
    labels = (rng.random(config.length) < config.pi).astype(np.int8)
    values = config.ref_dist.sample(rng, config.length)
    values[labels == 1] = config.anomaly_shift
    return LabeledSeries(values, labels)


def generate_oracle_pvalues(config: OraclePValueConfig, rng=None):
    """Normal p-values are U(0, 1); anomaly p-values are U(0, 1/delta)."""
    rng = make_rng(config.seed) if rng is None else rng
    labels = (rng.random(config.length) < config.pi).astype(np.int8)
    p = rng.random(config.length)
    p[labels == 1] /= config.delta
    return p, labels
