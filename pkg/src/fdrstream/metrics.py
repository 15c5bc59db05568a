"""Error rates, the exact FDR formula for BH on empirical p-values, and related checks."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .errors import DomainError, UsageError

log = logging.getLogger(__name__)


def ratio(num, den) -> Fraction:
    """``num/den`` as a Fraction with the 0/0 = 0 convention used by every metric."""
    if den == 0:
        if num != 0:
            raise UsageError(f"ratio {num}/0 is undefined")
        return Fraction(0)
    return Fraction(num) / Fraction(den)


def safe_div(num, den):
    """Array version of ``ratio`` in floating point."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


@dataclass(frozen=True)
class ConfusionCounts:
    rejections: int
    false_positives: int
    false_negatives: int
    anomalies: int
    nulls: int

    def __post_init__(self):
        vals = (self.rejections, self.false_positives, self.false_negatives, self.anomalies, self.nulls)
        if min(vals) < 0:
            raise UsageError("counts must be nonnegative")
        if self.false_positives > self.rejections or self.false_negatives > self.anomalies:
            raise UsageError("inconsistent counts: need FP <= R and FN <= m1")

    @classmethod
    def from_decisions(cls, decisions, labels):
        if labels is None:
            raise UsageError("metrics need ground-truth labels")
        d = np.asarray(decisions).astype(bool)
        a = np.asarray(labels).astype(bool)
        return cls(int(d.sum()), int((d & ~a).sum()), int((~d & a).sum()), int(a.sum()), int((~a).sum()))

    def __add__(self, other):
        return ConfusionCounts(*(x + y for x, y in zip(self.astuple(), other.astuple())))

    def astuple(self):
        return (self.rejections, self.false_positives, self.false_negatives, self.anomalies, self.nulls)

    def scaled(self, c):
        return ConfusionCounts(*(c * x for x in self.astuple()))


def _counts_of(obj):
    if isinstance(obj, ConfusionCounts):
        return obj
    confusion = getattr(obj, "confusion", None)
    if confusion is not None:
        return confusion()
    raise UsageError(f"cannot derive counts from {type(obj).__name__}")


def fdp(obj) -> Fraction:
    """False discovery proportion FP/R (0 when nothing is rejected)."""
    c = _counts_of(obj)
    return ratio(c.false_positives, c.rejections)


def fnp(obj) -> Fraction:
    """False negative proportion FN/m1 (0 when there are no anomalies)."""
    c = _counts_of(obj)
    return ratio(c.false_negatives, c.anomalies)


def mfdr_estimate(windows) -> Fraction:
    """Ratio of summed false positives to summed rejections over windows."""
    windows = list(windows)
    if not windows:
        raise UsageError("mfdr_estimate needs at least one window")
    fp = sum(w.false_positives for w in windows)
    r = sum(w.rejections for w in windows)
    if r == 0:
        log.warning("no rejection in any of %d windows; mFDR reported as 0", len(windows))
    return ratio(fp, r)


class RejectionDistribution:
    """Probability mass of R(i) on 1..m."""

    def __init__(self, pmf, m=None):
        pmf = np.asarray(pmf, dtype=float)
        self.m = int(pmf.shape[0] if m is None else m)
        if pmf.shape[0] != self.m:
            raise UsageError("pmf length must equal m")
        if (pmf < 0).any() or abs(pmf.sum() - 1.0) > 1e-12:
            raise UsageError("pmf must be nonnegative and sum to 1")
        self.pmf = pmf

    @classmethod
    def point_mass(cls, k, m):
        pmf = np.zeros(m)
        pmf[k - 1] = 1.0
        return cls(pmf)

    @classmethod
    def from_samples(cls, r_i, m):
        r_i = np.asarray(r_i, dtype=np.int64)
        if r_i.size == 0 or r_i.min() < 1 or r_i.max() > m:
            raise UsageError("R(i) samples must lie in 1..m")
        counts = np.bincount(r_i, minlength=m + 1)[1:]
        pmf = counts / counts.sum()
        return cls(pmf / pmf.sum())

    def __getitem__(self, k):
        return float(self.pmf[k - 1])

    def mean(self):
        return float(np.dot(np.arange(1, self.m + 1), self.pmf))


def q_fractional(n, k, m, alpha) -> Fraction:
    """Fractional part of ``alpha*k*n/m`` in exact arithmetic."""
    from .multiple_testing import as_rational
    x = as_rational(alpha) * int(k) * int(n) / int(m)
    return x - (x.numerator // x.denominator)


def fdr_weights(n, m, alpha):
    """``(floor(alpha*k*n/m) + 1) / ((n + 1) * k)`` for k = 1..m, floors taken exactly."""
    from .multiple_testing import as_rational
    a = as_rational(alpha)
    num, den = a.numerator * int(n), a.denominator * int(m)
    return np.array([((num * k) // den + 1) / ((n + 1) * k) for k in range(1, m + 1)])


def theoretical_fdr_empirical_bh(n, m, m0, alpha, rdist: RejectionDistribution) -> float:
    """FDR of BH on empirical p-values from the law of R(i)."""
    if rdist.m != m:
        raise UsageError("rejection distribution has the wrong window length")
    w = fdr_weights(n, m, alpha)
    return float(m0 * math.fsum(w * rdist.pmf))


def expected_rejections(m, pi, alpha, beta) -> float:
    """``m*pi*(1 - beta) / (1 - alpha)``."""
    if alpha >= 1:
        raise DomainError("expected_rejections needs alpha < 1")
    return m * pi * (1.0 - beta) / (1.0 - alpha)


def mfdr_bh_prediction(alpha, m0, m, e_r1, e_r):
    """mFDR of BH predicted from the two expected rejection counts."""
    return alpha * m0 / m * e_r1 / e_r


class HeuristicGap(NamedTuple):
    e_r: float
    e_ri: float
    gap: float
    se_gap: float
    saturated: bool


def heuristic_gap(replications, alpha, generator, rng) -> HeuristicGap:
    """Monte-Carlo E[R] and E[R(i)] for BH at ``alpha``.

    ``generator(rng)`` returns ``(pvalues, labels)`` for one window. R(i) zeroes a
    null index chosen uniformly in each replication.
    """
    from .multiple_testing import bh
    r = np.empty(replications)
    ri = np.empty(replications)
    for b in range(replications):
        p, lab = generator(rng)
        p = np.asarray(p, dtype=float)
        nulls = np.nonzero(np.asarray(lab) == 0)[0]
        if nulls.size == 0:
            raise UsageError("heuristic_gap needs at least one null in each window")
        r[b] = bh(p, alpha).k_star
        q = p.copy()
        q[rng.choice(nulls)] = 0.0
        ri[b] = bh(q, alpha).k_star
    m = len(p)
    saturated = bool(np.all(r == m))
    if saturated:
        log.warning("BH rejects every hypothesis; the +1 heuristic does not apply")
    d = ri - r
    se = float(d.std(ddof=1) / math.sqrt(replications)) if replications > 1 else float("nan")
    return HeuristicGap(float(r.mean()), float(ri.mean()), float(ri.mean() - r.mean() - 1.0), se, saturated)


def _partitions(sizes):
    """Every assignment of labels to positions with the given group sizes (lexicographic)."""
    from itertools import combinations
    total = sum(sizes)

    def rec(remaining, gi):
        if gi == len(sizes) - 1:
            yield {gi: tuple(remaining)}
            return
        for combo in combinations(remaining, sizes[gi]):
            rest = [x for x in remaining if x not in combo]
            for tail in rec(rest, gi + 1):
                yield {gi: combo, **tail}

    for assign in rec(list(range(total)), 0):
        g = np.empty(total, dtype=np.int64)
        for gi, idx in assign.items():
            g[list(idx)] = gi
        yield g


def n_partitions(sizes):
    out, left = 1, sum(sizes)
    for s in sizes:
        out *= math.comb(left, s)
        left -= s
    return out


def max_gap(values, group_of, n_groups):
    sums = np.bincount(group_of, weights=values, minlength=n_groups)
    means = sums / np.bincount(group_of, minlength=n_groups)
    return float(means.max() - means.min())


def permutation_test_max_gap(groups, n_permutations=10_000, seed=0, rtol=1e-12):
    """Permutation p-value of the largest gap between group means.

    Enumerates every relabelling when there are at most ``n_permutations`` of them
    (p = share of relabellings at least as extreme); otherwise draws random
    relabellings and returns ``(1 + hits) / (1 + B)``.
    """
    from . import kernels
    from .rng import make_rng
    groups = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(groups) < 2:
        raise UsageError("need at least two groups")
    if any(g.size == 0 for g in groups):
        raise UsageError("every group must be non-empty")
    sizes = [g.size for g in groups]
    values = np.concatenate(groups)
    group_of = np.repeat(np.arange(len(groups)), sizes)
    obs = max_gap(values, group_of, len(groups))
    tol = rtol * max(1.0, abs(obs))
    total = n_partitions(sizes)
    if total <= n_permutations:
        hits = sum(max_gap(values, g, len(groups)) >= obs - tol for g in _partitions(sizes))
        return hits / total
    rng = make_rng(seed)
    hits = 0
    done = 0
    batch = 1000
    while done < n_permutations:
        b = min(batch, n_permutations - done)
        perms = rng.permuted(np.tile(np.arange(values.size), (b, 1)), axis=1)
        gaps = kernels.permutation_gaps(values, group_of, len(groups), perms)
        hits += int((gaps >= obs - tol).sum())
        done += b
    return (1 + hits) / (1 + n_permutations)
