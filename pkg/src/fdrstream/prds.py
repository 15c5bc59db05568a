"""Calibration-set overlap experiments and a one-coordinate PRDS surrogate."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import kernels
from .errors import ConfigurationError
from .generator import GaussianStd
from .metrics import permutation_test_max_gap
from .multiple_testing import as_rational, count_bounds
from .rng import make_rng
from .simulation import draw_window, evaluate_rows, iid_counts

TABLE_N = (249, 250, 499, 500, 749, 750, 999, 1000)
TABLE_SHIFTS = ("0.001", "0.002", "0.005", "0.01", "0.02", "0.05", "0.1", "0.2", "0.5")
BONFERRONI_THRESHOLD = 0.05 / 8


class OverlapKind(str, enum.Enum):
    SAME = "same"
    OVERLAP = "overlap"
    IID = "iid"


@dataclass(frozen=True)
class OverlapScenario:
    strategy: OverlapKind
    n: int
    s: Optional[Fraction] = None
    m: int = 100
    m1: int = 1
    alpha: float = 0.1
    delta: float = 4.0
    replications: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "strategy", OverlapKind(self.strategy))
        if self.strategy is OverlapKind.OVERLAP:
            if self.s is None:
                raise ConfigurationError("overlapping calibration needs a shift s")
            s = as_rational(self.s)
            if not 0 < s <= 1:
                raise ConfigurationError(f"shift must lie in (0, 1], got {self.s}")
            object.__setattr__(self, "s", s)

    @property
    def label(self):
        if self.strategy is OverlapKind.OVERLAP:
            return f"Over Cal. (s={float(self.s) * 100:g}%)"
        return {"same": "Same Cal.", "iid": "iid Cal."}[self.strategy.value]


def overlap_starts(m, n, s):
    """0-based start of each window: ``floor(i*s*n)`` for i = 1..m, in exact arithmetic."""
    s = as_rational(s)
    return np.array([(i * s * n).numerator // (i * s * n).denominator for i in range(1, m + 1)], dtype=np.int64)


def scenario_counts(sc: OverlapScenario, rng, x):
    """Calibration counts ``#{Z >= x_i}`` for a batch of windows ``x`` (b, m)."""
    b, m = x.shape
    ref = GaussianStd()
    if sc.strategy is OverlapKind.IID:
        return iid_counts(rng, x, sc.n, ref)
    out = np.empty((b, m), dtype=np.int64)
    if sc.strategy is OverlapKind.SAME:
        z = np.sort(ref.sample(rng, (b, sc.n)), axis=1)
        for r in range(b):
            out[r] = sc.n - np.searchsorted(z[r], x[r], side="left")
        return out
    starts = overlap_starts(m, sc.n, sc.s)
    pool_len = int(starts[-1]) + sc.n
    for r in range(b):
        pool = ref.sample(rng, pool_len)
        out[r] = kernels.overlap_counts(pool, starts, sc.n, np.ascontiguousarray(x[r]))
    return out


def run_scenario(sc: OverlapScenario, seed, key=()):
    """FDP, FNP and R for each replication of one cell."""
    rng = make_rng(seed, *key)
    x = draw_window(rng, sc.replications, sc.m, sc.m1, GaussianStd(), sc.delta)
    counts = scenario_counts(sc, rng, x).astype(float)
    zero_col = np.full(sc.replications, sc.m - 1)
    k, fp, fn, _ = evaluate_rows(counts, count_bounds(sc.alpha, sc.m, sc.n), sc.m1, zero_col, 0.0)
    fdp = np.where(k > 0, fp / np.maximum(k, 1), 0.0)
    return fdp, fn / sc.m1 if sc.m1 else np.zeros_like(fdp), k


def table_scenarios(n, replications=1000, shifts=TABLE_SHIFTS, **kw):
    out = [OverlapScenario(OverlapKind.SAME, n, replications=replications, **kw)]
    out += [OverlapScenario(OverlapKind.OVERLAP, n, Fraction(s), replications=replications, **kw) for s in shifts]
    out.append(OverlapScenario(OverlapKind.IID, n, replications=replications, **kw))
    return out


def run_overlap_grid(n_values=TABLE_N, seed=0, replications=1000, n_permutations=10_000, shifts=TABLE_SHIFTS, **kw):
    """Table of FDR per (strategy, n) plus the max-gap permutation p-value per n.

    Returns ``(cells, tests)``: ``cells`` is a list of dicts with the FDP
    samples under ``"fdp"``; ``tests`` maps n to its permutation p-value.
    """
    cells, tests = [], {}
    for ni, n in enumerate(n_values):
        groups = []
        for si, sc in enumerate(table_scenarios(n, replications, shifts, **kw)):
            fdp, fnp, r = run_scenario(sc, seed, key=(ni, si))
            groups.append(fdp)
            cells.append({"strategy": sc.label, "n": n, "fdr": float(fdp.mean()),
                          "fdr_se": float(fdp.std(ddof=1) / np.sqrt(fdp.size)),
                          "fnr": float(fnp.mean()), "fdp": fdp})
        tests[n] = permutation_test_max_gap(groups, n_permutations, seed=seed + ni)
    return cells, tests


def prds_sanity_check(sc: OverlapScenario, buckets=(0.0, 0.2, 0.4, 0.6, 0.8, 1.0), seed=0, replications=10_000):
    """Frequency of an increasing event given the bucket of one null p-value.

    The event is "BH at ``alpha`` on the other m-1 p-values rejects nothing",
    which is an increasing set. Under positive dependence its conditional
    frequency should not decrease as the conditioning p-value grows.
    """
    rng = make_rng(seed)
    m, n = sc.m, sc.n
    x = draw_window(rng, replications, m, 0, GaussianStd(), sc.delta)
    batch = OverlapScenario(sc.strategy, n, sc.s, m, 0, sc.alpha, sc.delta, replications)
    counts = scenario_counts(batch, rng, x).astype(float)
    p_i = counts[:, 0] / n
    others = np.sort(counts[:, 1:], axis=1)
    k = kernels.stepup_rows(others, count_bounds(sc.alpha, m - 1, n))
    event = (k == 0).astype(float)
    edges = np.asarray(buckets, dtype=float)
    idx = np.clip(np.searchsorted(edges, p_i, side="right") - 1, 0, len(edges) - 2)
    freq, se, size = [], [], []
    for j in range(len(edges) - 1):
        e = event[idx == j]
        size.append(int(e.size))
        freq.append(float(e.mean()) if e.size else float("nan"))
        se.append(float(e.std(ddof=1) / np.sqrt(e.size)) if e.size > 1 else float("nan"))
    freq, se = np.array(freq), np.array(se)
    diffs = np.diff(freq)
    tol = 3 * np.sqrt(se[1:] ** 2 + se[:-1] ** 2)
    return {"buckets": list(zip(edges[:-1], edges[1:])), "frequency": freq, "se": se, "size": size,
            "monotone": bool(np.all(diffs >= -tol)),
            "flat": bool(np.all(np.abs(freq - freq.mean()) <= 3 * se))}
