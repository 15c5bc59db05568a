"""Batched Monte-Carlo for BH on one window of m p-values.

Replications are processed in chunks; chunk ``j`` of a scenario draws from
``make_rng(seed, *key, j)`` so results do not depend on how work is split
across processes.

Independent calibration sets (one per p-value) can be simulated two ways:

* ``route="binomial"``: given x, ``#{Z >= x}`` is Binomial(n, S(x)) for
  Z ~ P0, so the count is drawn directly. Exact in distribution.
* ``route="direct"``: draw the n calibration points and count. Slow; kept as
  a cross-check of the binomial route.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import stepup_rows
from .multiple_testing import count_bounds, float_bounds
from .rng import make_rng

KINDS = ("empirical", "conformal", "oracle")


@dataclass
class WindowMC:
    """Per-replication counts for one scenario."""

    rejections: np.ndarray
    false_positives: np.ndarray
    false_negatives: np.ndarray
    r_i: np.ndarray
    m1: int

    @property
    def fdp(self):
        r = self.rejections
        return np.where(r > 0, self.false_positives / np.maximum(r, 1), 0.0)

    @property
    def fnp(self):
        return self.false_negatives / self.m1 if self.m1 else np.zeros(self.rejections.shape)

    def summary(self):
        b = self.rejections.shape[0]
        f, g = self.fdp, self.fnp
        return {
            "fdr": float(f.mean()), "fdr_se": float(f.std(ddof=1) / np.sqrt(b)),
            "fnr": float(g.mean()), "fnr_se": float(g.std(ddof=1) / np.sqrt(b)),
            "mean_r": float(self.rejections.mean()), "mean_r_i": float(self.r_i.mean()),
            "replications": b,
        }

    @classmethod
    def concat(cls, parts):
        return cls(*(np.concatenate([getattr(p, a) for p in parts])
                     for a in ("rejections", "false_positives", "false_negatives", "r_i")), parts[0].m1)


def draw_window(rng, b, m, m1, ref, delta):
    """Observations (b, m): the first ``m1`` columns are anomalies at ``delta``."""
    x = np.empty((b, m))
    x[:, :m1] = delta
    x[:, m1:] = ref.sample(rng, (b, m - m1))
    return x


def iid_counts(rng, x, n, ref, route="binomial"):
    """``#{Z_i >= x_i}`` with an independent calibration set of size n for every entry."""
    if route == "binomial":
        return rng.binomial(n, ref.sf(x)).astype(np.int64)
    if route != "direct":
        raise ValueError(f"unknown route {route!r}")
    out = np.empty(x.shape, dtype=np.int64)
    flat, res = x.ravel(), out.ravel()
    step = max(1, 2_000_000 // n)
    for lo in range(0, flat.size, step):
        xs = flat[lo:lo + step]
        z = ref.sample(rng, (xs.size, n))
        res[lo:lo + step] = (z >= xs[:, None]).sum(axis=1)
    return out


def evaluate_rows(values, bounds, m1, zero_col, zero_value):
    """BH on every row of ``values``; also R(i) with column ``zero_col[row]`` set to ``zero_value``.

    R(i) reuses the sorted row: dropping one entry and prepending the zero
    shifts every rank below the dropped entry's position up by one.
    """
    b, m = values.shape
    srt = np.sort(values, axis=1)
    k = stepup_rows(srt, bounds)
    ext = np.concatenate([[-np.inf], bounds])
    rej = values <= ext[k][:, None]
    rows = np.arange(b)
    v0 = values[rows, zero_col]
    pos = (srt < v0[:, None]).sum(axis=1)
    shifted = np.empty_like(srt)
    shifted[:, 0] = zero_value
    shifted[:, 1:] = srt[:, :-1]
    mod = np.where(np.arange(m)[None, :] <= pos[:, None], shifted, srt)
    k_i = stepup_rows(mod, bounds)
    fp = rej[:, m1:].sum(axis=1)
    fn = m1 - rej[:, :m1].sum(axis=1)
    return k, fp, fn, k_i


def simulate_window(n, m, m1, alpha, ref, delta, reps, seed, key=(), kinds=("empirical",),
                    route="binomial", chunk=2000):
    """Run BH on ``reps`` windows with independent calibration sets.

    Every requested p-value kind is evaluated on the same draws (common random
    numbers), so differences between kinds are paired.
    """
    out = {k: [] for k in kinds}
    emp_bounds = count_bounds(alpha, m, n)
    conf_bounds = count_bounds(alpha, m, n + 1)
    fl_bounds = float_bounds(alpha, m)
    for j, lo in enumerate(range(0, reps, chunk)):
        b = min(chunk, reps - lo)
        rng = make_rng(seed, *key, j)
        x = draw_window(rng, b, m, m1, ref, delta)
        zero_col = m1 + rng.integers(0, m - m1, size=b) if m > m1 else np.zeros(b, dtype=np.int64)
        need_counts = any(k != "oracle" for k in kinds)
        counts = iid_counts(rng, x, n, ref, route).astype(float) if need_counts else None
        for kind in kinds:
            if kind == "empirical":
                res = evaluate_rows(counts, emp_bounds, m1, zero_col, 0.0)
            elif kind == "conformal":
                res = evaluate_rows(counts + 1.0, conf_bounds, m1, zero_col, 0.0)
            elif kind == "oracle":
                res = evaluate_rows(ref.sf(x), fl_bounds, m1, zero_col, 0.0)
            else:
                raise ValueError(f"unknown p-value kind {kind!r}")
            out[kind].append(WindowMC(*res, m1=m1))
    return {k: WindowMC.concat(v) for k, v in out.items()}


def uniform_window_counts(rng, b, m, m1, n):
    """Lattice null p-values with anomalies at p = 0, for exact-formula checks."""
    c = rng.integers(0, n + 1, size=(b, m))
    c[:, :m1] = 0
    return c


def oracle_windows(rng, b, m, m1, delta):
    """Uniform null p-values and U(0, 1/delta) anomaly p-values; anomalies first."""
    p = rng.random((b, m))
    p[:, :m1] /= delta
    return p


def oracle_window_counts(p, m1, alpha, m):
    """(R, FP, FN) per row of float p-values under BH at ``alpha``."""
    bounds = float_bounds(alpha, m)
    k = stepup_rows(np.sort(p, axis=1), bounds)
    ext = np.concatenate([[-np.inf], bounds])
    rej = p <= ext[k][:, None]
    return rej.sum(axis=1), rej[:, m1:].sum(axis=1), m1 - rej[:, :m1].sum(axis=1)
