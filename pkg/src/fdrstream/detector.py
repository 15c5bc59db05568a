"""Online detector: score, p-value, windowed threshold, decision, calibration update."""
from __future__ import annotations

import csv
import enum
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import kernels
from .errors import ConfigurationError, UsageError
from .generator import LabeledSeries
from .metrics import ConfusionCounts
from .multiple_testing import (BH, LORD3, MBH, bh, count_bounds, float_bounds, lord_gamma,
                               matching_ell, policy_level)
from .pvalues import CalibrationSpec, PValueKind, Strategy, count_at_least
from .scoring import Identity, ScoreFunction


class Windowing(str, enum.Enum):
    DISJOINT = "disjoint"
    OVERLAPPING = "overlapping"


class DetectionRecord(NamedTuple):
    t: int
    pvalue: float
    threshold: float
    decision: int
    label: Optional[int]


@dataclass(frozen=True)
class DetectorConfig:
    """Everything ``run_stream`` needs.

    ``survival`` maps scores to true p-values and is required for oracle
    p-values. Without ``calibration`` a sliding calibration set of the
    smallest size compatible with the policy level is used. ``reference`` is a sampler ``(rng, size) -> scores`` needed by
    the IID and overlapping-shift calibration strategies.
    """

    window_m: int = 100
    windowing: Windowing = Windowing.OVERLAPPING
    policy: object = field(default_factory=lambda: MBH(0.1, 0.01))
    pvalue_kind: PValueKind = PValueKind.EMPIRICAL
    calibration: Optional[CalibrationSpec] = None
    score: ScoreFunction = field(default_factory=Identity)
    survival: Optional[Callable] = None
    reference: Optional[Callable] = None
    force_n: bool = False

    def __post_init__(self):
        object.__setattr__(self, "windowing", Windowing(self.windowing))
        if self.calibration is None:
            # smallest n compatible with the policy level (ell = 1)
            from .multiple_testing import calibration_cardinality
            if isinstance(self.policy, (BH, MBH)):
                level = policy_level(self.policy, self.window_m)
            else:
                level = getattr(self.policy, "alpha", 0.1)
            object.__setattr__(self, "calibration",
                               CalibrationSpec(n=calibration_cardinality(self.window_m, level, 1)))
        object.__setattr__(self, "pvalue_kind", PValueKind(self.pvalue_kind))
        if int(self.window_m) != self.window_m or self.window_m < 1:
            raise ConfigurationError(f"window length must be a positive integer, got {self.window_m}")
        if not isinstance(self.policy, (BH, MBH, LORD3)):
            raise ConfigurationError(f"unknown threshold policy {self.policy!r}")
        if self.pvalue_kind is PValueKind.ORACLE and self.survival is None:
            raise ConfigurationError("oracle p-values need the reference survival function")
        strat = self.calibration.strategy
        if self.pvalue_kind is not PValueKind.ORACLE:
            if strat in (Strategy.IID, Strategy.OVERLAPPING_SHIFT) and self.reference is None:
                raise ConfigurationError(f"{strat.value} calibration needs a reference sampler")
            if strat is Strategy.OVERLAPPING_SHIFT and not (self.calibration.shift and 0 < self.calibration.shift <= 1):
                raise ConfigurationError("overlapping-shift calibration needs a shift in (0, 1]")
            if strat is Strategy.FIXED and (self.calibration.initial is None
                                            or self.calibration.initial.size != self.calibration.n):
                if self.reference is None:
                    raise ConfigurationError("fixed calibration needs n initial scores or a reference sampler")
        if (isinstance(self.policy, MBH) and self.pvalue_kind is PValueKind.EMPIRICAL
                and not self.force_n):
            level = self.policy.level_for(self.window_m)
            n = self.calibration.n
            if matching_ell(n, self.window_m, level) is None:
                from .multiple_testing import calibration_cardinality
                raise ConfigurationError(
                    f"calibration size n={n} does not satisfy n = ceil(ell*m/alpha') - 1 for any ell "
                    f"(m={self.window_m}, alpha'={float(level):.6g}; ell=1 gives "
                    f"{calibration_cardinality(self.window_m, level, 1)}); pass force_n to override")

    @property
    def is_window_policy(self):
        return not isinstance(self.policy, LORD3)


@dataclass
class DetectionResult(Sequence):
    """Per-step output, stored column-wise; indexing yields ``DetectionRecord``.

    ``decided`` is False for warm-up steps (calibration fill, first partial
    window, trailing partial block); those carry decision 0 and a NaN threshold.
    """

    pvalue: np.ndarray
    threshold: np.ndarray
    decision: np.ndarray
    decided: np.ndarray
    label: Optional[np.ndarray] = None
    counts: Optional[np.ndarray] = None
    denom: Optional[int] = None

    def __len__(self):
        return self.decision.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        lab = None if self.label is None else int(self.label[i])
        return DetectionRecord(i + 1, float(self.pvalue[i]), float(self.threshold[i]), int(self.decision[i]), lab)

    @property
    def t(self):
        return np.arange(1, len(self) + 1)

    def confusion(self, include_warmup=False, start=0, stop=None) -> ConfusionCounts:
        if self.label is None:
            raise UsageError("metrics need ground-truth labels")
        sel = np.zeros(len(self), dtype=bool)
        sel[start:stop] = True
        if not include_warmup:
            sel &= self.decided
        return ConfusionCounts.from_decisions(self.decision[sel], self.label[sel])

    def to_csv(self, fh, include_labels=True):
        w = csv.writer(fh, lineterminator="\n")
        with_lab = include_labels and self.label is not None
        w.writerow(["t", "pvalue", "threshold", "decision"] + (["label"] if with_lab else []))
        for rec in self:
            row = [rec.t, _fmt(rec.pvalue), _fmt(rec.threshold), rec.decision]
            if with_lab:
                row.append(rec.label)
            w.writerow(row)


def _fmt(x):
    return "" if x != x else repr(x)


def _window_decisions(values, bounds, m, windowing, start):
    """k* per step and decisions for precomputed window values from index ``start`` on."""
    L = values.shape[0]
    kstar = np.full(L, -1, dtype=np.int64)
    dec = np.zeros(L, dtype=np.int8)
    v = values[start:]
    ext = np.concatenate([[-np.inf], bounds])
    if windowing is Windowing.OVERLAPPING:
        k = kernels.sliding_stepup(np.ascontiguousarray(v), bounds, m)
        kstar[start:] = k
        ok = k > 0
        dec[start:][ok] = (v[ok] <= ext[k[ok]]).astype(np.int8)
    else:
        kb = kernels.block_stepup(np.ascontiguousarray(v), bounds, m)
        nfull = kb.shape[0] * m
        k = np.repeat(kb, m)
        kstar[start:start + nfull] = k
        dec[start:start + nfull] = (v[:nfull] <= ext[k]).astype(np.int8)
    return kstar, dec


def _fresh_counts(scores, n, reference, score_fn, rng, chunk=256):
    out = np.empty(scores.shape[0], dtype=np.int64)
    for lo in range(0, scores.shape[0], chunk):
        x = scores[lo:lo + chunk]
        z = score_fn(reference(rng, (x.shape[0], n)).ravel()).reshape(x.shape[0], n)
        out[lo:lo + chunk] = (z >= x[:, None]).sum(axis=1)
    return out


def _overlap_shift_counts(scores, n, shift, reference, score_fn, rng):
    T = scores.shape[0]
    starts = np.floor(np.arange(T) * shift * n).astype(np.int64)
    pool = score_fn(reference(rng, int(starts[-1]) + n))
    return kernels.overlap_counts(np.ascontiguousarray(pool, dtype=float), starts, n, scores)


def run_stream(series, config: DetectorConfig, rng=None) -> DetectionResult:
    """Run the detector over ``series`` (a LabeledSeries or raw values)."""
    if isinstance(series, LabeledSeries):
        values, labels = series.values, series.labels
    else:
        values, labels = np.asarray(series, dtype=float), None
    if values.ndim != 1:
        raise UsageError("series must be one-dimensional")
    scores = np.ascontiguousarray(config.score(values), dtype=float)
    m, L = config.window_m, scores.shape[0]
    policy = config.policy
    cal = config.calibration
    kind = config.pvalue_kind
    if rng is None:
        rng = np.random.default_rng(0)

    n = cal.n
    conformal = 1 if kind is PValueKind.CONFORMAL else 0
    sliding = kind is not PValueKind.ORACLE and cal.strategy in (Strategy.SLIDING_ESTIMATED, Strategy.SLIDING_ORACLE)
    warm = 0
    if sliding:
        init = cal.initial if cal.initial is not None else np.empty(0)
        warm = n - init.size
    need = warm + (m if config.is_window_policy else 1)
    if L < need:
        raise UsageError(f"series of length {L} is shorter than the warm-up ({warm}) plus one window ({need - warm})")
    if cal.strategy is Strategy.SLIDING_ORACLE and sliding and labels is None:
        raise UsageError("sliding-star calibration needs labels")

    thr_out = np.full(L, np.nan)
    pv_out = np.full(L, np.nan)
    counts = None
    denom = None

    if kind is PValueKind.ORACLE:
        p = np.asarray(config.survival(scores), dtype=float)
        pv_out[:] = p
        if isinstance(policy, LORD3):
            w0, b0 = policy.params()
            thr, dec = kernels.lord3_run(p, lord_gamma(L + 1), w0, b0)
            decided = np.ones(L, dtype=bool)
            thr_out[:] = thr
        else:
            level = policy_level(policy, m)
            kstar, dec = _window_decisions(p, float_bounds(level, m), m, config.windowing, 0)
            decided = kstar >= 0
            thr_out[decided] = float(level) * kstar[decided] / m
        return DetectionResult(pv_out, thr_out, dec, decided, labels)

    denom = n + conformal
    if sliding:
        mode = (kernels.MODE_LORD if isinstance(policy, LORD3)
                else kernels.MODE_OVERLAPPING if config.windowing is Windowing.OVERLAPPING
                else kernels.MODE_DISJOINT)
        if isinstance(policy, LORD3):
            w0, b0 = policy.params()
            bounds = np.zeros(m)
            gamma = lord_gamma(L + 1)
        else:
            w0 = b0 = 0.0
            level = policy_level(policy, m)
            bounds = count_bounds(level, m, denom)
            gamma = np.zeros(1)
        use_labels = cal.strategy is Strategy.SLIDING_ORACLE
        lab = labels if labels is not None else np.zeros(L, dtype=np.int8)
        counts, kstar, thr, dec = kernels.sliding_calibration_loop(
            scores, np.ascontiguousarray(lab, dtype=np.int8), use_labels, np.ascontiguousarray(init, dtype=float),
            int(n), int(m), int(mode), bounds, int(conformal), gamma, float(w0), float(b0))
        has_p = counts >= 0
        if isinstance(policy, LORD3):
            decided = has_p
            thr_out = thr
        else:
            decided = kstar >= 0
            thr_out[decided] = float(level) * kstar[decided] / m
    else:
        if cal.strategy is Strategy.FIXED:
            calib = cal.initial
            if calib is None or calib.size != n:
                calib = config.score(config.reference(rng, n))
            counts = count_at_least(np.sort(calib), scores).astype(np.int64)
        elif cal.strategy is Strategy.IID:
            counts = _fresh_counts(scores, n, config.reference, config.score, rng)
        else:
            counts = _overlap_shift_counts(scores, n, cal.shift, config.reference, config.score, rng)
        has_p = np.ones(L, dtype=bool)
        v = (counts + conformal).astype(float)
        if isinstance(policy, LORD3):
            w0, b0 = policy.params()
            thr_out, dec = kernels.lord3_run(v / denom, lord_gamma(L + 1), w0, b0)
            decided = has_p
        else:
            level = policy_level(policy, m)
            kstar, dec = _window_decisions(v, count_bounds(level, m, denom), m, config.windowing, 0)
            decided = kstar >= 0
            thr_out[decided] = float(level) * kstar[decided] / m
    pv_out[has_p] = (counts[has_p] + conformal) / denom
    return DetectionResult(pv_out, thr_out, dec, decided, labels, counts, denom)


def decide_point(window_pvalues, policy, index):
    """Threshold of ``policy`` on a full window and the decision for the p-value at ``index``."""
    window = list(window_pvalues)
    if not 0 <= index < len(window):
        raise UsageError(f"index {index} outside a window of length {len(window)}")
    res = bh(window, policy_level(policy, len(window)))
    return res.threshold, int(index in set(res.rejected.tolist()))
