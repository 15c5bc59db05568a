"""Empirical and conformal p-values and calibration-set maintenance.

P-values estimated from a calibration set live on a lattice, so they are kept
as an integer numerator over an integer denominator. Step-up comparisons on
them are then exact.
"""
from __future__ import annotations

import enum
from bisect import bisect_left, insort
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import ConfigurationError, StateError, UsageError


class LatticeP(NamedTuple):
    """The rational ``count / n``, kept unreduced."""

    count: int
    n: int

    @property
    def value(self) -> Fraction:
        return Fraction(self.count, self.n)

    def __float__(self):
        return self.count / self.n


class Strategy(str, enum.Enum):
    FIXED = "fixed"
    IID = "iid"
    SLIDING_ESTIMATED = "sliding"
    SLIDING_ORACLE = "sliding-star"
    OVERLAPPING_SHIFT = "overlapping-shift"


class PValueKind(str, enum.Enum):
    EMPIRICAL = "empirical"
    CONFORMAL = "conformal"
    ORACLE = "oracle"


def count_at_least(sorted_calib, s):
    """Number of calibration scores >= s (``sorted_calib`` ascending). Vectorises over ``s``."""
    sorted_calib = np.asarray(sorted_calib, dtype=float)
    return sorted_calib.shape[0] - np.searchsorted(sorted_calib, s, side="left")


class CalibrationSet:
    """A bounded buffer of reference scores maintained by one of five strategies.

    ``reference`` (a callable ``(rng, size) -> scores``) and ``rng`` are needed
    only by the simulation strategies IID and OverlappingShift.
    """

    def __init__(self, n, strategy=Strategy.FIXED, scores=(), shift=None,
                 reference: Optional[Callable] = None, rng=None):
        if int(n) != n or n < 1:
            raise ConfigurationError(f"calibration capacity must be a positive integer, got {n}")
        self.n = int(n)
        self.strategy = Strategy(strategy)
        if self.strategy is Strategy.OVERLAPPING_SHIFT:
            if shift is None or not (0 < shift <= 1):
                raise ConfigurationError("overlapping-shift strategy needs a shift s in (0, 1]")
        self.shift = shift
        self.reference = reference
        self.rng = rng
        if self.strategy in (Strategy.IID, Strategy.OVERLAPPING_SHIFT) and (reference is None or rng is None):
            raise ConfigurationError(f"{self.strategy.value} calibration needs a reference sampler and an rng")
        self._fifo = deque()
        self._sorted = []
        self._steps = 0
        for s in np.asarray(scores, dtype=float).ravel():
            self._push(float(s))

    def _push(self, s):
        if len(self._fifo) == self.n:
            old = self._fifo.popleft()
            del self._sorted[bisect_left(self._sorted, old)]
        self._fifo.append(s)
        insort(self._sorted, s)

    @property
    def scores(self):
        """Buffer content, oldest first."""
        return np.array(self._fifo)

    @property
    def sorted_scores(self):
        return np.array(self._sorted)

    def __len__(self):
        return len(self._fifo)

    @property
    def is_full(self):
        return len(self._fifo) == self.n

    def fill(self, scores=None):
        """Top the buffer up from ``scores`` or, for simulation strategies, from the reference."""
        if scores is None:
            if self.reference is None or self.rng is None:
                raise UsageError("fill() without scores needs a reference sampler")
            scores = self.reference(self.rng, self.n - len(self))
        for s in np.asarray(scores, dtype=float).ravel():
            if self.is_full and self.strategy is Strategy.FIXED:
                raise StateError("fixed calibration set is already full")
            self._push(float(s))
        return self

    def count(self, s):
        if not self.is_full:
            raise StateError(f"calibration set holds {len(self)} of {self.n} scores")
        return int(self.n - bisect_left(self._sorted, s))

    def update(self, x, decision, true_label=None):
        """Apply the strategy's maintenance rule after a decision on score ``x``."""
        st = self.strategy
        if st is Strategy.FIXED:
            return self
        if st is Strategy.SLIDING_ESTIMATED:
            if int(decision) == 0:
                self._push(float(x))
        elif st is Strategy.SLIDING_ORACLE:
            if true_label is None:
                raise UsageError("sliding-star calibration needs the true label")
            if int(true_label) == 0:
                self._push(float(x))
        elif st is Strategy.IID:
            fresh = np.asarray(self.reference(self.rng, self.n), dtype=float)
            self._fifo = deque(fresh.tolist())
            self._sorted = sorted(self._fifo)
        else:
            # cumulative offsets floor(i*s*n) so fractional shifts accumulate
            step = int(np.floor((self._steps + 1) * self.shift * self.n)) - int(np.floor(self._steps * self.shift * self.n))
            for s in np.asarray(self.reference(self.rng, step), dtype=float):
                self._push(float(s))
        self._steps += 1
        return self


def empirical_pvalue(s, calib: CalibrationSet) -> LatticeP:
    """``#{z >= s} / n`` as an exact lattice value."""
    if len(calib) == 0:
        raise StateError("empty calibration set")
    return LatticeP(calib.count(s), calib.n)


def conformal_pvalue(s, calib: CalibrationSet) -> LatticeP:
    """``(1 + #{z >= s}) / (n + 1)``."""
    if len(calib) == 0:
        raise StateError("empty calibration set")
    return LatticeP(calib.count(s) + 1, calib.n + 1)


def update_calibration(calib: CalibrationSet, x, decision, true_label=None) -> CalibrationSet:
    return calib.update(x, decision, true_label)


@dataclass(frozen=True)
class CalibrationSpec:
    """How the detector builds and maintains its calibration set."""

    strategy: Strategy = Strategy.SLIDING_ESTIMATED
    n: int = 999
    initial: Optional[np.ndarray] = None
    shift: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if int(self.n) != self.n or self.n < 1:
            raise ConfigurationError(f"calibration size must be a positive integer, got {self.n}")
        if self.initial is not None:
            init = np.asarray(self.initial, dtype=float).ravel()
            if init.size > self.n:
                raise ConfigurationError(f"initial calibration holds {init.size} scores, capacity is {self.n}")
            object.__setattr__(self, "initial", init)
