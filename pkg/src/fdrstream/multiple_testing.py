"""Benjamini-Hochberg, its deflated variant mBH, and the LORD3 online rule."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Optional

import numpy as np

from .errors import ConfigurationError, StateError, UsageError
from .pvalues import LatticeP

GAMMA_HORIZON = 10**7


def as_rational(x) -> Fraction:
    """Exact rational for ``x``; floats go through their shortest decimal repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer, Rational)):
        return Fraction(int(x)) if isinstance(x, (int, np.integer)) else Fraction(x)
    if isinstance(x, LatticeP):
        return x.value
    xf = float(x)
    if not math.isfinite(xf):
        raise ConfigurationError(f"{x!r} is not finite")
    return Fraction(repr(xf))


def _check_alpha(alpha):
    a = as_rational(alpha)
    if not (0 < a <= 1):
        raise ConfigurationError(f"alpha must lie in (0, 1], got {alpha}")
    return a


def floor_div(num: Fraction) -> int:
    return num.numerator // num.denominator


def count_bounds(alpha, m, denom):
    """``floor(alpha*k*denom/m)`` for k = 1..m.

    A lattice p-value ``c/denom`` passes rank k exactly when ``c`` is at most
    this bound. Returned as float64 (exact for these magnitudes).
    """
    a = as_rational(alpha)
    num = a.numerator * int(denom)
    den = a.denominator * int(m)
    return np.array([(num * k) // den for k in range(1, m + 1)], dtype=float)


def _decimal_floor(x: Fraction) -> float:
    """Largest float whose shortest repr is at most ``x``.

    Shortest reprs are ordered like the floats themselves, so ``p <= bound``
    holds exactly when ``as_rational(p) <= x``.
    """
    f = float(x)
    while Fraction(repr(f)) > x:
        f = float(np.nextafter(f, -np.inf))
    while True:
        g = float(np.nextafter(f, np.inf))
        if Fraction(repr(g)) > x:
            return f
        f = g


def float_bounds(alpha, m):
    """Float cut-offs for ``alpha*k/m``, k = 1..m.

    A float p-value passes rank k exactly when its decimal value
    (``as_rational(p)``) is at most ``alpha*k/m``.
    """
    a = as_rational(alpha)
    return np.array([_decimal_floor(a * k / m) for k in range(1, m + 1)])


@dataclass(frozen=True)
class BHResult:
    threshold: Fraction
    rejected: np.ndarray = field(repr=False)
    k_star: int

    @property
    def eps(self):
        return self.threshold

    def mask(self, m):
        out = np.zeros(m, dtype=bool)
        out[self.rejected] = True
        return out


def _result(alpha, m, k, rejected):
    thr = alpha * k / m if k else Fraction(0)
    return BHResult(thr, np.asarray(rejected, dtype=np.int64), int(k))


def _stepup(sorted_vals, bounds):
    hits = np.nonzero(sorted_vals <= bounds)[0]
    return int(hits[-1]) + 1 if hits.size else 0


def bh_counts(counts, n, alpha) -> BHResult:
    """BH on lattice p-values ``counts / n`` with integer-only comparisons."""
    a = _check_alpha(alpha)
    c = np.asarray(counts, dtype=np.int64)
    if c.ndim != 1 or c.size == 0:
        raise UsageError("bh needs at least one p-value")
    if c.min() < 0 or c.max() > n:
        raise UsageError("lattice counts must lie in [0, n]")
    m = c.size
    bounds = count_bounds(a, m, n)
    k = _stepup(np.sort(c).astype(float), bounds)
    rejected = np.nonzero(c <= bounds[k - 1])[0] if k else []
    return _result(a, m, k, rejected)


def _classify(pvalues):
    if isinstance(pvalues, np.ndarray) and pvalues.dtype.kind == "f":
        return "float", pvalues
    seq = list(pvalues)
    if not seq:
        raise UsageError("bh needs at least one p-value")
    if all(isinstance(p, LatticeP) for p in seq):
        ns = {p.n for p in seq}
        if len(ns) == 1:
            return "lattice", seq
        return "exact", [p.value for p in seq]
    if any(isinstance(p, (Fraction, LatticeP)) for p in seq):
        return "exact", [as_rational(p) for p in seq]
    return "float", np.asarray(seq, dtype=float)


def bh(pvalues, alpha) -> BHResult:
    """Step-up BH: ``k* = max{k : p_(k) <= alpha*k/m}``, reject every ``p_i <= alpha*k*/m``."""
    a = _check_alpha(alpha)
    kind, ps = _classify(pvalues)
    if kind == "lattice":
        return bh_counts([p.count for p in ps], ps[0].n, a)
    if kind == "exact":
        if any(not (0 <= p <= 1) for p in ps):
            raise UsageError("p-values must lie in [0, 1]")
        m = len(ps)
        order = sorted(ps)
        k = 0
        for j in range(m, 0, -1):
            if order[j - 1] <= a * j / m:
                k = j
                break
        thr = a * k / m
        rejected = [i for i, p in enumerate(ps) if k and p <= thr]
        return _result(a, m, k, rejected)
    p = np.asarray(ps, dtype=float).ravel()
    if p.size == 0:
        raise UsageError("bh needs at least one p-value")
    if np.isnan(p).any() or p.min() < 0 or p.max() > 1:
        raise UsageError("p-values must lie in [0, 1]")
    m = p.size
    bounds = float_bounds(a, m)
    k = _stepup(np.sort(p), bounds)
    rejected = np.nonzero(p <= bounds[k - 1])[0] if k else []
    return _result(a, m, k, rejected)


def bh_bruteforce(pvalues, alpha) -> BHResult:
    """Quadratic oracle: try every k from m down to 1 with exact rationals, no sorting."""
    a = _check_alpha(alpha)
    ps = [as_rational(p) for p in pvalues]
    if not ps:
        raise UsageError("bh needs at least one p-value")
    if any(not (0 <= p <= 1) for p in ps):
        raise UsageError("p-values must lie in [0, 1]")
    m = len(ps)
    for k in range(m, 0, -1):
        thr = a * k / m
        below = [i for i, p in enumerate(ps) if p <= thr]
        if len(below) >= k:
            return _result(a, m, k, below)
    return _result(a, m, 0, [])


def mbh_alpha_prime(alpha, m, pi_hat) -> Fraction:
    """Deflated level ``alpha / (1 + (1 - alpha)/(m*pi))``, exact."""
    a = _check_alpha(alpha)
    if int(m) != m or m < 1:
        raise ConfigurationError(f"m must be a positive integer, got {m}")
    p = as_rational(pi_hat)
    if p <= 0:
        raise ConfigurationError("pi_hat must be positive")
    mp = int(m) * p
    return a * mp / (mp + 1 - a)


def calibration_cardinality(m, alpha_level, ell=1) -> int:
    """``ceil(ell*m/alpha) - 1``."""
    if int(ell) != ell or ell < 1:
        raise ConfigurationError(f"ell must be a positive integer, got {ell}")
    q = int(ell) * int(m) / _check_alpha(alpha_level)
    return -((-q.numerator) // q.denominator) - 1


def matching_ell(n, m, alpha_level) -> Optional[int]:
    """The ell with ``calibration_cardinality(m, alpha_level, ell) == n``, or None."""
    a = _check_alpha(alpha_level)
    guess = (int(n) + 1) * a / int(m)
    for ell in {max(1, floor_div(guess)), max(1, floor_div(guess) + 1)}:
        if calibration_cardinality(m, a, ell) == n:
            return ell
    return None


@dataclass(frozen=True)
class MBHConfig:
    alpha: float
    pi_hat: float
    m: int
    ell: int = 1

    def __post_init__(self):
        if self.pi_hat is None or not self.pi_hat > 0:
            raise ConfigurationError("mBH needs a positive pi_hat")
        _check_alpha(self.alpha)

    @property
    def alpha_prime(self) -> Fraction:
        return mbh_alpha_prime(self.alpha, self.m, self.pi_hat)

    @property
    def n_cal(self) -> int:
        return calibration_cardinality(self.m, self.alpha_prime, self.ell)


def mbh(pvalues, config: MBHConfig) -> BHResult:
    return bh(pvalues, config.alpha_prime)


# ---------------------------------------------------------------- LORD3

def _gamma_raw(j):
    j = np.asarray(j, dtype=float)
    return np.log(np.maximum(j, 2.0)) / (j * np.exp(np.sqrt(np.log(j))))


@lru_cache(maxsize=4)
def gamma_normaliser(horizon=GAMMA_HORIZON, chunk=1_000_000):
    """Sum of the raw weights over ``1..horizon``, accumulated in chunks."""
    total = math.fsum(
        float(_gamma_raw(np.arange(lo, min(lo + chunk, horizon + 1))).sum())
        for lo in range(1, horizon + 1, chunk)
    )
    return total


def lord_gamma(length, horizon=GAMMA_HORIZON):
    """First ``length`` terms of the normalised LORD weight sequence."""
    return _gamma_raw(np.arange(1, int(length) + 1)) / gamma_normaliser(horizon)


@dataclass(frozen=True)
class LordState:
    alpha: float
    w0: float
    b0: float
    gamma: Optional[np.ndarray] = field(repr=False, default=None)
    wealth: float = 0.0
    t: int = 0
    last_rejection_times: tuple = ()
    wealth_at_rejection: float = 0.0
    threshold: float = 0.0

    def gamma_at(self, j):
        if self.gamma is None:
            raise StateError("LORD weights are not initialised")
        if j <= self.gamma.shape[0]:
            return float(self.gamma[j - 1])
        return float(_gamma_raw(j)) / gamma_normaliser()


def lord3_defaults(alpha):
    w0 = float(alpha) / 2.0
    return w0, float(alpha) - w0


def lord3_init(alpha, w0=None, b0=None, gamma_length=10_000) -> LordState:
    """State ready for step 1, whose threshold is ``gamma_1 * w0``."""
    alpha = float(alpha)
    if not 0 < alpha < 1:
        raise ConfigurationError("LORD3 needs alpha in (0, 1)")
    d_w0, d_b0 = lord3_defaults(alpha)
    w0 = d_w0 if w0 is None else float(w0)
    b0 = d_b0 if b0 is None else float(b0)
    if not (0 < w0 <= alpha) or not (0 < b0 <= alpha):
        raise ConfigurationError("LORD3 needs 0 < w0 <= alpha and 0 < b0 <= alpha")
    state = LordState(alpha, w0, b0, lord_gamma(gamma_length), wealth=w0, wealth_at_rejection=w0)
    return replace(state, threshold=state.gamma_at(1) * w0)


def lord3_next(state: LordState, last_pvalue, last_decision):
    """Settle the current step and return ``(next threshold, next state)``.

    The threshold at step t is ``gamma_{t - tau} * W(tau)`` with tau the most
    recent rejection time (0 before any), and wealth moves by
    ``W(t) = W(t-1) - alpha_t + b0 * R_t``.
    """
    if state.gamma is None:
        raise StateError("LORD weights are not initialised")
    t = state.t + 1
    wealth = state.wealth - state.threshold
    times, w_tau = state.last_rejection_times, state.wealth_at_rejection
    if int(last_decision):
        wealth += state.b0
        times = times + (t,)
        w_tau = wealth
    tau = times[-1] if times else 0
    nxt = replace(state, wealth=wealth, t=t, last_rejection_times=times, wealth_at_rejection=w_tau)
    thr = nxt.gamma_at(t + 1 - tau) * w_tau
    return thr, replace(nxt, threshold=thr)


# ---------------------------------------------------------------- policies

@dataclass(frozen=True)
class BH:
    alpha: float

    def __post_init__(self):
        _check_alpha(self.alpha)

    @property
    def level(self):
        return as_rational(self.alpha)

    def __str__(self):
        return f"bh(alpha={self.alpha})"


@dataclass(frozen=True)
class MBH:
    alpha: float
    pi_hat: Optional[float] = None

    def __post_init__(self):
        if self.pi_hat is None:
            raise ConfigurationError("mBH needs pi_hat")
        _check_alpha(self.alpha)
        if not self.pi_hat > 0:
            raise ConfigurationError("pi_hat must be positive")

    def level_for(self, m):
        return mbh_alpha_prime(self.alpha, m, self.pi_hat)

    def __str__(self):
        return f"mbh(alpha={self.alpha}, pi={self.pi_hat})"


@dataclass(frozen=True)
class LORD3:
    alpha: float
    w0: Optional[float] = None
    b0: Optional[float] = None

    def __post_init__(self):
        lord3_init(self.alpha, self.w0, self.b0, gamma_length=1)

    def params(self):
        d_w0, d_b0 = lord3_defaults(self.alpha)
        return (d_w0 if self.w0 is None else self.w0), (d_b0 if self.b0 is None else self.b0)

    def __str__(self):
        return f"lord3(alpha={self.alpha})"


def policy_level(policy, m) -> Fraction:
    """Step-up level used on a window of length m."""
    if isinstance(policy, MBH):
        return policy.level_for(m)
    if isinstance(policy, BH):
        return policy.level
    raise UsageError(f"{policy} has no window level")
