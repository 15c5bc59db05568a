"""Hot loops with two interchangeable implementations.

Each public kernel has a numba version (``*_jit``) and a pure numpy / Python
version (``*_np``). The module-level names point to one or the other
depending on ``FDRSTREAM_DISABLE_NUMBA``. Step-up comparisons take a
per-rank ``bounds`` array so the same code serves lattice counts (integer
bounds, exact in float64) and float p-values (bounds rounded down).
"""
from bisect import bisect_left, insort
from collections import deque

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._accel import USE_NUMBA, njit

MODE_OVERLAPPING = 0
MODE_DISJOINT = 1
MODE_LORD = 2


# ---------------------------------------------------------------- step-up

@njit
def _lower_bound(arr, size, x):
    lo, hi = 0, size
    while lo < hi:
        mid = (lo + hi) >> 1
        if arr[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit
def _sorted_insert(arr, size, x):
    pos = _lower_bound(arr, size, x)
    for j in range(size, pos, -1):
        arr[j] = arr[j - 1]
    arr[pos] = x


@njit
def _sorted_remove(arr, size, x):
    pos = _lower_bound(arr, size, x)
    for j in range(pos, size - 1):
        arr[j] = arr[j + 1]


@njit
def _stepup_sorted(sorted_vals, bounds, m):
    for k in range(m - 1, -1, -1):
        if sorted_vals[k] <= bounds[k]:
            return k + 1
    return 0


def stepup_rows(sorted_rows, bounds):
    """Vectorised k* for each row of an ascending-sorted matrix."""
    mask = sorted_rows <= bounds
    last = mask.shape[1] - np.argmax(mask[:, ::-1], axis=1)
    return np.where(mask.any(axis=1), last, 0).astype(np.int64)


@njit
def _sliding_stepup_jit(values, bounds, m):
    L = values.shape[0]
    out = np.full(L, -1, dtype=np.int64)
    if L < m:
        return out
    win = np.sort(values[:m].copy())
    out[m - 1] = _stepup_sorted(win, bounds, m)
    for t in range(m, L):
        _sorted_remove(win, m, values[t - m])
        _sorted_insert(win, m - 1, values[t])
        out[t] = _stepup_sorted(win, bounds, m)
    return out


def _sliding_stepup_np(values, bounds, m, chunk=20000):
    values = np.asarray(values, dtype=float)
    L = values.shape[0]
    out = np.full(L, -1, dtype=np.int64)
    if L < m:
        return out
    view = sliding_window_view(values, m)
    for lo in range(0, view.shape[0], chunk):
        rows = np.sort(view[lo:lo + chunk], axis=1)
        out[m - 1 + lo:m - 1 + lo + rows.shape[0]] = stepup_rows(rows, bounds)
    return out


@njit
def _block_stepup_jit(values, bounds, m):
    nb = values.shape[0] // m
    out = np.zeros(nb, dtype=np.int64)
    for b in range(nb):
        block = np.sort(values[b * m:(b + 1) * m].copy())
        out[b] = _stepup_sorted(block, bounds, m)
    return out


def _block_stepup_np(values, bounds, m):
    nb = len(values) // m
    rows = np.sort(np.asarray(values[:nb * m], dtype=float).reshape(nb, m), axis=1)
    return stepup_rows(rows, bounds)


# ---------------------------------------------------------------- LORD

@njit
def _lord3_run_jit(pvals, gamma, w0, b0):
    T = pvals.shape[0]
    thr = np.empty(T)
    dec = np.zeros(T, dtype=np.int8)
    wealth = w0
    w_tau = w0
    tau = 0
    for i in range(T):
        step = i + 1
        a = gamma[step - tau - 1] * w_tau
        thr[i] = a
        wealth -= a
        if pvals[i] <= a:
            dec[i] = 1
            wealth += b0
            tau = step
            w_tau = wealth
    return thr, dec


def _lord3_run_np(pvals, gamma, w0, b0):
    T = len(pvals)
    thr = np.empty(T)
    dec = np.zeros(T, dtype=np.int8)
    wealth = w_tau = float(w0)
    tau = 0
    g = gamma.tolist()
    for i, p in enumerate(np.asarray(pvals, dtype=float).tolist()):
        a = g[i - tau] * w_tau
        thr[i] = a
        wealth -= a
        if p <= a:
            dec[i] = 1
            wealth += b0
            tau = i + 1
            w_tau = wealth
    return thr, dec


# ---------------------------------------------------------------- calibration-driven loop

@njit
def _sliding_calibration_loop_jit(scores, labels, use_labels, init_calib, n, m, mode,
                                  bounds, conformal, gamma, w0, b0):
    L = scores.shape[0]
    counts = np.full(L, -1, dtype=np.int64)
    kstar = np.full(L, -1, dtype=np.int64)
    thr = np.full(L, np.nan)
    dec = np.zeros(L, dtype=np.int8)

    ring = np.empty(n)
    srt = np.empty(n)
    size = 0
    head = 0
    for j in range(init_calib.shape[0]):
        ring[j] = init_calib[j]
        _sorted_insert(srt, size, init_calib[j])
        size += 1

    wring = np.empty(m)
    wsrt = np.empty(m)
    wsize = 0
    whead = 0
    pending = np.empty(m, dtype=np.int64)
    npend = 0

    denom = n + conformal
    wealth = w0
    w_tau = w0
    tau = 0
    step = 0

    for t in range(L):
        s = scores[t]
        if size < n:
            ring[(head + size) % n] = s
            _sorted_insert(srt, size, s)
            size += 1
            continue
        c = n - _lower_bound(srt, n, s)
        counts[t] = c
        v = float(c + conformal)

        n_upd = 0
        if mode == 2:
            step += 1
            a = gamma[step - tau - 1] * w_tau
            thr[t] = a
            wealth -= a
            if v / denom <= a:
                dec[t] = 1
                wealth += b0
                tau = step
                w_tau = wealth
            pending[0] = t
            n_upd = 1
        elif mode == 0:
            if wsize == m:
                _sorted_remove(wsrt, m, wring[whead])
                wring[whead] = v
                whead = (whead + 1) % m
                _sorted_insert(wsrt, m - 1, v)
            else:
                wring[(whead + wsize) % m] = v
                _sorted_insert(wsrt, wsize, v)
                wsize += 1
            if wsize == m:
                k = _stepup_sorted(wsrt, bounds, m)
                kstar[t] = k
                if k > 0 and v <= bounds[k - 1]:
                    dec[t] = 1
            pending[0] = t
            n_upd = 1
        else:
            pending[npend] = t
            npend += 1
            if npend == m:
                block = np.empty(m)
                for j in range(m):
                    block[j] = counts[pending[j]] + conformal
                block.sort()
                k = _stepup_sorted(block, bounds, m)
                for j in range(m):
                    u = pending[j]
                    kstar[u] = k
                    if k > 0 and counts[u] + conformal <= bounds[k - 1]:
                        dec[u] = 1
                n_upd = m
                npend = 0

        for j in range(n_upd):
            u = pending[j]
            keep = labels[u] == 0 if use_labels else dec[u] == 0
            if keep:
                _sorted_remove(srt, n, ring[head])
                ring[head] = scores[u]
                head = (head + 1) % n
                _sorted_insert(srt, n - 1, scores[u])
    return counts, kstar, thr, dec


def _sliding_calibration_loop_np(scores, labels, use_labels, init_calib, n, m, mode,
                                 bounds, conformal, gamma, w0, b0):
    """Reference implementation on Python lists, deque and bisect."""
    scores_l = np.asarray(scores, dtype=float).tolist()
    labels_l = np.asarray(labels).tolist()
    bounds_l = np.asarray(bounds, dtype=float).tolist()
    L = len(scores_l)
    counts = np.full(L, -1, dtype=np.int64)
    kstar = np.full(L, -1, dtype=np.int64)
    thr = np.full(L, np.nan)
    dec = np.zeros(L, dtype=np.int8)

    fifo = deque(np.asarray(init_calib, dtype=float).tolist())
    srt = sorted(fifo)
    window = deque()
    wsrt = []
    pending = []
    denom = n + conformal
    wealth = w_tau = float(w0)
    tau = step = 0

    def stepup(sorted_vals):
        for k in range(m, 0, -1):
            if sorted_vals[k - 1] <= bounds_l[k - 1]:
                return k
        return 0

    for t, s in enumerate(scores_l):
        if len(fifo) < n:
            fifo.append(s)
            insort(srt, s)
            continue
        c = n - bisect_left(srt, s)
        counts[t] = c
        v = float(c + conformal)
        done = []
        if mode == MODE_LORD:
            step += 1
            a = gamma[step - tau - 1] * w_tau
            thr[t] = a
            wealth -= a
            if v / denom <= a:
                dec[t] = 1
                wealth += b0
                tau = step
                w_tau = wealth
            done = [t]
        elif mode == MODE_OVERLAPPING:
            if len(window) == m:
                old = window.popleft()
                del wsrt[bisect_left(wsrt, old)]
            window.append(v)
            insort(wsrt, v)
            if len(window) == m:
                k = stepup(wsrt)
                kstar[t] = k
                if k > 0 and v <= bounds_l[k - 1]:
                    dec[t] = 1
            done = [t]
        else:
            pending.append(t)
            if len(pending) == m:
                k = stepup(sorted(float(counts[u] + conformal) for u in pending))
                for u in pending:
                    kstar[u] = k
                    if k > 0 and counts[u] + conformal <= bounds_l[k - 1]:
                        dec[u] = 1
                done, pending = pending, []
        for u in done:
            keep = labels_l[u] == 0 if use_labels else dec[u] == 0
            if keep:
                old = fifo.popleft()
                del srt[bisect_left(srt, old)]
                fifo.append(scores_l[u])
                insort(srt, scores_l[u])
    return counts, kstar, thr, dec


# ---------------------------------------------------------------- overlapping calibration counts

@njit
def _overlap_counts_jit(pool, starts, n, x):
    out = np.empty(x.shape[0], dtype=np.int64)
    for i in range(x.shape[0]):
        c = 0
        s0 = starts[i]
        for j in range(s0, s0 + n):
            if pool[j] >= x[i]:
                c += 1
        out[i] = c
    return out


def _overlap_counts_np(pool, starts, n, x):
    view = sliding_window_view(np.asarray(pool, dtype=float), n)
    return (view[np.asarray(starts)] >= np.asarray(x, dtype=float)[:, None]).sum(axis=1).astype(np.int64)


# ---------------------------------------------------------------- permutation max-gap

@njit
def _max_gap(values, group_of, n_groups):
    sums = np.zeros(n_groups)
    cnt = np.zeros(n_groups)
    for i in range(values.shape[0]):
        g = group_of[i]
        sums[g] += values[i]
        cnt[g] += 1.0
    lo = np.inf
    hi = -np.inf
    for g in range(n_groups):
        mu = sums[g] / cnt[g]
        lo = min(lo, mu)
        hi = max(hi, mu)
    return hi - lo


@njit
def _permutation_gaps_jit(values, group_of, n_groups, perms):
    out = np.empty(perms.shape[0])
    for b in range(perms.shape[0]):
        out[b] = _max_gap(values[perms[b]], group_of, n_groups)
    return out


def _permutation_gaps_np(values, group_of, n_groups, perms):
    onehot = np.zeros((len(group_of), n_groups))
    onehot[np.arange(len(group_of)), group_of] = 1.0
    means = (np.asarray(values, dtype=float)[perms] @ onehot) / onehot.sum(axis=0)
    return means.max(axis=1) - means.min(axis=1)


if USE_NUMBA:
    sliding_stepup = _sliding_stepup_jit
    block_stepup = _block_stepup_jit
    lord3_run = _lord3_run_jit
    sliding_calibration_loop = _sliding_calibration_loop_jit
    overlap_counts = _overlap_counts_jit
    permutation_gaps = _permutation_gaps_jit
else:
    sliding_stepup = _sliding_stepup_np
    block_stepup = _block_stepup_np
    lord3_run = _lord3_run_np
    sliding_calibration_loop = _sliding_calibration_loop_np
    overlap_counts = _overlap_counts_np
    permutation_gaps = _permutation_gaps_np

IMPLEMENTATIONS = {
    "sliding_stepup": (_sliding_stepup_jit, _sliding_stepup_np),
    "block_stepup": (_block_stepup_jit, _block_stepup_np),
    "lord3_run": (_lord3_run_jit, _lord3_run_np),
    "sliding_calibration_loop": (_sliding_calibration_loop_jit, _sliding_calibration_loop_np),
    "overlap_counts": (_overlap_counts_jit, _overlap_counts_np),
    "permutation_gaps": (_permutation_gaps_jit, _permutation_gaps_np),
}
