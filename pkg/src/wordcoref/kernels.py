"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import time: numba is used when it imports
cleanly, unless the environment variable ``WORDCOREF_NUMBA`` forces a choice
("0" -> numpy, "1" -> numba).  Both paths compute identical results (up to
floating-point associativity) and are exercised against each other in the
test suite and in ``benchmarks/bench_kernels.py``.
"""

import os

import numpy as np

_ENV = os.environ.get("WORDCOREF_NUMBA", "").strip()

if _ENV == "0":
    _numba = None
else:
    try:
        import numba as _numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _numba = None
        if _ENV == "1":
            raise

USE_NUMBA = _numba is not None


def active_backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# conv1d, kernel size 3, zero padding, two output channels in the main model
# (the kernels are generic in the channel count).
#   y[t, c] = b[c] + sum_{o in -1..1} sum_h x[t+o, h] * K[o+1, h, c]
# ---------------------------------------------------------------------------

def _conv1d_k3_forward_np(x, K, b):
    m = x.shape[0]
    c = K.shape[2]
    y = np.empty((m, c), dtype=x.dtype)
    y[:] = b
    y += x @ K[1]
    y[1:] += x[:-1] @ K[0]
    y[:-1] += x[1:] @ K[2]
    return y


def _conv1d_k3_backward_np(x, K, gy):
    gx = gy @ K[1].T
    gx[:-1] += gy[1:] @ K[0].T
    gx[1:] += gy[:-1] @ K[2].T
    gK = np.empty_like(K)
    gK[0] = x[:-1].T @ gy[1:]
    gK[1] = x.T @ gy
    gK[2] = x[1:].T @ gy[:-1]
    gb = gy.sum(axis=0)
    return gx, gK, gb


# ---------------------------------------------------------------------------
# Attention pooling over contiguous index ranges: every output row t is the
# softmax-weighted sum of input rows ranges[t, 0] .. ranges[t, 1] inclusive,
# with weights softmax(scores) restricted to the range.
# ---------------------------------------------------------------------------

def _segment_pool_forward_np(X, scores, ranges):
    n = ranges.shape[0]
    T = np.empty((n, X.shape[1]), dtype=X.dtype)
    w = np.empty(scores.shape[0], dtype=X.dtype)
    for t in range(n):
        a, b = ranges[t, 0], ranges[t, 1] + 1
        s = scores[a:b]
        e = np.exp(s - s.max())
        w[a:b] = e / e.sum()
        T[t] = w[a:b] @ X[a:b]
    return T, w


def _segment_pool_backward_np(X, w, ranges, gT):
    gX = np.zeros_like(X)
    gscores = np.zeros(X.shape[0], dtype=X.dtype)
    for t in range(ranges.shape[0]):
        a, b = ranges[t, 0], ranges[t, 1] + 1
        g = gT[t]
        gX[a:b] += np.outer(w[a:b], g)
        u = X[a:b] @ g
        gscores[a:b] = w[a:b] * (u - w[a:b] @ u)
    return gX, gscores


# ---------------------------------------------------------------------------
# Per-row selection of the k best left-candidates from a masked score matrix.
# Entry (i, j) is valid for j < i only; ties resolve toward the larger j
# (the nearer candidate).  Returns candidates sorted by ascending j plus a
# per-row count; rows are padded with zeros beyond their count.
# ---------------------------------------------------------------------------

def _topk_left_np(S, k):
    n = S.shape[0]
    width = max(1, min(k, n - 1))
    cand = np.zeros((n, width), dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    for i in range(1, n):
        row = S[i, :i]
        c = min(k, i)
        # primary: score descending; secondary: index descending
        order = np.lexsort((-np.arange(i), -row))[:c]
        order.sort()
        cand[i, :c] = order
        counts[i] = c
    return cand, counts


if USE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _conv1d_k3_forward_nb(x, K, b):
        m = x.shape[0]
        c = K.shape[2]
        y = np.empty((m, c), dtype=x.dtype)
        for t in range(m):
            for j in range(c):
                y[t, j] = b[j]
        y += x @ np.ascontiguousarray(K[1])
        if m > 1:
            y[1:] += x[:-1] @ np.ascontiguousarray(K[0])
            y[:-1] += x[1:] @ np.ascontiguousarray(K[2])
        return y

    @njit(cache=True)
    def _conv1d_k3_backward_nb(x, K, gy):
        m = x.shape[0]
        c = K.shape[2]
        gx = gy @ np.ascontiguousarray(K[1]).T
        gK = np.zeros_like(K)
        gK[1] = x.T @ gy
        if m > 1:
            gx[:-1] += gy[1:] @ np.ascontiguousarray(K[0]).T
            gx[1:] += gy[:-1] @ np.ascontiguousarray(K[2]).T
            gK[0] = x[:-1].T @ gy[1:]
            gK[2] = x[1:].T @ gy[:-1]
        gb = np.zeros(c, dtype=x.dtype)
        for t in range(m):
            for j in range(c):
                gb[j] += gy[t, j]
        return gx, gK, gb

    @njit(cache=True)
    def _segment_pool_forward_nb(X, scores, ranges):
        n = ranges.shape[0]
        d = X.shape[1]
        T = np.zeros((n, d), dtype=X.dtype)
        w = np.empty(scores.shape[0], dtype=X.dtype)
        for t in range(n):
            a = ranges[t, 0]
            b = ranges[t, 1] + 1
            mx = scores[a]
            for r in range(a + 1, b):
                if scores[r] > mx:
                    mx = scores[r]
            z = 0.0
            for r in range(a, b):
                w[r] = np.exp(scores[r] - mx)
                z += w[r]
            for r in range(a, b):
                w[r] /= z
                for q in range(d):
                    T[t, q] += w[r] * X[r, q]
        return T, w

    @njit(cache=True)
    def _segment_pool_backward_nb(X, w, ranges, gT):
        s, d = X.shape
        gX = np.zeros((s, d), dtype=X.dtype)
        gscores = np.zeros(s, dtype=X.dtype)
        for t in range(ranges.shape[0]):
            a = ranges[t, 0]
            b = ranges[t, 1] + 1
            ubar = 0.0
            for r in range(a, b):
                u = 0.0
                for q in range(d):
                    gX[r, q] += w[r] * gT[t, q]
                    u += X[r, q] * gT[t, q]
                gscores[r] = u
                ubar += w[r] * u
            for r in range(a, b):
                gscores[r] = w[r] * (gscores[r] - ubar)
        return gX, gscores

    @njit(cache=True)
    def _heap_sift_down(hs, hj, p, size):
        # min-heap ordered by (score, index); the root is the weakest kept
        while True:
            left = 2 * p + 1
            right = left + 1
            small = p
            if left < size and (hs[left] < hs[small]
                                or (hs[left] == hs[small] and hj[left] < hj[small])):
                small = left
            if right < size and (hs[right] < hs[small]
                                 or (hs[right] == hs[small] and hj[right] < hj[small])):
                small = right
            if small == p:
                return
            hs[p], hs[small] = hs[small], hs[p]
            hj[p], hj[small] = hj[small], hj[p]
            p = small

    @njit(cache=True)
    def _topk_left_nb(S, k):
        n = S.shape[0]
        width = min(k, n - 1)
        if width < 1:
            width = 1
        cand = np.zeros((n, width), dtype=np.int64)
        counts = np.zeros(n, dtype=np.int64)
        hs = np.empty(width, dtype=S.dtype)
        hj = np.empty(width, dtype=np.int64)
        for i in range(1, n):
            c = min(k, i)
            for j in range(c):
                hs[j] = S[i, j]
                hj[j] = j
            for p in range(c // 2 - 1, -1, -1):
                _heap_sift_down(hs, hj, p, c)
            for j in range(c, i):
                s = S[i, j]
                if s > hs[0] or (s == hs[0] and j > hj[0]):
                    hs[0] = s
                    hj[0] = j
                    _heap_sift_down(hs, hj, 0, c)
            sel = np.sort(hj[:c])
            for p in range(c):
                cand[i, p] = sel[p]
            counts[i] = c
        return cand, counts

    def conv1d_k3_forward(x, K, b):
        return _conv1d_k3_forward_nb(x, K, b)

    def conv1d_k3_backward(x, K, gy):
        return _conv1d_k3_backward_nb(x, K, gy)

    def segment_pool_forward(X, scores, ranges):
        return _segment_pool_forward_nb(X, scores, ranges)

    def segment_pool_backward(X, w, ranges, gT):
        return _segment_pool_backward_nb(X, w, ranges, gT)

    def topk_left(S, k):
        return _topk_left_nb(S, k)

else:
    conv1d_k3_forward = _conv1d_k3_forward_np
    conv1d_k3_backward = _conv1d_k3_backward_np
    segment_pool_forward = _segment_pool_forward_np
    segment_pool_backward = _segment_pool_backward_np
    topk_left = _topk_left_np
