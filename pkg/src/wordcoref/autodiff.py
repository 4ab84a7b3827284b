"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps a float64 ndarray and remembers how it was produced; calling
``backward()`` on a scalar tensor walks the tape in reverse topological order
and accumulates gradients into every tensor with ``requires_grad``.  Only the
operations the coreference model needs are provided; there is no general
broadcasting.

Every operation checks its output for NaN/Inf (a hard error) unless
``finite_checks(False)`` is active.
"""

import numpy as np

from . import kernels

_FINITE_CHECKS = True


class NonFiniteError(FloatingPointError):
    """An operation produced NaN or Inf."""


def finite_checks(enabled: bool) -> None:
    global _FINITE_CHECKS
    _FINITE_CHECKS = enabled


def _check(data, op):
    if _FINITE_CHECKS and not np.all(np.isfinite(data)):
        raise NonFiniteError(f"non-finite values produced by {op}")
    return data


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def backward(self):
        if self.data.ndim != 0:
            raise ValueError("backward() requires a scalar tensor")
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
        return self

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self):
        self.grad = None

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    """A named trainable tensor; its gradient always matches its shape."""

    __slots__ = ("name",)

    def __init__(self, name, data):
        super().__init__(data, requires_grad=True)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def constant(data):
    return Tensor(data)


def _track(*tensors):
    return any(t.requires_grad or t._parents for t in tensors)


def _out(data, parents, backward, op):
    _check(data, op)
    if _track(*parents):
        return Tensor(data, _parents=parents, _backward=backward)
    return Tensor(data)


# -- arithmetic --------------------------------------------------------------

def add(a, b):
    if a.data.shape != b.data.shape:
        raise ValueError(f"add: shape mismatch {a.data.shape} vs {b.data.shape}")

    def backward(g):
        if a.requires_grad or a._parents:
            a.accumulate(g)
        if b.requires_grad or b._parents:
            b.accumulate(g)

    return _out(a.data + b.data, (a, b), backward, "add")


def mul(a, b):
    if a.data.shape != b.data.shape:
        raise ValueError(f"mul: shape mismatch {a.data.shape} vs {b.data.shape}")

    def backward(g):
        if a.requires_grad or a._parents:
            a.accumulate(g * b.data)
        if b.requires_grad or b._parents:
            b.accumulate(g * a.data)

    return _out(a.data * b.data, (a, b), backward, "mul")


def scale(a, c):
    c = float(c)

    def backward(g):
        a.accumulate(g * c)

    return _out(a.data * c, (a,), backward, "scale")


def matmul(a, b):
    def backward(g):
        if a.requires_grad or a._parents:
            a.accumulate(g @ b.data.T)
        if b.requires_grad or b._parents:
            b.accumulate(a.data.T @ g)

    return _out(a.data @ b.data, (a, b), backward, "matmul")


def transpose(a):
    def backward(g):
        a.accumulate(g.T)

    return _out(a.data.T, (a,), backward, "transpose")


def affine(x, W, b):
    """y = x @ W + b with b broadcast over rows."""
    if x.data.shape[1] != W.data.shape[0] or W.data.shape[1] != b.data.shape[0]:
        raise ValueError(
            f"affine: shapes {x.data.shape} @ {W.data.shape} + {b.data.shape}"
        )

    def backward(g):
        if x.requires_grad or x._parents:
            x.accumulate(g @ W.data.T)
        if W.requires_grad or W._parents:
            W.accumulate(x.data.T @ g)
        if b.requires_grad or b._parents:
            b.accumulate(g.sum(axis=0))

    return _out(x.data @ W.data + b.data, (x, W, b), backward, "affine")


# -- elementwise nonlinearities ----------------------------------------------

def relu(a):
    mask = a.data > 0

    def backward(g):
        a.accumulate(g * mask)

    return _out(np.where(mask, a.data, 0.0), (a,), backward, "relu")


def sigmoid(a):
    s = np.empty_like(a.data)
    pos = a.data >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    e = np.exp(a.data[~pos])
    s[~pos] = e / (1.0 + e)

    def backward(g):
        a.accumulate(g * s * (1.0 - s))

    return _out(s, (a,), backward, "sigmoid")


def softplus(a):
    """log(1 + exp(x)), computed stably."""
    y = np.maximum(a.data, 0.0) + np.log1p(np.exp(-np.abs(a.data)))

    def backward(g):
        s = np.empty_like(a.data)
        pos = a.data >= 0
        s[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
        e = np.exp(a.data[~pos])
        s[~pos] = e / (1.0 + e)
        a.accumulate(g * s)

    return _out(y, (a,), backward, "softplus")


def exp(a):
    y = np.exp(a.data)

    def backward(g):
        a.accumulate(g * y)

    return _out(y, (a,), backward, "exp")


def log(a):
    def backward(g):
        a.accumulate(g / a.data)

    return _out(np.log(a.data), (a,), backward, "log")


# -- reductions and reshaping ------------------------------------------------

def tsum(a):
    def backward(g):
        a.accumulate(np.full_like(a.data, g))

    return _out(a.data.sum(), (a,), backward, "sum")


def tmean(a):
    n = a.data.size
    if n == 0:
        raise ValueError("mean of an empty tensor")

    def backward(g):
        a.accumulate(np.full_like(a.data, g / n))

    return _out(a.data.mean(), (a,), backward, "mean")


def concat(tensors, axis):
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad or t._parents:
                if axis == 0:
                    t.accumulate(g[lo:hi])
                else:
                    t.accumulate(g[:, lo:hi])

    data = np.concatenate([t.data for t in tensors], axis=axis)
    return _out(data, tuple(tensors), backward, "concat")


def rows(a, idx):
    """Row gather (embedding lookup); repeated indices accumulate on backward."""
    idx = np.asarray(idx, dtype=np.int64)

    def backward(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, idx, g)
        a.accumulate(ga)

    return _out(a.data[idx], (a,), backward, "rows")


def take_pairs(a, row_idx, col_idx):
    """Gather a[row_idx[p], col_idx[p]] for every p; output is 1-D."""
    row_idx = np.asarray(row_idx, dtype=np.int64)
    col_idx = np.asarray(col_idx, dtype=np.int64)

    def backward(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, (row_idx, col_idx), g)
        a.accumulate(ga)

    return _out(a.data[row_idx, col_idx], (a,), backward, "take_pairs")


def col(a, j):
    """Extract column j of a 2-D tensor as a 1-D tensor."""

    def backward(g):
        ga = np.zeros_like(a.data)
        ga[:, j] = g
        a.accumulate(ga)

    return _out(a.data[:, j].copy(), (a,), backward, "col")


def take_at(a, i):
    """Extract element i of a 1-D tensor as a scalar."""

    def backward(g):
        ga = np.zeros_like(a.data)
        ga[i] = g
        a.accumulate(ga)

    return _out(a.data[i], (a,), backward, "take_at")


def flatten(a):
    return reshape(a, (-1,))


def reshape(a, shape):
    old = a.data.shape

    def backward(g):
        a.accumulate(g.reshape(old))

    return _out(a.data.reshape(shape), (a,), backward, "reshape")


def shift_rows(a, offset):
    """Shift rows down by ``offset`` (up when negative), filling with zeros."""
    n = a.data.shape[0]
    y = np.zeros_like(a.data)
    if offset >= 0:
        y[offset:] = a.data[: n - offset]
    else:
        y[: n + offset] = a.data[-offset:]

    def backward(g):
        ga = np.zeros_like(a.data)
        if offset >= 0:
            ga[: n - offset] = g[offset:]
        else:
            ga[-offset:] = g[: n + offset]
        a.accumulate(ga)

    return _out(y, (a,), backward, "shift_rows")


# -- softmax family ----------------------------------------------------------

def softmax_rows(x, mask):
    """Row-wise softmax over unmasked entries; masked entries are exactly 0.

    Rows with no unmasked entry come out all-zero.  Stabilized by row-max
    subtraction.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.data.shape:
        raise ValueError("softmax_rows: mask shape mismatch")
    z = np.where(mask, x.data, -np.inf)
    alive = mask.any(axis=1)
    mx = np.where(alive, z.max(axis=1, initial=-np.inf), 0.0)
    e = np.exp(np.where(mask, z - mx[:, None], -np.inf))
    e = np.where(mask, e, 0.0)
    denom = e.sum(axis=1)
    denom = np.where(alive, denom, 1.0)
    p = e / denom[:, None]

    def backward(g):
        dot = (g * p).sum(axis=1, keepdims=True)
        x.accumulate(p * (g - dot))

    return _out(p, (x,), backward, "softmax_rows")


def logsumexp_rows(x, mask):
    """Per-row log(sum(exp)) over unmasked entries; every row needs >= 1."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.data.shape:
        raise ValueError("logsumexp_rows: mask shape mismatch")
    if not mask.any(axis=1).all():
        raise ValueError("logsumexp_rows: a row has no unmasked entries")
    z = np.where(mask, x.data, -np.inf)
    mx = z.max(axis=1)
    e = np.where(mask, np.exp(z - mx[:, None]), 0.0)
    s = e.sum(axis=1)
    y = np.log(s) + mx

    def backward(g):
        x.accumulate((e / s[:, None]) * g[:, None])

    return _out(y, (x,), backward, "logsumexp_rows")


def logsumexp_vec(a):
    """log(sum(exp)) of a 1-D tensor."""
    mx = a.data.max()
    e = np.exp(a.data - mx)
    s = e.sum()

    def backward(g):
        a.accumulate((e / s) * g)

    return _out(np.log(s) + mx, (a,), backward, "logsumexp_vec")


# -- structured operations ---------------------------------------------------

def conv1d_k3(x, K, b):
    """1-D convolution, kernel size 3, zero padding of one at both ends.

    x: [m, h]; K: [3, h, c]; b: [c] -> [m, c].
    """
    if K.data.shape[0] != 3 or K.data.shape[1] != x.data.shape[1]:
        raise ValueError(f"conv1d_k3: shapes {x.data.shape} vs {K.data.shape}")

    def backward(g):
        gx, gK, gb = kernels.conv1d_k3_backward(x.data, K.data, g)
        if x.requires_grad or x._parents:
            x.accumulate(gx)
        if K.requires_grad or K._parents:
            K.accumulate(gK)
        if b.requires_grad or b._parents:
            b.accumulate(gb)

    y = kernels.conv1d_k3_forward(x.data, K.data, b.data)
    return _out(y, (x, K, b), backward, "conv1d_k3")


def segment_pool(X, scores, ranges):
    """Attention-pool rows of X into one row per range.

    ranges: int array [n, 2], inclusive ends, non-overlapping and ordered.
    Weights are softmax(scores) restricted to each range.  Also returns the
    flat weight vector (plain ndarray) for inspection.
    """
    ranges = np.asarray(ranges, dtype=np.int64)
    T, w = kernels.segment_pool_forward(X.data, scores.data, ranges)

    def backward(g):
        gX, gscores = kernels.segment_pool_backward(X.data, w, ranges, g)
        if X.requires_grad or X._parents:
            X.accumulate(gX)
        if scores.requires_grad or scores._parents:
            scores.accumulate(gscores)

    return _out(T, (X, scores), backward, "segment_pool"), w


def dropout(a, p, rng, training):
    """Inverted dropout; identity when not training or p == 0."""
    if not training or p <= 0.0:
        return a
    keep = (rng.random(a.data.shape) >= p) / (1.0 - p)

    def backward(g):
        a.accumulate(g * keep)

    return _out(a.data * keep, (a,), backward, "dropout")


# -- gradient verification ---------------------------------------------------

def grad_check(f, params, eps=1e-5):
    """Compare analytic gradients of ``f()`` against central differences.

    ``f`` must rebuild its computation from the current parameter values on
    every call and return a scalar Tensor.  Returns the maximum relative
    error over all elements of all params, with denominator
    max(|analytic|, |numeric|, 1e-8).
    """
    for p in params:
        p.zero_grad()
    out = f()
    out.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
                for p in params]

    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = f().item()
            flat[i] = orig - eps
            lo = f().item()
            flat[i] = orig
            num = (hi - lo) / (2.0 * eps)
            denom = max(abs(gflat[i]), abs(num), 1e-8)
            worst = max(worst, abs(gflat[i] - num) / denom)
    return worst
