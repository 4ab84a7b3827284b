"""Timing comparison of the numba kernels against the numpy fallbacks.

Run as: python3 benchmarks/bench_kernels.py [--repeat N]
Problem sizes are chosen to resemble a long document (hundreds of words,
encoder width 128).  Both paths are checked for agreement before timing.
"""

import argparse
import timeit

import numpy as np

from wordcoref import kernels


def _best(fn, repeat, number=5):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def _pool_inputs(rng):
    n_tok = 1000
    sizes = rng.integers(1, 4, size=n_tok)
    ends = np.cumsum(sizes)
    ranges = np.stack([ends - sizes, ends - 1], axis=1).astype(np.int64)
    n_sub = int(ends[-1])
    X = rng.standard_normal((n_sub, 128))
    scores = rng.standard_normal(n_sub)
    return X, scores, ranges


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if not kernels.USE_NUMBA:
        print("numba backend unavailable (WORDCOREF_NUMBA=0 or import failed); "
              "nothing to compare")
        return 1

    rng = np.random.default_rng(0)
    rows = []

    x = rng.standard_normal((400, 128))
    K = rng.standard_normal((3, 128, 2))
    b = rng.standard_normal(2)
    gy = rng.standard_normal((400, 2))
    cases = [
        ("conv1d_k3 forward",
         lambda: kernels._conv1d_k3_forward_np(x, K, b),
         lambda: kernels._conv1d_k3_forward_nb(x, K, b)),
        ("conv1d_k3 backward",
         lambda: kernels._conv1d_k3_backward_np(x, K, gy),
         lambda: kernels._conv1d_k3_backward_nb(x, K, gy)),
    ]

    X, scores, ranges = _pool_inputs(rng)
    gT = rng.standard_normal((ranges.shape[0], X.shape[1]))
    _, w = kernels._segment_pool_forward_np(X, scores, ranges)
    cases += [
        ("segment_pool forward",
         lambda: kernels._segment_pool_forward_np(X, scores, ranges),
         lambda: kernels._segment_pool_forward_nb(X, scores, ranges)),
        ("segment_pool backward",
         lambda: kernels._segment_pool_backward_np(X, w, ranges, gT),
         lambda: kernels._segment_pool_backward_nb(X, w, ranges, gT)),
    ]

    S = rng.standard_normal((800, 800))
    S[np.triu_indices(800)] = -np.inf
    cases.append(
        ("topk_left k=50",
         lambda: kernels._topk_left_np(S, 50),
         lambda: kernels._topk_left_nb(S, 50)))

    print(f"{'kernel':24s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for name, f_np, f_nb in cases:
        a, b_ = f_np(), f_nb()  # agreement check and JIT warmup
        for u, v in zip(a if isinstance(a, tuple) else (a,),
                        b_ if isinstance(b_, tuple) else (b_,)):
            np.testing.assert_allclose(u, v, rtol=1e-10, atol=1e-10)
        t_np = _best(f_np, args.repeat)
        t_nb = _best(f_nb, args.repeat)
        rows.append((name, t_np, t_nb))
        print(f"{name:24s} {t_np * 1e3:9.3f}ms {t_nb * 1e3:9.3f}ms "
              f"{t_np / t_nb:7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
