"""Antecedent scoring over head words: coarse bilinear scores, top-k
candidate pruning, fine pairwise scores with distance/genre/speaker features,
decoding, and clustering.

Every token looks only at tokens to its left plus an implicit dummy
alternative with a fixed total score of 0; picking the dummy means "no
antecedent".  The number of scored pairs is bounded by n * k.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import kernels

# bucket upper bounds for distances 1, 2, 3, 4, 5-7, 8-15, 16-31, 32-63, 64+
_BUCKET_EDGES = np.array([1, 2, 3, 4, 7, 15, 31, 63])


def distance_bucket(dist):
    """Monotone bucketing of antecedent distance (>= 1) into 9 bins."""
    return np.searchsorted(_BUCKET_EDGES, dist)


@dataclass
class CoarseScores:
    full: "ad.Tensor"      # [n, n] bilinear scores, differentiable
    masked: np.ndarray     # copy with entries j >= i set to -inf


@dataclass
class AntecedentScores:
    """Per-token candidate lists with coarse, fine, and total scores.

    ``cand[i, :counts[i]]`` are the surviving antecedent candidates of token
    i, sorted by ascending index; slots past ``counts[i]`` are padding and
    carry no meaning.  The dummy alternative is implicit with total score 0.
    """

    cand: np.ndarray       # [n, width] int64
    counts: np.ndarray     # [n] int64
    total: "ad.Tensor"     # [n, width] graph tensor (padding entries unused)
    coarse: np.ndarray     # [n, width] detached coarse part
    fine: np.ndarray       # [n, width] detached fine part

    @property
    def n(self):
        return self.cand.shape[0]

    @property
    def total_np(self):
        return self.total.data

    @property
    def pair_count(self):
        return int(self.counts.sum())

    def valid_mask(self):
        width = self.cand.shape[1]
        return np.arange(width)[None, :] < self.counts[:, None]


def coarse_scores(T, W_c):
    """Bilinear score matrix T . W_c . T^T with future positions masked."""
    full = ad.matmul(ad.matmul(T, W_c), ad.transpose(T))
    masked = full.data.copy()
    masked[np.triu_indices(masked.shape[0])] = -np.inf
    return CoarseScores(full=full, masked=masked)


def top_k_prune(masked_scores, k):
    """Keep the k best left-candidates per token (ties toward the nearer)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return kernels.topk_left(masked_scores, k)


def pair_feature_indices(doc, cand, counts, genre_index):
    """Integer feature ids for every (token, candidate) slot.

    Returns (distance bucket, same-speaker flag, genre id) arrays of the
    candidate grid's shape.  Padding slots get well-defined ids (distance
    clamped to 1) but are masked out of every loss.
    """
    n, width = cand.shape
    positions = np.arange(n, dtype=np.int64)[:, None]
    dist = np.maximum(positions - cand, 1)
    dist_idx = distance_bucket(dist)

    speakers = doc.flat_speakers()
    spk = np.array([s if s else None for s in speakers], dtype=object)
    same = np.zeros((n, width), dtype=np.int64)
    for i in range(n):
        si = spk[i]
        if si is None:
            continue
        c = counts[i]
        same[i, :c] = [1 if spk[j] == si else 0 for j in cand[i, :c]]

    genre_idx = np.full((n, width), genre_index, dtype=np.int64)
    return dist_idx, same, genre_idx


def fine_scores(T, cand, counts, feature_ids, p):
    """Pairwise scores from an FFNN over [T_i, T_j, T_i * T_j, features].

    ``p`` supplies the learnable tensors: ffnn_a.{0,1,out}.{W,b} and
    feat.{distance,genre,speaker}.  Output shape matches the candidate grid.
    """
    n, width = cand.shape
    anaphor_idx = np.repeat(np.arange(n, dtype=np.int64), width)
    antecedent_idx = cand.reshape(-1)

    Ti = ad.rows(T, anaphor_idx)
    Tj = ad.rows(T, antecedent_idx)
    dist_idx, same_idx, genre_idx = feature_ids
    phi = [
        ad.rows(p.get("feat.distance"), dist_idx.reshape(-1)),
        ad.rows(p.get("feat.genre"), genre_idx.reshape(-1)),
        ad.rows(p.get("feat.speaker"), same_idx.reshape(-1)),
    ]
    pair = ad.concat([Ti, Tj, ad.mul(Ti, Tj)] + phi, axis=1)

    h = ad.relu(ad.affine(pair, p.get("ffnn_a.0.W"), p.get("ffnn_a.0.b")))
    h = ad.relu(ad.affine(h, p.get("ffnn_a.1.W"), p.get("ffnn_a.1.b")))
    out = ad.affine(h, p.get("ffnn_a.out.W"), p.get("ffnn_a.out.b"))
    return ad.reshape(ad.flatten(out), (n, width))


def total_scores(coarse, cand, counts, s_a):
    """Sum of the coarse and fine parts for every surviving pair."""
    n, width = cand.shape
    anaphor_idx = np.repeat(np.arange(n, dtype=np.int64), width)
    s_c_flat = ad.take_pairs(coarse.full, anaphor_idx, cand.reshape(-1))
    s_c = ad.reshape(s_c_flat, (n, width))
    total = ad.add(s_c, s_a)
    return AntecedentScores(
        cand=cand,
        counts=counts,
        total=total,
        coarse=s_c.data.copy(),
        fine=s_a.data.copy(),
    )


def decode_antecedents(scores):
    """Pick the best-scoring candidate per token, or -1 for none.

    A link is emitted only when the best total score is strictly positive;
    ties resolve toward the nearer candidate.
    """
    n = scores.n
    links = np.full(n, -1, dtype=np.int64)
    total = scores.total_np
    for i in range(n):
        c = scores.counts[i]
        best = 0.0
        arg = -1
        for slot in range(c):
            s = total[i, slot]
            if s > 0.0 and s >= best:
                # candidates are sorted by ascending index, so >= keeps
                # the nearer one on ties
                best = s
                arg = scores.cand[i, slot]
        links[i] = arg
    return links


def build_clusters(links):
    """Connected components of the link graph; singletons are dropped."""
    n = links.shape[0]
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in enumerate(links):
        if j >= 0:
            parent[find(i)] = find(int(j))

    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(sorted(g) for g in groups.values() if len(g) >= 2)
