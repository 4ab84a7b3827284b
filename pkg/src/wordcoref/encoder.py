"""Subtoken embedding providers and subtoken-to-token attention pooling.

Two providers exist: a trainable toy encoder (hashed-vocabulary lookup plus a
window-3 context mixer, one subtoken per token) and a file-backed provider
that serves precomputed contextual embeddings from a ``WLEMB1`` file.  Either
way the pooled token matrix keeps exactly one row per document word; nothing
is pruned.
"""

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad

EMB_MAGIC = b"WLEMB1"


class EmbeddingError(ValueError):
    pass


@dataclass
class SubtokenMatrix:
    X: "ad.Tensor"                # [n_sub, d]
    token_map: np.ndarray         # [n_tokens, 2], inclusive subtoken ranges

    def __post_init__(self):
        tm = self.token_map
        if tm.ndim != 2 or tm.shape[1] != 2:
            raise EmbeddingError("token_map must be [n_tokens, 2]")
        prev_end = -1
        for a, b in tm:
            if not (a == prev_end + 1 and a <= b):
                raise EmbeddingError("token_map ranges must be contiguous, "
                                     "ordered and non-empty")
            prev_end = b
        if prev_end != self.X.shape[0] - 1:
            raise EmbeddingError("token_map must cover all subtokens")


@dataclass
class TokenMatrix:
    T: "ad.Tensor"                # [n_words, d]
    weights: np.ndarray           # pooling weights per subtoken


def hash_bucket(word, buckets):
    """Deterministic (process-independent) vocabulary bucket for a word."""
    return zlib.crc32(word.encode("utf-8")) % buckets


class ToyEncoder:
    """Trainable per-word embeddings with one window-3 context mixer.

    Word embeddings come from a hashed vocabulary; each position is then mixed
    with its left and right neighbours (zero padded at document edges) through
    a rectified affine layer so that coreference signal can be picked up from
    local context.  Token map is the identity: one subtoken per token.
    """

    def __init__(self, params, dim, buckets):
        self.dim = dim
        self.buckets = buckets
        self.embed = params.get("toy.embed")
        self.mix_W = params.get("toy.mix.W")
        self.mix_b = params.get("toy.mix.b")

    @staticmethod
    def parameter_shapes(dim, buckets):
        return {
            "toy.embed": (buckets, dim),
            "toy.mix.W": (3 * dim, dim),
            "toy.mix.b": (dim,),
        }

    def embed_document(self, doc):
        ids = [hash_bucket(w, self.buckets) for w in doc.flat_words()]
        E = ad.rows(self.embed, np.asarray(ids, dtype=np.int64))
        window = ad.concat(
            [ad.shift_rows(E, 1), E, ad.shift_rows(E, -1)], axis=1)
        X = ad.relu(ad.affine(window, self.mix_W, self.mix_b))
        n = len(ids)
        token_map = np.stack([np.arange(n), np.arange(n)], axis=1)
        return SubtokenMatrix(X=X, token_map=token_map)


class FileBackedEncoder:
    """Serves precomputed subtoken embeddings keyed by doc_id (frozen)."""

    def __init__(self, path, dim):
        self.dim = dim
        self._records = read_embeddings(path)
        for doc_id, (X, _) in self._records.items():
            if X.shape[1] != dim:
                raise EmbeddingError(
                    f"doc {doc_id!r}: embedding dim {X.shape[1]} != configured {dim}")

    def embed_document(self, doc):
        if doc.doc_id not in self._records:
            raise EmbeddingError(f"doc {doc.doc_id!r} not present in embedding file")
        X, token_map = self._records[doc.doc_id]
        if token_map.shape[0] != doc.n_words:
            raise EmbeddingError(
                f"doc {doc.doc_id!r}: embedding file has {token_map.shape[0]} "
                f"tokens, corpus has {doc.n_words}")
        return SubtokenMatrix(X=ad.constant(X), token_map=token_map)


def pool_tokens(sub, W_a):
    """Pool subtoken embeddings into token rows (one per word).

    Raw per-subtoken scores are W_a . X; a softmax restricted to each token's
    subtoken range turns them into convex weights.
    """
    scores = ad.flatten(ad.matmul(sub.X, ad.transpose(W_a)))
    T, w = ad.segment_pool(sub.X, scores, sub.token_map)
    return TokenMatrix(T=T, weights=w)


def read_embeddings(path):
    """Parse a WLEMB1 file into {doc_id: (X float64 [n_sub, d], token_map)}."""
    path = Path(path)
    records = {}
    with open(path, "rb") as f:
        magic = f.read(len(EMB_MAGIC))
        if magic != EMB_MAGIC:
            raise EmbeddingError(f"{path}: bad magic {magic!r}, expected {EMB_MAGIC!r}")

        def read_exact(n, what):
            buf = f.read(n)
            if len(buf) != n:
                raise EmbeddingError(f"{path}: truncated while reading {what}")
            return buf

        def read_u32(what):
            return struct.unpack("<I", read_exact(4, what))[0]

        n_docs = read_u32("document count")
        for _ in range(n_docs):
            id_len = read_u32("doc_id length")
            doc_id = read_exact(id_len, "doc_id").decode("utf-8")
            n_sub = read_u32("n_sub")
            d = read_u32("d")
            n_tokens = read_u32("n_tokens")
            tm = np.frombuffer(
                read_exact(8 * n_tokens, "token_map"), dtype="<u4"
            ).astype(np.int64).reshape(n_tokens, 2)
            X = np.frombuffer(
                read_exact(4 * n_sub * d, "embeddings"), dtype="<f4"
            ).astype(np.float64).reshape(n_sub, d)
            records[doc_id] = (X, tm)
    return records
