"""Span reconstruction: recover the full mention span of a head word.

Every token of the head's sentence is paired with the head representation,
pushed through a feed-forward layer, and a kernel-3 convolution over the
sentence yields two channels: start scores and end scores.  At inference,
positions right of the head cannot start the span and positions left of it
cannot end it.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .corpus import Span


@dataclass
class BoundaryScores:
    scores: "ad.Tensor"   # [m, 2]: column 0 start scores, column 1 end scores
    sentence: int
    head_pos: int         # head position within the sentence


def score_boundaries(head, T, doc, p):
    """Start/end scores for every token of the head's sentence.

    ``head`` is a global word index; ``T`` the pooled token matrix tensor.
    """
    sent, head_pos = doc.locate(head)
    lo, hi = doc.sentence_range(sent)
    m = hi - lo

    sent_idx = np.arange(lo, hi, dtype=np.int64)
    head_idx = np.full(m, head, dtype=np.int64)
    pair = ad.concat([ad.rows(T, sent_idx), ad.rows(T, head_idx)], axis=1)
    h = ad.relu(ad.affine(pair, p.get("span.ffnn.W"), p.get("span.ffnn.b")))
    scores = ad.conv1d_k3(h, p.get("span.conv.K"), p.get("span.conv.b"))
    return BoundaryScores(scores=scores, sentence=sent, head_pos=head_pos)


def predict_span(bscores):
    """Most probable (start, end) around the head, ties toward the head."""
    s = bscores.scores.data
    p = bscores.head_pos

    start_scores = s[: p + 1, 0]
    # argmax keeps the first maximum; reversing makes that the one nearest
    # the head among ties
    start = p - int(np.argmax(start_scores[::-1]))

    end_scores = s[p:, 1]
    end = p + int(np.argmax(end_scores))

    return Span(bscores.sentence, start, end)


def reconstruct(head_clusters, T, doc, p):
    """Replace every head in every cluster by its predicted span.

    The result must be a partition of mentions: duplicate spans within one
    cluster collapse, a span predicted for two clusters stays with the
    earlier one, and clusters left with fewer than two spans are dropped.
    """
    span_clusters = []
    used = set()
    for cluster in head_clusters:
        spans = {predict_span(score_boundaries(h, T, doc, p)) for h in cluster}
        kept = sorted(s for s in spans if s not in used)
        used.update(kept)
        if len(kept) >= 2:
            span_clusters.append(kept)
    return span_clusters
