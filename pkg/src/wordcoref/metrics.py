"""Coreference evaluation metrics and the word-level vs span-level
complexity audit.

All metric functions take a key (gold) and a response (predicted) clustering:
iterables of clusters, each cluster an iterable of hashable mention ids.
Scores follow the standard reference-scorer definitions; 0/0 is defined as 0.
Corpus-level scores are obtained by evaluating the union of per-document
clusterings with document-qualified mention ids (the metrics are additive in
exactly the way the official aggregation is).
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus import extract_head


def _normalize(clusters, side):
    out = []
    seen = set()
    for cluster in clusters:
        c = frozenset(cluster)
        if not c:
            raise ValueError(f"{side}: empty cluster")
        if seen & c:
            raise ValueError(f"{side}: mention in more than one cluster")
        seen |= c
        out.append(c)
    return out


def _mention_map(clusters):
    return {m: c for c in clusters for m in c}


def _f1(p, r):
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _ratio(num, den):
    return num / den if den > 0 else 0.0


def muc(key, response):
    """Link-based metric: penalizes the partitions each key cluster is cut
    into by the response (and symmetrically for precision)."""
    key = _normalize(key, "key")
    response = _normalize(response, "response")

    def recall(key_side, resp_side):
        resp_of = _mention_map(resp_side)
        num = den = 0
        for c in key_side:
            parts = {id(resp_of[m]) for m in c if m in resp_of}
            absent = sum(1 for m in c if m not in resp_of)
            num += len(c) - (len(parts) + absent)
            den += len(c) - 1
        return _ratio(num, den)

    r = recall(key, response)
    p = recall(response, key)
    return p, r, _f1(p, r)


def b_cubed(key, response):
    """Mention-based metric: per-mention cluster overlap, averaged.

    A mention missing from the other side contributes zero overlap (its
    implicit counterpart is a singleton sharing no coreference mass).
    """
    key = _normalize(key, "key")
    response = _normalize(response, "response")

    def recall(key_side, resp_side):
        num = 0.0
        total = 0
        for k in key_side:
            total += len(k)
            for r in resp_side:
                ov = len(k & r)
                if ov:
                    num += ov * ov / len(k)
        return _ratio(num, total)

    r = recall(key, response)
    p = recall(response, key)
    return p, r, _f1(p, r)


def ceaf_phi4(key, response):
    """Optimal one-to-one cluster alignment under the similarity
    2|K n R| / (|K| + |R|)."""
    key = _normalize(key, "key")
    response = _normalize(response, "response")
    if not key or not response:
        return 0.0, 0.0, 0.0

    sim = np.zeros((len(key), len(response)))
    for i, k in enumerate(key):
        for j, r in enumerate(response):
            ov = len(k & r)
            if ov:
                sim[i, j] = 2.0 * ov / (len(k) + len(r))
    rows, cols = linear_sum_assignment(-sim)
    total = sim[rows, cols].sum()
    r = total / len(key)
    p = total / len(response)
    return p, r, _f1(p, r)


def conll_f1(key, response):
    """Unweighted mean of the MUC, B-cubed and CEAF F1 scores."""
    key = list(key)
    response = list(response)
    return (muc(key, response)[2]
            + b_cubed(key, response)[2]
            + ceaf_phi4(key, response)[2]) / 3.0


def format_report(key, response):
    """P/R/F1 table for the three metrics plus their mean F1."""
    key = list(key)
    response = list(response)
    rows = [
        ("MUC", muc(key, response)),
        ("B3", b_cubed(key, response)),
        ("CEAF_phi4", ceaf_phi4(key, response)),
    ]
    lines = [f"{'':<10}  {'P':>8}  {'R':>8}  {'F1':>8}"]
    for name, (p, r, f) in rows:
        lines.append(f"{name:<10}  {p:8.4f}  {r:8.4f}  {f:8.4f}")
    mean = sum(f for _, (_, _, f) in rows) / 3.0
    lines.append(f"{'mean F1':<10}  {'':>8}  {'':>8}  {mean:8.4f}")
    return "\n".join(lines)


# -- complexity audit ---------------------------------------------------------

@dataclass
class AuditReport:
    """Mention/pair counts contrasting word-level and span-level scope.

    ``span_boundary_candidates`` counts the start/end positions the span
    predictor examines for the gold mentions: with the default "masked"
    convention a head at sentence position p of an m-word sentence
    contributes (p + 1) start plus (m - p) end candidates; the "full"
    convention counts every position for both channels (2m).
    """

    wl_mentions: int = 0
    wl_pairs: int = 0
    sl_mentions: int = 0
    sl_pairs: int = 0
    span_boundary_candidates: int = 0

    def as_dict(self):
        return {
            "wl_mentions": self.wl_mentions,
            "wl_pairs": self.wl_pairs,
            "sl_mentions": self.sl_mentions,
            "sl_pairs": self.sl_pairs,
            "span_boundary_candidates": self.span_boundary_candidates,
        }


def audit(docs, order="lex", sbc="masked"):
    """Count mentions and left-pairs under both granularities.

    Word level: every word is a potential mention; pairs are (i, j < i)
    within a document.  Span level: every within-sentence span is potential;
    "left" follows ``order``:

    - ``lex``: total order by (sentence, start, end); every unordered pair
      counts once.
    - ``start``: a span is left of another only when its (sentence, start)
      is strictly smaller; same-start spans are incomparable.
    """
    if order not in ("lex", "start"):
        raise ValueError(f"unknown order convention {order!r}")
    if sbc not in ("masked", "full"):
        raise ValueError(f"unknown SBC convention {sbc!r}")

    rep = AuditReport()
    for doc in docs:
        n = doc.n_words
        rep.wl_mentions += n
        rep.wl_pairs += n * (n - 1) // 2

        doc_spans = 0
        same_start_pairs = 0
        for sent in doc.sentences:
            m = len(sent)
            doc_spans += m * (m + 1) // 2
            if order == "start":
                for s in range(m):
                    g = m - s  # spans starting at s
                    same_start_pairs += g * (g - 1) // 2
        rep.sl_mentions += doc_spans
        rep.sl_pairs += doc_spans * (doc_spans - 1) // 2 - same_start_pairs

        for cluster in doc.clusters:
            for span in cluster:
                m = len(doc.sentences[span.sentence])
                if sbc == "full":
                    rep.span_boundary_candidates += 2 * m
                else:
                    p = extract_head(span, doc)
                    rep.span_boundary_candidates += (p + 1) + (m - p)
    return rep
