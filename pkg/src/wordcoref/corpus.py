"""Document loading, validation, and the reduction of span clusters to
head-word clusters.

Input is one JSON record per line with fields ``doc_id``, ``genre``,
``sentences``, ``speakers``, ``dep_head`` (-1 marks a sentence root) and
``clusters`` (lists of ``[sentence_index, start, end]`` triples, end
inclusive).
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

log = logging.getLogger("wordcoref.corpus")

ROOT = -1

DEFAULT_GENRES = ("bc", "bn", "mz", "nw", "pt", "tc", "wb")


class Span(NamedTuple):
    sentence: int
    start: int
    end: int  # inclusive


class CorpusError(ValueError):
    pass


class ParseError(CorpusError):
    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ValidationError(CorpusError):
    def __init__(self, doc_id, fieldname, message):
        super().__init__(f"doc {doc_id!r}, field {fieldname!r}: {message}")
        self.doc_id = doc_id
        self.field = fieldname


@dataclass
class Document:
    doc_id: str
    genre: str
    sentences: list          # list of lists of word strings
    speakers: list           # aligned speaker ids
    dep_head: list           # aligned parent indices, ROOT = -1
    clusters: list           # list of lists of Span

    _starts: list = field(init=False, repr=False)

    def __post_init__(self):
        starts = [0]
        for sent in self.sentences:
            starts.append(starts[-1] + len(sent))
        self._starts = starts

    @property
    def n_words(self):
        return self._starts[-1]

    def global_index(self, sentence, word):
        return self._starts[sentence] + word

    def locate(self, global_idx):
        """Map a global word index back to (sentence, position)."""
        lo, hi = 0, len(self.sentences) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self._starts[mid] <= global_idx:
                lo = mid
            else:
                hi = mid - 1
        return lo, global_idx - self._starts[lo]

    def sentence_range(self, sentence):
        """Global index range [start, end) of a sentence."""
        return self._starts[sentence], self._starts[sentence + 1]

    def flat_words(self):
        return [w for sent in self.sentences for w in sent]

    def flat_speakers(self):
        return [s for sent in self.speakers for s in sent]

    def span_words(self, span):
        return self.sentences[span.sentence][span.start: span.end + 1]


@dataclass
class WordLevelDoc:
    """Per-word coreference labels derived from span clusters.

    ``head_clusters`` holds clusters of global word indices (size >= 2);
    ``head_to_span`` maps every surviving mention head to its gold span.
    """

    head_clusters: list
    head_to_span: dict
    source: Document


def validate_document(doc, genres=DEFAULT_GENRES):
    did = doc.doc_id
    if genres is not None and doc.genre not in genres:
        raise ValidationError(did, "genre", f"unknown genre code {doc.genre!r}")
    if len(doc.speakers) != len(doc.sentences):
        raise ValidationError(did, "speakers", "sentence count mismatch")
    if len(doc.dep_head) != len(doc.sentences):
        raise ValidationError(did, "dep_head", "sentence count mismatch")
    for s, sent in enumerate(doc.sentences):
        n = len(sent)
        if n == 0:
            raise ValidationError(did, "sentences", f"sentence {s} is empty")
        if len(doc.speakers[s]) != n:
            raise ValidationError(did, "speakers",
                                  f"sentence {s}: expected {n} entries")
        if len(doc.dep_head[s]) != n:
            raise ValidationError(did, "dep_head",
                                  f"sentence {s}: expected {n} entries")
        for w, h in enumerate(doc.dep_head[s]):
            if h != ROOT and not (0 <= h < n):
                raise ValidationError(did, "dep_head",
                                      f"sentence {s} word {w}: parent {h} out of range")
        # acyclicity: following parents from any word must reach ROOT
        for w in range(n):
            seen = set()
            cur = w
            while cur != ROOT:
                if cur in seen:
                    raise ValidationError(did, "dep_head",
                                          f"sentence {s}: cycle through word {w}")
                seen.add(cur)
                cur = doc.dep_head[s][cur]
    for c, cluster in enumerate(doc.clusters):
        if not cluster:
            raise ValidationError(did, "clusters", f"cluster {c} is empty")
        for span in cluster:
            if not (0 <= span.sentence < len(doc.sentences)):
                raise ValidationError(did, "clusters",
                                      f"span {tuple(span)}: bad sentence index")
            n = len(doc.sentences[span.sentence])
            if not (0 <= span.start <= span.end < n):
                raise ValidationError(did, "clusters",
                                      f"span {tuple(span)}: bad boundaries")
    return doc


def _document_from_record(rec):
    required = ("doc_id", "genre", "sentences", "speakers", "dep_head", "clusters")
    for key in required:
        if key not in rec:
            raise KeyError(key)
    clusters = [
        [Span(int(s), int(a), int(b)) for s, a, b in cluster]
        for cluster in rec["clusters"]
    ]
    return Document(
        doc_id=str(rec["doc_id"]),
        genre=str(rec["genre"]),
        sentences=[[str(w) for w in sent] for sent in rec["sentences"]],
        speakers=[[str(s) for s in sent] for sent in rec["speakers"]],
        dep_head=[[int(h) for h in sent] for sent in rec["dep_head"]],
        clusters=clusters,
    )


def load_corpus(path, genres=DEFAULT_GENRES):
    """Load and validate a JSONL corpus; returns a list of Documents."""
    path = Path(path)
    docs = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                doc = _document_from_record(rec)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise ParseError(line_no, f"malformed record ({e})") from e
            docs.append(validate_document(doc, genres=genres))
    return docs


def extract_head(span, doc):
    """Reduce a span to its syntactic head word (sentence-local index).

    The head is the unique word whose parent lies outside the span or is the
    sentence root; when the number of such words is not exactly one, the
    rightmost word of the span is used.
    """
    if span.start == span.end:
        return span.start
    heads = doc.dep_head[span.sentence]
    external = [
        w for w in range(span.start, span.end + 1)
        if heads[w] == ROOT or not (span.start <= heads[w] <= span.end)
    ]
    if len(external) == 1:
        return external[0]
    return span.end


def to_word_level(doc):
    """Map every gold span to its head word and rebuild clusters over heads.

    Two mentions can reduce to the same head.  Within a cluster the longer
    span wins; across clusters the mention from the first-listed cluster wins
    and the other is dropped.  Either way a warning is logged.  Clusters that
    end up with fewer than two heads are discarded, but their surviving
    mentions stay in ``head_to_span``.
    """
    head_to_span = {}
    raw_clusters = []
    for cluster in doc.clusters:
        heads = []
        for span in cluster:
            h = doc.global_index(span.sentence, extract_head(span, doc))
            if h in head_to_span:
                prev = head_to_span[h]
                if h in heads:
                    # same cluster: keep the longer span
                    if (span.end - span.start) > (prev.end - prev.start):
                        head_to_span[h] = span
                    log.warning(
                        "doc %s: spans %s and %s share head %d; kept %s",
                        doc.doc_id, tuple(prev), tuple(span), h,
                        tuple(head_to_span[h]))
                else:
                    # earlier cluster owns this head: drop the later mention
                    log.warning(
                        "doc %s: span %s dropped, head %d already used by %s",
                        doc.doc_id, tuple(span), h, tuple(prev))
                continue
            head_to_span[h] = span
            heads.append(h)
        raw_clusters.append(sorted(heads))
    head_clusters = [c for c in raw_clusters if len(c) >= 2]
    return WordLevelDoc(head_clusters=head_clusters,
                        head_to_span=head_to_span,
                        source=doc)


def write_corpus(docs, path):
    """Serialize documents to the JSONL corpus format (inverse of load_corpus)."""
    with open(path, "w", encoding="utf-8") as f:
        for doc in docs:
            rec = {
                "doc_id": doc.doc_id,
                "genre": doc.genre,
                "sentences": doc.sentences,
                "speakers": doc.speakers,
                "dep_head": doc.dep_head,
                "clusters": [[list(span) for span in cluster]
                             for cluster in doc.clusters],
            }
            f.write(json.dumps(rec) + "\n")


def write_word_level(wl_docs, path):
    """Emit word-level records (head clusters plus head -> span) as JSONL."""
    with open(path, "w", encoding="utf-8") as f:
        for wl in wl_docs:
            rec = {
                "doc_id": wl.source.doc_id,
                "head_clusters": wl.head_clusters,
                "head_to_span": {
                    str(h): list(span) for h, span in sorted(wl.head_to_span.items())
                },
            }
            f.write(json.dumps(rec) + "\n")
