"""Seeded synthetic corpora for tests, demos, and overfitting runs.

Documents are tiny third-person narratives: named people are introduced and
then referred back to by pronoun or by role ("the gardener").  Pronouns are
unambiguous within a document (no two entities share one), so perfect
resolution is attainable from the surface forms.
"""

import numpy as np

from .corpus import Document, Span, validate_document

# (name words, pronoun, role noun); the last name word is the span head
_PEOPLE = [
    (("Anna", "Baker"), "she", "gardener"),
    (("Omar",), "he", "painter"),
    (("Lena", "Park"), "she", "teacher"),
    (("Ravi",), "he", "sailor"),
    (("Mara", "Quinn"), "she", "doctor"),
    (("Theo",), "he", "glazier"),
    (("Noor",), "they", "writer"),
    (("Iris", "Vale"), "she", "editor"),
    (("Juno",), "they", "courier"),
    (("Eli", "Stone"), "he", "farmer"),
]

_VERBS = ("visited", "thanked", "called", "helped", "greeted", "watched")
_OBJECTS = ("garden", "market", "library", "museum", "harbor", "bakery")
_ADVERBS = ("quietly", "today", "twice", "early")

_GENRES = ("bc", "bn", "mz", "nw", "pt", "tc", "wb")


def _sentence(subject_words, rng):
    """Build one sentence around a subject span; returns (words, deps, span).

    The subject occupies positions [0, len(subject_words) - 1]; in two-word
    subjects the first word attaches to the second, so the second is the
    unique externally headed word.
    """
    k = len(subject_words)
    words = list(subject_words)
    if k == 2:
        deps = [1, 2]      # first name word -> second, second -> verb
    else:
        deps = [1]         # subject -> verb
    verb = _VERBS[rng.integers(len(_VERBS))]
    words.append(verb)
    deps.append(-1)
    if rng.random() < 0.5:
        obj = _OBJECTS[rng.integers(len(_OBJECTS))]
        words += ["the", obj]
        deps += [k + 2, k]          # det -> noun, noun -> verb
    else:
        adv = _ADVERBS[rng.integers(len(_ADVERBS))]
        words.append(adv)
        deps.append(k)              # adverb -> verb
    return words, deps, Span(-1, 0, k - 1)


def make_document(doc_id, rng, genre=None):
    n_sent = int(rng.integers(3, 7))
    n_ent = 2 if n_sent <= 4 else int(rng.integers(2, 4))

    # entities with pairwise distinct pronouns keep references unambiguous
    chosen = []
    pronouns = set()
    for idx in rng.permutation(len(_PEOPLE)):
        person = _PEOPLE[idx]
        if person[1] not in pronouns:
            chosen.append(person)
            pronouns.add(person[1])
        if len(chosen) == n_ent:
            break

    sentences, speakers, dep_head = [], [], []
    mentions = [[] for _ in chosen]
    introduced = [False] * len(chosen)
    speaker = 0
    for s in range(n_sent):
        e = s % len(chosen)
        name, pronoun, role = chosen[e]
        if not introduced[e]:
            subject = name
            introduced[e] = True
        elif rng.random() < 0.7:
            subject = (pronoun,)
        else:
            subject = ("the", role)
        words, deps, span = _sentence(subject, rng)
        sentences.append(words)
        dep_head.append(deps)
        if rng.random() < 0.3:
            speaker = 1 - speaker
        speakers.append([f"spk{speaker}"] * len(words))
        mentions[e].append(Span(s, span.start, span.end))

    clusters = [m for m in mentions if len(m) >= 2]
    genre = genre if genre is not None else _GENRES[int(rng.integers(len(_GENRES)))]
    doc = Document(doc_id=doc_id, genre=genre, sentences=sentences,
                   speakers=speakers, dep_head=dep_head, clusters=clusters)
    return validate_document(doc)


def make_corpus(n_docs=20, seed=0):
    rng = np.random.default_rng(seed)
    return [make_document(f"synth{i:03d}", rng) for i in range(n_docs)]


def gradcheck_document():
    """Fixed three-sentence document with one cluster; used for gradient
    checks.  The cluster mixes a two-word span, a subject pronoun, and a
    non-initial single-word mention."""
    doc = Document(
        doc_id="gradcheck",
        genre="nw",
        sentences=[["Anna", "Baker", "visited", "the", "garden"],
                   ["she", "smiled", "today"],
                   ["Omar", "thanked", "her"]],
        speakers=[["spk0"] * 5, ["spk0"] * 3, ["spk1"] * 3],
        dep_head=[[1, 2, -1, 4, 2], [1, -1, 1], [1, -1, 1]],
        clusters=[[Span(0, 0, 1), Span(1, 0, 0), Span(2, 2, 2)]],
    )
    return validate_document(doc)


def audit_fixture():
    """Two sentences of lengths 3 and 4 with two gold mentions."""
    doc = Document(
        doc_id="audit",
        genre="wb",
        sentences=[["the", "cat", "slept"], ["it", "dreamed", "of", "fish"]],
        speakers=[["spk0"] * 3, ["spk0"] * 4],
        dep_head=[[1, 2, -1], [1, -1, 1, 2]],
        clusters=[[Span(0, 0, 1), Span(1, 0, 0)]],
    )
    return validate_document(doc)
