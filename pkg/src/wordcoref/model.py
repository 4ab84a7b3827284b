"""End-to-end model: encoder -> token pooling -> antecedent scoring ->
clustering -> span reconstruction."""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import checkpoint as ckpt
from . import coref, encoder, params, spans
from .corpus import DEFAULT_GENRES


@dataclass
class ModelConfig:
    dim: int = 64
    buckets: int = 4096
    feat_dim: int = 16
    ffnn_hidden: int = 128
    span_hidden: int = 128
    k: int = 50
    dropout: float = 0.0
    genres: tuple = DEFAULT_GENRES

    n_distance_buckets: int = field(init=False, default=9)


@dataclass
class Prediction:
    links: np.ndarray          # antecedent index per token, -1 for none
    head_clusters: list
    span_clusters: list
    pair_count: int


class WordCorefModel:
    """Holds all parameters and wires the document pipeline together."""

    def __init__(self, config, rng, embeddings_path=None):
        self.config = config
        self.store = params.ParameterStore()
        self._build_parameters(rng, with_toy=embeddings_path is None)
        if embeddings_path is None:
            self.provider = encoder.ToyEncoder(self.store, config.dim, config.buckets)
            self.encoder_trainable = True
        else:
            self.provider = encoder.FileBackedEncoder(embeddings_path, config.dim)
            self.encoder_trainable = False
        self._rng = rng
        self.training = False

    def _build_parameters(self, rng, with_toy):
        c = self.config
        st = self.store
        if with_toy:
            for name, shape in encoder.ToyEncoder.parameter_shapes(c.dim, c.buckets).items():
                init = params.normal if name == "toy.embed" else params.xavier
                if name.endswith(".b"):
                    init = params.zeros
                st.create(name, shape, init, rng)

        st.create("W_a", (1, c.dim), params.normal, rng)
        st.create("W_c", (c.dim, c.dim),
                  lambda r, s: r.normal(0.0, 1.0 / np.sqrt(c.dim), size=s), rng)

        pair_dim = 3 * c.dim + 3 * c.feat_dim
        st.create("ffnn_a.0.W", (pair_dim, c.ffnn_hidden), params.xavier, rng)
        st.create("ffnn_a.0.b", (c.ffnn_hidden,), params.zeros, rng)
        st.create("ffnn_a.1.W", (c.ffnn_hidden, c.ffnn_hidden), params.xavier, rng)
        st.create("ffnn_a.1.b", (c.ffnn_hidden,), params.zeros, rng)
        st.create("ffnn_a.out.W", (c.ffnn_hidden, 1), params.xavier, rng)
        st.create("ffnn_a.out.b", (1,), params.zeros, rng)

        st.create("feat.distance", (c.n_distance_buckets, c.feat_dim), params.normal, rng)
        st.create("feat.genre", (len(c.genres), c.feat_dim), params.normal, rng)
        st.create("feat.speaker", (2, c.feat_dim), params.normal, rng)

        st.create("span.ffnn.W", (2 * c.dim, c.span_hidden), params.xavier, rng)
        st.create("span.ffnn.b", (c.span_hidden,), params.zeros, rng)
        st.create("span.conv.K", (3, c.span_hidden, 2), params.xavier, rng)
        st.create("span.conv.b", (2,), params.zeros, rng)

    # -- pipeline pieces ------------------------------------------------

    def genre_index(self, doc):
        try:
            return self.config.genres.index(doc.genre)
        except ValueError:
            raise ValueError(f"doc {doc.doc_id!r}: unknown genre {doc.genre!r}") from None

    def token_matrix(self, doc):
        sub = self.provider.embed_document(doc)
        tm = encoder.pool_tokens(sub, self.store.get("W_a"))
        if self.config.dropout > 0 and self.training:
            tm.T = ad.dropout(tm.T, self.config.dropout, self._rng, True)
        return tm

    def antecedent_scores(self, doc, T):
        cs = coref.coarse_scores(T, self.store.get("W_c"))
        cand, counts = coref.top_k_prune(cs.masked, self.config.k)
        feature_ids = coref.pair_feature_indices(
            doc, cand, counts, self.genre_index(doc))
        s_a = coref.fine_scores(T, cand, counts, feature_ids, self.store)
        return coref.total_scores(cs, cand, counts, s_a)

    def boundary_scores(self, head, T, doc):
        return spans.score_boundaries(head, T, doc, self.store)

    def predict_document(self, doc):
        self.training = False
        tm = self.token_matrix(doc)
        scores = self.antecedent_scores(doc, tm.T)
        links = coref.decode_antecedents(scores)
        head_clusters = coref.build_clusters(links)
        span_clusters = spans.reconstruct(head_clusters, tm.T, doc, self.store)
        return Prediction(links=links,
                          head_clusters=head_clusters,
                          span_clusters=span_clusters,
                          pair_count=scores.pair_count)

    def predict_spans_for_heads(self, doc, heads):
        """Predicted span per head word (used for span-accuracy reporting)."""
        tm = self.token_matrix(doc)
        return {
            h: spans.predict_span(self.boundary_scores(h, tm.T, doc))
            for h in heads
        }

    # -- persistence -----------------------------------------------------

    def save(self, path):
        ckpt.save(path, self.store.to_arrays())

    def load(self, path):
        self.store.load_arrays(ckpt.load(path))

    def trainable_parameters(self):
        if self.encoder_trainable:
            return self.store.all()
        return [p for p in self.store.all() if not p.name.startswith("toy.")]

    def loss_sensitive_parameters(self):
        """Trainable parameters that can move the joint loss.

        The boundary-convolution bias cannot: a uniform shift of a score
        column cancels in both the boundary cross-entropy and the argmax
        decoding, so its exact gradient is zero and finite differences on
        it measure only rounding noise.
        """
        return [p for p in self.trainable_parameters() if p.name != "span.conv.b"]

    def encoder_parameters(self):
        return self.store.select(("toy.",))

    def task_parameters(self):
        return [p for p in self.store.all() if not p.name.startswith("toy.")]
