"""Word-level coreference resolution: link head words, then recover spans."""

from .corpus import (Document, Span, WordLevelDoc, extract_head, load_corpus,
                     to_word_level, write_corpus, write_word_level)
from .metrics import audit, b_cubed, ceaf_phi4, conll_f1, muc
from .model import ModelConfig, Prediction, WordCorefModel
from .training import TrainConfig, TrainResult, evaluate_model, train

__version__ = "0.1.0"

__all__ = [
    "Document", "Span", "WordLevelDoc", "extract_head", "load_corpus",
    "to_word_level", "write_corpus", "write_word_level",
    "audit", "b_cubed", "ceaf_phi4", "conll_f1", "muc",
    "ModelConfig", "Prediction", "WordCorefModel",
    "TrainConfig", "TrainResult", "evaluate_model", "train",
    "__version__",
]
