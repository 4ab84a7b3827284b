"""Round-trip tests for the embedding exporter (exporter/).

The exporter is a separate Node package; these tests drive its compiled
CLI and validate the output through the core loader.  They skip cleanly
when node or the built bundle is unavailable so the main suite never
depends on the exporter.
"""

import json
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from wordcoref import autodiff as ad
from wordcoref.corpus import load_corpus, write_corpus
from wordcoref.encoder import FileBackedEncoder, pool_tokens, read_embeddings
from wordcoref.synthetic import make_corpus

NODE = shutil.which("node")
CLI = Path(__file__).resolve().parent.parent / "exporter" / "dist" / "cli.js"

pytestmark = pytest.mark.skipif(
    NODE is None or not CLI.exists(),
    reason="node or the built exporter bundle is unavailable",
)


def run_cli(*args):
    return subprocess.run(
        [NODE, str(CLI), *args], capture_output=True, text=True
    )


@pytest.fixture(scope="module")
def exported(tmp_path_factory):
    """5-document mini corpus exported at d=8 with small windows."""
    tmp = tmp_path_factory.mktemp("exporter")
    corpus = tmp / "mini.jsonl"
    out = tmp / "mini.wlemb"
    docs = make_corpus(5, seed=42)
    write_corpus(docs, corpus)
    proc = run_cli(
        "--corpus", str(corpus),
        "--output", str(out),
        "--model", "hash-d8-l2",
        "--max-segment", "16",
        "--overlap", "4",
    )
    assert proc.returncode == 0, proc.stderr
    return corpus, out


def test_export_summary_line(exported, tmp_path):
    corpus, _ = exported
    proc = run_cli(
        "--corpus", str(corpus),
        "--output", str(tmp_path / "summary.wlemb"),
        "--model", "hash-d8-l2",
    )
    assert proc.returncode == 0
    assert "exported 5 documents" in proc.stdout
    assert "d=8" in proc.stdout


def test_round_trip_loads_and_validates(exported):
    corpus, out = exported
    docs = load_corpus(corpus)
    records = read_embeddings(out)
    assert set(records) == {doc.doc_id for doc in docs}
    for doc in docs:
        X, token_map = records[doc.doc_id]
        assert X.dtype == np.float64
        assert X.shape[1] == 8
        # token_map tiles [0, n_sub): every word exactly once.
        assert token_map.shape == (doc.n_words, 2)
        assert token_map[0, 0] == 0
        assert np.all(token_map[:, 0] <= token_map[:, 1])
        assert np.all(token_map[1:, 0] == token_map[:-1, 1] + 1)
        assert token_map[-1, 1] == X.shape[0] - 1


def test_pool_tokens_yields_one_row_per_word(exported):
    corpus, out = exported
    docs = load_corpus(corpus)
    provider = FileBackedEncoder(out, dim=8)
    W_a = ad.Parameter("W_a", np.ones((1, 8)))
    for doc in docs:
        sub = provider.embed_document(doc)
        pooled = pool_tokens(sub, W_a)
        assert pooled.T.data.shape == (doc.n_words, 8)
        # Convex pooling weights per word.
        sums = np.zeros(doc.n_words)
        np.add.at(sums, np.repeat(
            np.arange(doc.n_words),
            sub.token_map[:, 1] - sub.token_map[:, 0] + 1), pooled.weights.data)
        assert np.allclose(sums, 1.0)


def test_export_is_deterministic(exported, tmp_path):
    corpus, out = exported
    again = tmp_path / "again.wlemb"
    proc = run_cli(
        "--corpus", str(corpus),
        "--output", str(again),
        "--model", "hash-d8-l2",
        "--max-segment", "16",
        "--overlap", "4",
    )
    assert proc.returncode == 0
    assert again.read_bytes() == out.read_bytes()


def test_zero_subtoken_word_is_reported(tmp_path):
    corpus = tmp_path / "bad.jsonl"
    rec = {
        "doc_id": "bad-doc",
        "genre": "nw",
        "sentences": [["fine", "\u0007"]],
        "speakers": [["s", "s"]],
        "dep_head": [[-1, 0]],
        "clusters": [],
    }
    corpus.write_text(json.dumps(rec) + "\n")
    proc = run_cli("--corpus", str(corpus), "--output", str(tmp_path / "x.wlemb"))
    assert proc.returncode == 1
    assert "bad-doc" in proc.stderr
    assert "produced no subtokens" in proc.stderr


def test_missing_corpus_fails_cleanly(tmp_path):
    proc = run_cli(
        "--corpus", str(tmp_path / "nope.jsonl"),
        "--output", str(tmp_path / "x.wlemb"),
    )
    assert proc.returncode == 1
    assert proc.stderr.startswith("error:")
