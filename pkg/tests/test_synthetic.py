"""Synthetic block corpus: determinism, structure, and gold-label invariants."""
import numpy as np
import pytest

from rrseg.errors import ConfigError
from rrseg.labels import REDUCTION_MAP, MainLabel
from rrseg.synthetic import CANONICAL_FINE, gaussian_label_embeddings, generate_block_corpus


def test_deterministic_and_seed_sensitive():
    a = generate_block_corpus(6, seed=4)
    b = generate_block_corpus(6, seed=4)
    assert a == b
    c = generate_block_corpus(6, seed=5)
    assert [d.doc_id for d in c] != [d.doc_id for d in a]
    assert [s.text for s in c[0].sentences] != [s.text for s in a[0].sentences]


def test_shape_and_labels():
    docs = generate_block_corpus(12, seed=2, domain="CL", min_sentences=5)
    assert len(docs) == 12
    assert all(d.domain == "CL" for d in docs)
    assert sorted(d.doc_id for d in docs) == [f"syn-2-{i:04d}" for i in range(12)]
    for d in docs:
        assert len(d.sentences) >= 5
        for s in d.sentences:
            assert s.gold is not None and s.gold_main is not None
            assert REDUCTION_MAP[s.gold] is s.gold_main
            assert CANONICAL_FINE[s.gold_main] is s.gold
    seen = {s.gold_main for d in docs for s in d.sentences}
    assert seen == set(MainLabel)


def test_block_structure():
    docs = generate_block_corpus(20, seed=6, mean_block=4.0)
    runs = []
    for d in docs:
        labs = [s.gold_main for s in d.sentences]
        run = 1
        for prev, cur in zip(labs, labs[1:]):
            if cur is prev:
                run += 1
            else:
                runs.append(run)
                run = 1
        runs.append(run)
    # geometric blocks with mean 4: far fewer runs than sentences
    n_sent = sum(len(d.sentences) for d in docs)
    assert len(runs) < 0.6 * n_sent
    assert max(runs) > 1


def test_validation():
    with pytest.raises(ConfigError):
        generate_block_corpus(0)
    with pytest.raises(ConfigError):
        generate_block_corpus(3, mean_block=0.5)


def test_gaussian_label_embeddings():
    docs = generate_block_corpus(4, seed=1)
    rows = gaussian_label_embeddings(docs, dim=16, seed=0)
    assert set(rows) == {d.doc_id for d in docs}
    for d in docs:
        mat = rows[d.doc_id]
        assert mat.shape == (len(d.sentences), 16)
        assert mat.dtype == np.float32
    again = gaussian_label_embeddings(docs, dim=16, seed=0)
    assert all(np.array_equal(rows[k], again[k]) for k in rows)
