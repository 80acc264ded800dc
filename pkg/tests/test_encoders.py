import numpy as np
import pytest

from conftest import make_doc
from rrseg.encoders.base import SentenceDocumentAdapter
from rrseg.encoders.handcrafted import DEFAULT_DIM, HandcraftedFeaturizer
from rrseg.encoders.hashing import HashingSentenceEncoder
from rrseg.encoders.static_vectors import StaticVectorEncoder
from rrseg.errors import ConfigError


def test_hashing_encoder_deterministic():
    enc = HashingSentenceEncoder(dim=16)
    a = enc.encode(["The court held.", "Appeal allowed."])
    b = enc.encode(["The court held.", "Appeal allowed."])
    np.testing.assert_array_equal(a, b)
    assert a.shape == (2, 16)
    assert a.dtype == np.float32


def test_hashing_salt_changes_identity_and_output():
    e1 = HashingSentenceEncoder(dim=16, salt="v1")
    e2 = HashingSentenceEncoder(dim=16, salt="v2")
    assert e1.encoder_id != e2.encoder_id
    a = e1.encode(["The court held the appeal."])
    b = e2.encode(["The court held the appeal."])
    assert not np.array_equal(a, b)


def test_sentence_document_adapter(block_corpus):
    enc = HashingSentenceEncoder(dim=16)
    adapter = SentenceDocumentAdapter(enc)
    doc = block_corpus[0]
    via_doc = adapter.encode_doc(doc)
    direct = enc.encode([s.text for s in doc.sentences])
    np.testing.assert_array_equal(via_doc, direct)
    assert adapter.encoder_id == enc.encoder_id


def test_handcrafted_featurizer_shape_and_signal():
    feat = HandcraftedFeaturizer()
    assert feat.dim == DEFAULT_DIM
    doc = make_doc("h1", ["FAC", "ARG-P", "RPC"])
    rows = feat.encode_doc(doc)
    assert rows.shape == (3, DEFAULT_DIM)
    assert np.isfinite(rows).all()
    # position features distinguish first from last sentence
    assert not np.array_equal(rows[0], rows[2])


def test_static_vectors_load_and_oov(tmp_path):
    path = tmp_path / "vecs.txt"
    path.write_text(
        "3 4\n"
        "court 1 0 0 0\n"
        "appeal 0 1 0 0\n"
        "act 0 0 1 0\n"
    )
    enc = StaticVectorEncoder.load(path)
    assert enc.dim == 4
    rows = enc.encode(["The court heard the appeal", "zzz unknown words"])
    np.testing.assert_allclose(rows[0], [0.5, 0.5, 0.0, 0.0])
    np.testing.assert_array_equal(rows[1], np.zeros(4))


def test_static_vectors_bad_header(tmp_path):
    path = tmp_path / "vecs.txt"
    path.write_text("not a header\ncourt 1 0\n")
    with pytest.raises(ConfigError, match="header"):
        StaticVectorEncoder.load(path)


def test_static_vectors_ragged_row(tmp_path):
    path = tmp_path / "vecs.txt"
    path.write_text("1 4\ncourt 1 0 0\n")
    with pytest.raises(ConfigError, match="expected 4"):
        StaticVectorEncoder.load(path)
