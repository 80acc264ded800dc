import numpy as np
import pytest

pytest.importorskip("transformers")

from conftest import make_doc
from rrseg.corpus.splitting import split_corpus
from rrseg.encoders.transformer import (
    MlmSchedule,
    TransformerSentenceEncoder,
    finetune_mlm,
    masked_lm_loss,
)
from rrseg.errors import ConfigError, LeakageError


@pytest.fixture(scope="module")
def encoder(tiny_bert_dir):
    return TransformerSentenceEncoder.from_pretrained(str(tiny_bert_dir), pooling="cls")


def test_encode_shape_and_determinism(encoder):
    sents = ["The court held the appeal.", "The suit was filed."]
    a = encoder.encode(sents)
    b = encoder.encode(sents)
    assert a.shape == (2, encoder.dim)
    np.testing.assert_array_equal(a, b)


def test_pooling_modes_differ(tiny_bert_dir):
    cls = TransformerSentenceEncoder.from_pretrained(str(tiny_bert_dir), pooling="cls")
    mean = TransformerSentenceEncoder.from_pretrained(str(tiny_bert_dir), pooling="mean")
    assert cls.encoder_id != mean.encoder_id
    sents = ["The court held the appeal in the act."]
    assert not np.array_equal(cls.encode(sents), mean.encode(sents))


def test_encoder_id_tracks_weights_and_length(tiny_bert_dir):
    a = TransformerSentenceEncoder.from_pretrained(str(tiny_bert_dir), max_len=32)
    b = TransformerSentenceEncoder.from_pretrained(str(tiny_bert_dir), max_len=16)
    assert a.encoder_id != b.encoder_id
    assert "L32" in a.encoder_id


def test_unknown_pooling_rejected(tiny_bert_dir):
    with pytest.raises(ConfigError):
        TransformerSentenceEncoder.from_pretrained(str(tiny_bert_dir), pooling="max")


def test_mlm_finetune_changes_weights_and_loss(encoder):
    docs = [make_doc(f"m{i}", ["FAC", "STA", "RPC"]) for i in range(4)]
    schedule = MlmSchedule(epochs=1, batch_size=4, lr=1e-3, max_len=32)
    tuned = finetune_mlm(encoder, docs, schedule)
    assert tuned.encoder_id != encoder.encoder_id
    sents = ["The court held the appeal."]
    assert not np.array_equal(tuned.encode(sents), encoder.encode(sents))
    loss = masked_lm_loss(tuned, [s.text for d in docs for s in d.sentences])
    assert np.isfinite(loss)


def test_mlm_finetune_guards_leakage(encoder):
    docs = [make_doc(f"m{i}", ["FAC", "STA"]) for i in range(6)]
    split = split_corpus(docs, seed=0)
    held_out = [d for d in docs if d.doc_id in split.val]
    with pytest.raises(LeakageError):
        finetune_mlm(encoder, held_out, MlmSchedule(epochs=0), split=split)
