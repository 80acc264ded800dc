import json

import numpy as np
import pytest
import torch

from rrseg.corpus.records import select_docs
from rrseg.errors import ConfigError, DataError
from rrseg.labelers.checkpoint import load_checkpoint
from rrseg.labelers.config import VARIANTS, SequenceModelConfig
from rrseg.labelers.models import make_batch, shift_gold
from rrseg.labelers.training import (
    evaluate_labeler,
    predict_labels,
    sweep_lambda,
    train_sequence_labeler,
    write_predictions_jsonl,
)


def cfg(**kw):
    base = dict(variant="bilstm_crf", input_dim=32, hidden_dim=16, epochs=4,
                batch_docs=8, seed=0)
    base.update(kw)
    return SequenceModelConfig(**base)


# --- config validation ---


def test_variant_catalog():
    assert VARIANTS == ("crf", "bilstm", "bilstm_crf", "lsp_bilstm_crf", "mtl")


def test_config_validation():
    with pytest.raises(ConfigError):
        cfg(variant="rnn")
    with pytest.raises(ConfigError):
        cfg(variant="mtl")  # needs shift_input_dim
    with pytest.raises(ConfigError):
        cfg(variant="mtl", shift_input_dim=8, lambda_shift=1.5)
    with pytest.raises(ConfigError):
        cfg(lambda_shift=0.5)  # lambda without mtl
    with pytest.raises(ConfigError):
        cfg(label_set=("FAC",))
    with pytest.raises(ConfigError):
        cfg(boundary_shift="learned")  # shift-aware variants only
    with pytest.raises(ConfigError):
        cfg(variant="mtl", shift_input_dim=8, lambda_shift=0.5,
            boundary_shift="learned")  # needs shift_embedding_dim


def test_config_resolved_defaults():
    assert cfg().resolved_lr == 0.01
    assert cfg(variant="mtl", shift_input_dim=8, lambda_shift=0.5).resolved_lr == 0.005
    assert cfg(hidden_dim=None).resolved_hidden == 16  # input_dim // 2
    back = SequenceModelConfig.from_dict(cfg().to_dict())
    assert back == cfg()


# --- training ---


def test_training_is_seed_deterministic(block_corpus, block_split, hash_source, tmp_path):
    kw = dict(epochs=3)
    r1 = train_sequence_labeler(cfg(), hash_source, block_corpus, block_split,
                                out_dir=tmp_path / "a", **kw)
    r2 = train_sequence_labeler(cfg(), hash_source, block_corpus, block_split,
                                out_dir=tmp_path / "b", **kw)
    assert [e["train_loss"] for e in r1.log] == [e["train_loss"] for e in r2.log]
    assert r1.val_macro_f1 == r2.val_macro_f1
    r3 = train_sequence_labeler(cfg(seed=1), hash_source, block_corpus, block_split, **kw)
    assert [e["train_loss"] for e in r3.log] != [e["train_loss"] for e in r1.log]


def test_all_variants_train_and_predict(block_corpus, block_split, hash_source):
    docs = select_docs(block_corpus, block_split.val)
    for variant in ("crf", "bilstm", "bilstm_crf"):
        result = train_sequence_labeler(
            cfg(variant=variant, epochs=2), hash_source, block_corpus, block_split
        )
        preds = predict_labels(result.model, hash_source, docs)
        assert set(preds) == {d.doc_id for d in docs}
        for d in docs:
            assert len(preds[d.doc_id]) == len(d.sentences)


def test_checkpoint_roundtrip_preserves_predictions(
    block_corpus, block_split, hash_source, tmp_path
):
    result = train_sequence_labeler(
        cfg(epochs=3), hash_source, block_corpus, block_split, out_dir=tmp_path / "ck"
    )
    docs = select_docs(block_corpus, block_split.test)
    before = predict_labels(result.model, hash_source, docs)
    ckpt = load_checkpoint(tmp_path / "ck")
    after = predict_labels(ckpt.model, hash_source, docs)
    assert before == after
    assert ckpt.val_macro_f1 == result.val_macro_f1
    assert ckpt.feature_source_id == hash_source.source_id


def test_checkpoint_detects_tampered_weights(
    block_corpus, block_split, hash_source, tmp_path
):
    train_sequence_labeler(
        cfg(epochs=1), hash_source, block_corpus, block_split, out_dir=tmp_path / "ck"
    )
    weights = tmp_path / "ck" / "weights.pt"
    state = torch.load(weights, weights_only=True)
    key = next(iter(state))
    state[key] = state[key] + 1.0
    torch.save(state, weights)
    with pytest.raises(DataError, match="fingerprint"):
        load_checkpoint(tmp_path / "ck")


def test_early_stopping_cuts_training(block_corpus, block_split, hash_source):
    result = train_sequence_labeler(
        cfg(epochs=40), hash_source, block_corpus, block_split, early_stop_patience=2
    )
    assert len(result.log) < 40


def test_evaluate_labeler_report(block_corpus, block_split, hash_source):
    result = train_sequence_labeler(cfg(epochs=3), hash_source, block_corpus, block_split)
    report = evaluate_labeler(
        result.model, hash_source, select_docs(block_corpus, block_split.test)
    )
    assert 0.0 <= report.macro_f1 <= 1.0
    assert report.metadata["variant"] == "bilstm_crf"


def test_write_predictions_jsonl(tmp_path):
    path = tmp_path / "p.jsonl"
    write_predictions_jsonl(path, {"d1": ["FAC", "STA"]})
    row = json.loads(path.read_text().splitlines()[0])
    assert row == {"doc_id": "d1", "labels": ["FAC", "STA"]}


# --- shift gold targets ---


def test_shift_gold_targets_and_mask():
    labels = torch.tensor([[0, 0, 1, 1], [2, 3, 0, 0]])
    mask = torch.tensor([[True, True, True, True], [True, True, False, False]])
    targets, valid = shift_gold(labels, mask)
    assert targets.shape == (2, 3)
    assert targets[0].tolist() == [0, 1, 0]
    assert valid[0].tolist() == [True, True, True]
    assert targets[1, 0] == 1
    assert valid[1].tolist() == [True, False, False]


# --- learned boundary variant ---


def test_learned_boundary_trains(block_corpus, block_split, hash_source, tmp_path):
    import rrseg.labelers.compose  # noqa: F401  (shift rows built by hand below)

    class FakeShift:
        dim = 2 * 4 + 32
        source_id = "fake-composed"

        def rows_for(self, doc):
            rng = np.random.default_rng(abs(hash(doc.doc_id)) % 2**32)
            return rng.normal(size=(len(doc.sentences), self.dim)).astype(np.float32)

    config = cfg(
        variant="mtl", shift_input_dim=2 * 4 + 32, lambda_shift=0.4,
        boundary_shift="learned", shift_embedding_dim=4, epochs=2,
    )
    result = train_sequence_labeler(
        config, hash_source, block_corpus, block_split, shift_source=FakeShift()
    )
    assert result.model.boundary is not None
    preds = predict_labels(
        result.model, hash_source, select_docs(block_corpus, block_split.val),
        shift_source=FakeShift(),
    )
    assert preds


def test_mtl_prediction_requires_shift_source(block_corpus, block_split, hash_source):
    class FakeShift:
        dim = 40
        source_id = "fake"

        def rows_for(self, doc):
            return np.zeros((len(doc.sentences), 40), dtype=np.float32)

    config = cfg(variant="mtl", shift_input_dim=40, lambda_shift=0.5, epochs=1)
    result = train_sequence_labeler(
        config, hash_source, block_corpus, block_split, shift_source=FakeShift()
    )
    with pytest.raises(ConfigError, match="shift"):
        predict_labels(result.model, hash_source, block_corpus[:2])


def test_sweep_lambda_prefers_smaller_on_tie(block_corpus, block_split, hash_source):
    class FakeShift:
        dim = 40
        source_id = "fake"

        def rows_for(self, doc):
            return np.zeros((len(doc.sentences), 40), dtype=np.float32)

    base = cfg(variant="mtl", shift_input_dim=40, lambda_shift=0.5, epochs=1)
    sweep = sweep_lambda(
        base, hash_source, FakeShift(), block_corpus, block_split, grid=[0.2, 0.8]
    )
    assert [r["lambda"] for r in sweep.rows] == [0.2, 0.8]
    assert sweep.best_lambda in (0.2, 0.8)
    scores = [r["val_macro_f1"] for r in sweep.rows]
    if scores[0] == scores[1]:
        assert sweep.best_lambda == 0.2


def test_make_batch_validation():
    with pytest.raises(DataError):
        make_batch([])
    feats = np.zeros((2, 4), dtype=np.float32)
    with pytest.raises(DataError, match="label count"):
        make_batch([{"features": feats, "labels": [0], "doc_id": "d"}])
