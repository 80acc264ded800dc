"""Self-training distillation: config guards, the degenerate alpha_u = 0 run,
loss arithmetic, and the teacher-student fingerprint chain."""
import json

import pytest
import torch

from rrseg.distill import (
    DistillConfig,
    self_train,
    self_training_loss,
    supervised_loss,
    verify_chain,
)
from rrseg.errors import ConfigError, DataError, LeakageError
from rrseg.labelers.checkpoint import state_fingerprint
from rrseg.labelers.config import SequenceModelConfig
from rrseg.labelers.training import predict_labels, train_sequence_labeler
from rrseg.synthetic import generate_block_corpus


def student_cfg(**kw):
    base = dict(variant="bilstm_crf", input_dim=32, hidden_dim=16, epochs=4,
                batch_docs=8, seed=1)
    base.update(kw)
    return SequenceModelConfig(**base)


@pytest.fixture(scope="module")
def pool():
    # seed is baked into the synthetic doc ids, so this pool cannot collide
    # with the seed-7 corpus used by the shared fixtures
    return generate_block_corpus(8, seed=9)


@pytest.fixture(scope="module")
def teacher(block_corpus, block_split, hash_source):
    return train_sequence_labeler(
        student_cfg(seed=0), hash_source, block_corpus, block_split
    )


def test_config_validation():
    with pytest.raises(ConfigError):
        DistillConfig(student=student_cfg(), alpha_u=-0.1)
    with pytest.raises(ConfigError):
        DistillConfig(student=student_cfg(), iterations=0)
    with pytest.raises(ConfigError):
        DistillConfig(student=student_cfg(), unlabeled_per_iteration=0)
    d = DistillConfig(student=student_cfg()).to_dict()
    assert d["alpha_u"] == 0.3 and d["student"]["variant"] == "bilstm_crf"


def test_pool_overlap_is_leakage(teacher, block_corpus, block_split, hash_source):
    cfg = DistillConfig(student=student_cfg(), iterations=1)
    with pytest.raises(LeakageError):
        self_train(teacher, block_corpus, block_corpus[:3], cfg, hash_source, block_split)


def test_alpha_zero_matches_plain_supervised(
    teacher, block_corpus, block_split, hash_source, pool, tmp_path
):
    cfg = DistillConfig(student=student_cfg(), alpha_u=0.0, iterations=1,
                        unlabeled_per_iteration=4)
    result = self_train(
        teacher, block_corpus, pool, cfg, hash_source, block_split,
        out_dir=tmp_path / "run",
    )
    plain = train_sequence_labeler(student_cfg(), hash_source, block_corpus, block_split)
    assert [e["train_loss"] for e in result.student.log] == [
        e["train_loss"] for e in plain.log
    ]
    assert state_fingerprint(result.student.model.state_dict()) == state_fingerprint(
        plain.model.state_dict()
    )
    assert result.final_val_f1 == plain.val_macro_f1


def test_loss_arithmetic(teacher, block_corpus, block_split, hash_source, pool):
    from rrseg.corpus.records import select_docs

    model = teacher.model
    labeled = select_docs(block_corpus, block_split.train)
    pseudo_labels = predict_labels(model, hash_source, pool)
    base = supervised_loss(model, hash_source, labeled)
    assert base > 0.0
    assert self_training_loss(
        model, hash_source, labeled, pool, pseudo_labels, 0.0
    ) == base
    full = self_training_loss(model, hash_source, labeled, pool, pseudo_labels, 1.0)
    half = self_training_loss(model, hash_source, labeled, pool, pseudo_labels, 0.5)
    assert half == pytest.approx(base + 0.5 * (full - base), rel=1e-9)
    with pytest.raises(DataError):
        supervised_loss(model, hash_source, [])


def test_chain_verifies_and_detects_tampering(
    teacher, block_corpus, block_split, hash_source, pool, tmp_path
):
    cfg = DistillConfig(student=student_cfg(epochs=2), alpha_u=0.3, iterations=2,
                        unlabeled_per_iteration=3)
    result = self_train(
        teacher, block_corpus, pool, cfg, hash_source, block_split,
        out_dir=tmp_path / "run",
    )
    assert result.log_path is not None
    assert len(result.records) == 2
    for i, rec in enumerate(result.records, start=1):
        assert rec["iteration"] == i
        assert rec["n_labeled"] == len(block_split.train)
        assert rec["n_pseudo"] == 3
        assert rec["alpha_u"] == 0.3

    chain = verify_chain(result.log_path)
    assert len(chain) == 3
    assert chain[0] == result.records[0]["teacher_fingerprint"]
    assert chain[-1] == state_fingerprint(result.student.model.state_dict())

    # break the logged chain
    log = json.loads(result.log_path.read_text())
    log["records"][0]["student_fingerprint"] = "0" * len(chain[-1])
    with pytest.raises(DataError):
        verify_chain(log)

    # perturb stored weights so the checkpoint no longer matches the log
    wfile = result.log_path.parent / "iteration_01" / "checkpoint" / "weights.pt"
    state = torch.load(wfile, map_location="cpu", weights_only=True)
    name = next(iter(state))
    state[name] = state[name] + 1.0
    torch.save(state, wfile)
    with pytest.raises(DataError, match="fingerprint"):
        verify_chain(result.log_path)


def test_pool_exhaustion(teacher, block_corpus, block_split, hash_source, pool):
    cfg = DistillConfig(student=student_cfg(epochs=1), iterations=4,
                        unlabeled_per_iteration=3)
    with pytest.raises(DataError, match="exhausted"):
        self_train(teacher, block_corpus, pool, cfg, hash_source, block_split)
