"""Joint-objective behavior of the multitask tagger.

Covers the exact λ combination (endpoints must be bitwise identities, not
approximations), gradient routing at λ=0, single-sentence documents, and the
loss-normalization switch.
"""
import numpy as np
import pytest
import torch

from rrseg.errors import DataError
from rrseg.labelers.config import SequenceModelConfig
from rrseg.labelers.models import build_tagger, make_batch, shift_gold


def mtl_cfg(**kw):
    base = dict(
        variant="mtl",
        input_dim=8,
        shift_input_dim=10,
        hidden_dim=6,
        shift_hidden_dim=5,
        lambda_shift=0.37,
        epochs=1,
        seed=0,
        label_set=("FAC", "ARG", "PRE"),
    )
    base.update(kw)
    return SequenceModelConfig(**base)


def doc(rng, n, labels, *, d=8, ds=10):
    return {
        "doc_id": f"d{n}-{labels[0]}",
        "features": rng.normal(size=(n, d)).astype(np.float32),
        "shift_features": rng.normal(size=(n, ds)).astype(np.float32),
        "labels": list(labels),
    }


@pytest.fixture()
def batch():
    rng = np.random.default_rng(7)
    return make_batch([
        doc(rng, 4, [0, 0, 1, 2]),
        doc(rng, 2, [1, 1]),
        doc(rng, 3, [2, 0, 0]),
    ])


def test_doc_losses_is_literal_lambda_mix(batch):
    model = build_tagger(mtl_cfg())
    l_shift, l_rr = model.loss_components(batch)
    assert l_shift.shape == l_rr.shape == (3,)
    expected = 0.37 * l_shift + (1 - 0.37) * l_rr
    assert torch.equal(model.doc_losses(batch), expected)


def test_lambda_endpoints_are_exact(batch):
    # same seed => build_tagger yields bitwise-identical parameters for any λ
    m0 = build_tagger(mtl_cfg(lambda_shift=0.0))
    m1 = build_tagger(mtl_cfg(lambda_shift=1.0))
    ls0, lrr0 = m0.loss_components(batch)
    ls1, lrr1 = m1.loss_components(batch)
    assert torch.equal(ls0, ls1)
    assert torch.equal(lrr0, lrr1)
    assert torch.equal(m0.doc_losses(batch), lrr0)
    assert torch.equal(m1.doc_losses(batch), ls1)


def test_lambda_zero_starves_only_the_shift_head(batch):
    model = build_tagger(mtl_cfg(lambda_shift=0.0))
    model.doc_losses(batch).sum().backward()
    head_grads = [p.grad for p in model.shift_head.parameters()]
    assert all(g is not None for g in head_grads)
    assert all(int(torch.count_nonzero(g)) == 0 for g in head_grads)
    # the shift encoder still feeds the CRF emissions, so it keeps gradients
    lstm_grad = model.shift_lstm.weight_ih_l0.grad
    assert lstm_grad is not None and int(torch.count_nonzero(lstm_grad)) > 0
    rr_grad = model.rr_lstm.weight_ih_l0.grad
    assert rr_grad is not None and int(torch.count_nonzero(rr_grad)) > 0


def test_single_sentence_doc_gets_zero_shift_loss():
    rng = np.random.default_rng(3)
    model = build_tagger(mtl_cfg())

    mixed = make_batch([doc(rng, 1, [2]), doc(rng, 3, [0, 1, 1])])
    l_shift, l_rr = model.loss_components(mixed)
    assert l_shift[0].item() == 0.0
    assert l_shift[1].item() > 0.0
    assert torch.isfinite(l_rr).all()

    # a batch of nothing but singletons takes the empty-targets path
    only = make_batch([doc(rng, 1, [0]), doc(rng, 1, [1])])
    l_shift, l_rr = model.loss_components(only)
    assert torch.equal(l_shift, torch.zeros(2))
    assert torch.isfinite(l_rr).all()


def test_normalization_rescales_rr_loss_only(batch):
    m_mean = build_tagger(mtl_cfg(loss_normalization="token_mean"))
    m_sum = build_tagger(mtl_cfg(loss_normalization="doc_sum"))
    ls_mean, lrr_mean = m_mean.loss_components(batch)
    ls_sum, lrr_sum = m_sum.loss_components(batch)
    assert torch.equal(ls_mean, ls_sum)
    lengths = batch.lengths.to(lrr_sum.dtype)
    assert torch.equal(lrr_mean, lrr_sum / lengths)
    assert not torch.equal(lrr_mean, lrr_sum)


def test_predict_shifts_lengths(batch):
    model = build_tagger(mtl_cfg())
    preds = model.predict_shifts(batch)
    assert [len(p) for p in preds] == [3, 1, 2]
    assert all(v in (0, 1) for p in preds for v in p)

    rng = np.random.default_rng(5)
    singleton = make_batch([doc(rng, 1, [0])])
    assert model.predict_shifts(singleton) == [[]]


def test_shift_gold_worked_example():
    labels = torch.tensor([[0, 0, 1, 2], [1, 2, 0, 0]])
    mask = torch.tensor([[True, True, True, True], [True, True, False, False]])
    targets, valid = shift_gold(labels, mask)
    assert targets.tolist() == [[0, 1, 1], [1, 1, 0]]
    assert valid.tolist() == [[True, True, True], [True, False, False]]


def test_missing_inputs_raise(batch):
    model = build_tagger(mtl_cfg())
    unlabeled = make_batch(
        [
            {
                "doc_id": "u",
                "features": np.zeros((2, 8), dtype=np.float32),
                "shift_features": np.zeros((2, 10), dtype=np.float32),
                "labels": [0, 1],
            }
        ],
        with_labels=False,
    )
    with pytest.raises(DataError):
        model.loss_components(unlabeled)

    plain = make_batch(
        [{"doc_id": "p", "features": np.zeros((2, 8), dtype=np.float32), "labels": [0, 1]}]
    )
    with pytest.raises(DataError):
        model.loss_components(plain)
