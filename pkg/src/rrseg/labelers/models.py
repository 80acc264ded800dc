"""Sequence-labeling model variants over precomputed sentence features.

All models consume padded document batches and report one loss per document,
so the training loop can weigh documents independently of how they were
batched. Bidirectional LSTMs run over packed sequences; padded positions never
leak into valid ones.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from torch import Tensor, nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from ..errors import ConfigError, DataError
from .config import SequenceModelConfig
from .crf import LinearChainCRF

__all__ = [
    "DocBatch",
    "make_batch",
    "SequenceTagger",
    "BiLSTMTagger",
    "BiLSTMCRFTagger",
    "EmissionCRFTagger",
    "MultitaskTagger",
    "build_tagger",
    "shift_gold",
]


@dataclass
class DocBatch:
    """Padded batch of documents.

    features: (B, T, D) float32 main features (plain sentence embeddings for
    the mtl variant). mask: (B, T) bool, True at valid positions, left-aligned.
    labels: (B, T) int64 with arbitrary values at padded positions, or None at
    inference. shift_features: (B, T, Ds) composed shift-aware rows, mtl only.
    """

    features: Tensor
    mask: Tensor
    labels: Tensor | None = None
    shift_features: Tensor | None = None
    doc_ids: tuple[str, ...] = ()

    @property
    def lengths(self) -> Tensor:
        return self.mask.sum(dim=1)

    def __len__(self) -> int:
        return int(self.features.shape[0])


def make_batch(
    docs: Sequence[dict],
    *,
    with_labels: bool = True,
) -> DocBatch:
    """Pad a list of per-document dicts into one batch.

    Each dict carries ``features`` (n, D) float arrays, optionally ``labels``
    (n,) ints, ``shift_features`` (n, Ds), and ``doc_id``.
    """
    if not docs:
        raise DataError("cannot build an empty batch")
    lengths = [int(np.asarray(d["features"]).shape[0]) for d in docs]
    if min(lengths) < 1:
        raise DataError("documents must have at least one sentence")
    b, t = len(docs), max(lengths)
    dim = int(np.asarray(docs[0]["features"]).shape[1])
    feats = torch.zeros(b, t, dim, dtype=torch.float32)
    mask = torch.zeros(b, t, dtype=torch.bool)
    labels: Tensor | None = None
    shift: Tensor | None = None
    if with_labels:
        labels = torch.zeros(b, t, dtype=torch.int64)
    if docs[0].get("shift_features") is not None:
        sdim = int(np.asarray(docs[0]["shift_features"]).shape[1])
        shift = torch.zeros(b, t, sdim, dtype=torch.float32)
    for i, d in enumerate(docs):
        n = lengths[i]
        f = torch.as_tensor(np.asarray(d["features"], dtype=np.float32))
        if f.shape[1] != dim:
            raise DataError(f"feature width mismatch in batch: {f.shape[1]} vs {dim}")
        feats[i, :n] = f
        mask[i, :n] = True
        if labels is not None:
            y = d.get("labels")
            if y is None:
                raise DataError(f"document {d.get('doc_id')!r} has no labels")
            if len(y) != n:
                raise DataError(f"label count {len(y)} != sentence count {n}")
            labels[i, :n] = torch.as_tensor(list(y), dtype=torch.int64)
        if shift is not None:
            s = torch.as_tensor(np.asarray(d["shift_features"], dtype=np.float32))
            if s.shape[0] != n:
                raise DataError("shift_features row count must equal sentence count")
            shift[i, :n] = s
    return DocBatch(
        features=feats,
        mask=mask,
        labels=labels,
        shift_features=shift,
        doc_ids=tuple(str(d.get("doc_id", i)) for i, d in enumerate(docs)),
    )


def shift_gold(labels: Tensor, mask: Tensor) -> tuple[Tensor, Tensor]:
    """Binary transition targets from position-level labels.

    Returns (targets, valid) of shape (B, T-1): targets[b, i] = 1 iff the
    labels at i and i+1 differ, valid[b, i] = True iff both positions exist.
    """
    if labels.shape[1] < 2:
        b = labels.shape[0]
        empty = torch.zeros(b, 0, dtype=torch.int64, device=labels.device)
        return empty, empty.bool()
    targets = (labels[:, :-1] != labels[:, 1:]).long()
    valid = mask[:, :-1] & mask[:, 1:]
    return targets, valid


def _run_lstm(lstm: nn.LSTM, feats: Tensor, mask: Tensor) -> Tensor:
    """Bidirectional LSTM over padded input without pad leakage."""
    lengths = mask.sum(dim=1).cpu()
    packed = pack_padded_sequence(feats, lengths, batch_first=True, enforce_sorted=False)
    out, _ = lstm(packed)
    unpacked, _ = pad_packed_sequence(out, batch_first=True, total_length=feats.shape[1])
    return unpacked


def _argmax_rows(scores: Tensor) -> list[int]:
    """Per-row argmax with ties broken by lowest index (numpy semantics)."""
    arr = scores.detach().cpu().numpy().astype(np.float64)
    return [int(i) for i in np.argmax(arr, axis=1)]


class SequenceTagger(nn.Module):
    """Common surface: per-document losses and deterministic decoding."""

    def __init__(self, config: SequenceModelConfig):
        super().__init__()
        self.config = config
        self.num_labels = config.num_labels

    def doc_losses(self, batch: DocBatch) -> Tensor:
        raise NotImplementedError

    def decode(self, batch: DocBatch) -> list[list[int]]:
        raise NotImplementedError

    def marginals(self, batch: DocBatch) -> list[np.ndarray]:
        raise NotImplementedError

    def _normalize(self, doc_nll: Tensor, lengths: Tensor) -> Tensor:
        if self.config.loss_normalization == "token_mean":
            return doc_nll / lengths.to(doc_nll.dtype)
        return doc_nll


class BiLSTMTagger(SequenceTagger):
    """BiLSTM with a per-sentence softmax head (no label transitions)."""

    def __init__(self, config: SequenceModelConfig):
        super().__init__(config)
        h = config.resolved_hidden
        self.lstm = nn.LSTM(config.input_dim, h, batch_first=True, bidirectional=True)
        self.proj = nn.Linear(2 * h, self.num_labels)

    def logits(self, batch: DocBatch) -> Tensor:
        return self.proj(_run_lstm(self.lstm, batch.features, batch.mask))

    def doc_losses(self, batch: DocBatch) -> Tensor:
        if batch.labels is None:
            raise DataError("doc_losses needs labels")
        logits = self.logits(batch)
        ce = nn.functional.cross_entropy(
            logits.transpose(1, 2), batch.labels, reduction="none"
        )
        ce = ce * batch.mask.to(ce.dtype)
        per_doc = ce.sum(dim=1)
        return self._normalize(per_doc, batch.lengths)

    def decode(self, batch: DocBatch) -> list[list[int]]:
        logits = self.logits(batch)
        out: list[list[int]] = []
        for b in range(len(batch)):
            n = int(batch.lengths[b])
            out.append(_argmax_rows(logits[b, :n]))
        return out

    def marginals(self, batch: DocBatch) -> list[np.ndarray]:
        probs = torch.softmax(self.logits(batch), dim=-1)
        return [
            probs[b, : int(batch.lengths[b])].detach().cpu().numpy()
            for b in range(len(batch))
        ]


class _CRFTaggerBase(SequenceTagger):
    """Shared loss/decode plumbing for emission-producing CRF models."""

    crf: LinearChainCRF

    def emissions(self, batch: DocBatch) -> Tensor:
        raise NotImplementedError

    def doc_losses(self, batch: DocBatch) -> Tensor:
        if batch.labels is None:
            raise DataError("doc_losses needs labels")
        nll = self.crf.batch_nll(self.emissions(batch), batch.labels, batch.mask)
        return self._normalize(nll, batch.lengths)

    def decode(self, batch: DocBatch) -> list[list[int]]:
        return self.crf.decode_batch(self.emissions(batch), batch.mask)

    def marginals(self, batch: DocBatch) -> list[np.ndarray]:
        em = self.emissions(batch)
        out = []
        for b in range(len(batch)):
            n = int(batch.lengths[b])
            out.append(self.crf.marginals(em[b, :n]).detach().cpu().numpy())
        return out


class EmissionCRFTagger(_CRFTaggerBase):
    """Linear emissions straight from the features into a CRF.

    The classic featurized-CRF baseline: no recurrent encoder.
    """

    def __init__(self, config: SequenceModelConfig):
        super().__init__(config)
        self.proj = nn.Linear(config.input_dim, self.num_labels)
        self.crf = LinearChainCRF(self.num_labels)

    def emissions(self, batch: DocBatch) -> Tensor:
        return self.proj(batch.features)


class _LearnedBoundary(nn.Module):
    """Trainable replacements for the zero boundary slices of composed rows.

    Composed rows are [left-shift ⊕ base ⊕ right-shift]; the first row's left
    slice and the last row's right slice carry no real transition. This module
    overwrites those slices with learned vectors of width ``shift_dim``.
    """

    def __init__(self, shift_dim: int, row_dim: int):
        super().__init__()
        if row_dim < 2 * shift_dim:
            raise ConfigError(
                f"row width {row_dim} cannot hold two {shift_dim}-wide boundary slices"
            )
        self.shift_dim = shift_dim
        self.start = nn.Parameter(torch.zeros(shift_dim))
        self.end = nn.Parameter(torch.zeros(shift_dim))

    def forward(self, feats: Tensor, mask: Tensor) -> Tensor:
        out = feats.clone()
        b = feats.shape[0]
        d = self.shift_dim
        out[:, 0, :d] = self.start.unsqueeze(0).expand(b, d)
        last = mask.sum(dim=1) - 1
        rows = torch.arange(b, device=feats.device)
        out[rows, last, feats.shape[2] - d :] = self.end.unsqueeze(0).expand(b, d)
        return out


class BiLSTMCRFTagger(_CRFTaggerBase):
    """BiLSTM over the features, linear emissions, CRF on top.

    Covers both the plain embedding variant and the shift-composed variant;
    they differ only in input width and feature source.
    """

    def __init__(self, config: SequenceModelConfig):
        super().__init__(config)
        h = config.resolved_hidden
        self.lstm = nn.LSTM(config.input_dim, h, batch_first=True, bidirectional=True)
        self.proj = nn.Linear(2 * h, self.num_labels)
        self.crf = LinearChainCRF(self.num_labels)
        self.boundary: _LearnedBoundary | None = None
        if config.boundary_shift == "learned":
            self.boundary = _LearnedBoundary(config.shift_embedding_dim, config.input_dim)

    def emissions(self, batch: DocBatch) -> Tensor:
        feats = batch.features
        if self.boundary is not None:
            feats = self.boundary(feats, batch.mask)
        return self.proj(_run_lstm(self.lstm, feats, batch.mask))


class MultitaskTagger(SequenceTagger):
    """Joint shift-detection and role-labeling model.

    A shift BiLSTM reads the composed rows and a per-position binary head
    scores each adjacent transition; a separate role BiLSTM reads the plain
    sentence embeddings. Both BiLSTM outputs are concatenated into the CRF
    emissions. Per document: loss = λ·L_shift + (1−λ)·L_RR, with L_shift the
    cross-entropy averaged over the n−1 transition positions (0.0 when n=1).
    """

    def __init__(self, config: SequenceModelConfig):
        super().__init__(config)
        if config.variant != "mtl":
            raise ConfigError(f"MultitaskTagger requires variant 'mtl', got {config.variant!r}")
        h_shift = config.resolved_shift_hidden
        h_rr = config.resolved_hidden
        self.shift_lstm = nn.LSTM(
            config.shift_input_dim, h_shift, batch_first=True, bidirectional=True
        )
        self.rr_lstm = nn.LSTM(config.input_dim, h_rr, batch_first=True, bidirectional=True)
        self.shift_head = nn.Linear(2 * h_shift, 2)
        self.proj = nn.Linear(2 * h_shift + 2 * h_rr, self.num_labels)
        self.crf = LinearChainCRF(self.num_labels)
        self.boundary: _LearnedBoundary | None = None
        if config.boundary_shift == "learned":
            self.boundary = _LearnedBoundary(
                config.shift_embedding_dim, config.shift_input_dim
            )

    def _encode(self, batch: DocBatch) -> tuple[Tensor, Tensor]:
        if batch.shift_features is None:
            raise DataError("mtl batches need shift_features")
        sfeats = batch.shift_features
        if self.boundary is not None:
            sfeats = self.boundary(sfeats, batch.mask)
        shift_out = _run_lstm(self.shift_lstm, sfeats, batch.mask)
        rr_out = _run_lstm(self.rr_lstm, batch.features, batch.mask)
        return shift_out, rr_out

    def emissions(self, batch: DocBatch) -> Tensor:
        shift_out, rr_out = self._encode(batch)
        return self.proj(torch.cat([shift_out, rr_out], dim=-1))

    def loss_components(self, batch: DocBatch) -> tuple[Tensor, Tensor]:
        """Per-document (L_shift, L_RR) pair, before the λ combination."""
        if batch.labels is None:
            raise DataError("loss_components needs labels")
        shift_out, rr_out = self._encode(batch)
        emissions = self.proj(torch.cat([shift_out, rr_out], dim=-1))
        nll = self.crf.batch_nll(emissions, batch.labels, batch.mask)
        l_rr = self._normalize(nll, batch.lengths)

        targets, valid = shift_gold(batch.labels, batch.mask)
        bsz = len(batch)
        if targets.shape[1] == 0:
            l_shift = torch.zeros(bsz, dtype=l_rr.dtype, device=l_rr.device)
            return l_shift, l_rr
        # position i of the shift BiLSTM output scores the i -> i+1 transition
        logits = self.shift_head(shift_out[:, :-1])
        ce = nn.functional.cross_entropy(logits.transpose(1, 2), targets, reduction="none")
        ce = ce * valid.to(ce.dtype)
        n_pairs = valid.sum(dim=1)
        l_shift = torch.where(
            n_pairs > 0,
            ce.sum(dim=1) / n_pairs.clamp(min=1).to(ce.dtype),
            torch.zeros(bsz, dtype=ce.dtype, device=ce.device),
        )
        return l_shift, l_rr

    def doc_losses(self, batch: DocBatch) -> Tensor:
        lam = self.config.lambda_shift
        l_shift, l_rr = self.loss_components(batch)
        return lam * l_shift + (1 - lam) * l_rr

    def decode(self, batch: DocBatch) -> list[list[int]]:
        return self.crf.decode_batch(self.emissions(batch), batch.mask)

    def marginals(self, batch: DocBatch) -> list[np.ndarray]:
        em = self.emissions(batch)
        return [
            self.crf.marginals(em[b, : int(batch.lengths[b])]).detach().cpu().numpy()
            for b in range(len(batch))
        ]

    def predict_shifts(self, batch: DocBatch) -> list[list[int]]:
        """Binary transition predictions from the auxiliary head."""
        shift_out, _ = self._encode(batch)
        if shift_out.shape[1] < 2:
            return [[] for _ in range(len(batch))]
        logits = self.shift_head(shift_out[:, :-1])
        out: list[list[int]] = []
        for b in range(len(batch)):
            n = int(batch.lengths[b])
            out.append(_argmax_rows(logits[b, : max(n - 1, 0)]) if n > 1 else [])
        return out


_BUILDERS = {
    "crf": EmissionCRFTagger,
    "bilstm": BiLSTMTagger,
    "bilstm_crf": BiLSTMCRFTagger,
    "lsp_bilstm_crf": BiLSTMCRFTagger,
    "mtl": MultitaskTagger,
}


def build_tagger(config: SequenceModelConfig) -> SequenceTagger:
    """Instantiate the model for a config, seeding parameter init."""
    torch.manual_seed(config.seed)
    return _BUILDERS[config.variant](config)
