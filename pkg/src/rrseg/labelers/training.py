"""Document-level training loop shared by every sequence-labeler variant.

A batch is a set of whole documents padded to the batch maximum, and the batch
objective is a weighted sum of per-document losses: sum_d w_d * L_d. By
default w_d = 1/|train| so one epoch totals the mean document loss; callers
may pass per-document weights instead (the self-training pipeline weighs
pseudo-labeled documents separately). Keeping the weights attached to
documents rather than batches makes the epoch total independent of batching.
"""
from __future__ import annotations

import copy
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence, runtime_checkable

import numpy as np
import torch

from ..corpus.records import CorpusSplit, DocumentRecord, select_docs
from ..encoders.archive import EmbeddingArchive
from ..errors import ConfigError, DataError, LabelError
from ..metrics import MetricsReport, macro_f1
from .checkpoint import LoadedCheckpoint, save_checkpoint, state_fingerprint
from .config import SequenceModelConfig
from .models import DocBatch, SequenceTagger, build_tagger, make_batch

__all__ = [
    "FeatureSource",
    "ArchiveSource",
    "FeaturizerSource",
    "MappingSource",
    "as_feature_source",
    "TrainResult",
    "train_sequence_labeler",
    "train_lsp_bilstm_crf",
    "train_mtl",
    "sweep_lambda",
    "LambdaSweep",
    "predict_labels",
    "predict_from_checkpoint",
    "evaluate_labeler",
    "write_predictions_jsonl",
    "read_predictions_jsonl",
]


@runtime_checkable
class FeatureSource(Protocol):
    """Per-document feature rows plus identity for checkpoint metadata."""

    dim: int
    source_id: str

    def rows_for(self, doc: DocumentRecord) -> np.ndarray: ...


class ArchiveSource:
    """Feature rows read from a precomputed embedding archive."""

    def __init__(self, archive: EmbeddingArchive):
        self.archive = archive
        self.dim = archive.dim
        self.source_id = archive.encoder_id

    def rows_for(self, doc: DocumentRecord) -> np.ndarray:
        rows = self.archive.read_doc(doc.doc_id)
        if rows.shape[0] != len(doc.sentences):
            raise DataError(
                f"{doc.doc_id}: archive has {rows.shape[0]} rows for "
                f"{len(doc.sentences)} sentences"
            )
        return rows


class FeaturizerSource:
    """Feature rows computed on the fly by a document encoder."""

    def __init__(self, featurizer):
        self.featurizer = featurizer
        self.dim = featurizer.dim
        self.source_id = featurizer.encoder_id

    def rows_for(self, doc: DocumentRecord) -> np.ndarray:
        rows = np.asarray(self.featurizer.encode_doc(doc), dtype=np.float32)
        if rows.shape != (len(doc.sentences), self.dim):
            raise DataError(
                f"{doc.doc_id}: featurizer returned shape {rows.shape}, "
                f"expected ({len(doc.sentences)}, {self.dim})"
            )
        return rows


class MappingSource:
    """Feature rows held in memory, keyed by doc_id."""

    def __init__(self, rows_by_doc: Mapping[str, np.ndarray], *, source_id: str):
        if not rows_by_doc:
            raise ConfigError("MappingSource needs at least one document")
        self.rows_by_doc = {k: np.asarray(v, dtype=np.float32) for k, v in rows_by_doc.items()}
        first = next(iter(self.rows_by_doc.values()))
        self.dim = int(first.shape[1])
        self.source_id = source_id

    def rows_for(self, doc: DocumentRecord) -> np.ndarray:
        if doc.doc_id not in self.rows_by_doc:
            raise DataError(f"no feature rows for document {doc.doc_id!r}")
        rows = self.rows_by_doc[doc.doc_id]
        if rows.shape[0] != len(doc.sentences):
            raise DataError(
                f"{doc.doc_id}: source has {rows.shape[0]} rows for "
                f"{len(doc.sentences)} sentences"
            )
        return rows


class _ByIdSource:
    """Adapter for sources keyed by doc_id (composed shift rows)."""

    def __init__(self, inner):
        self.inner = inner
        self.dim = inner.dim
        self.source_id = getattr(inner, "source_id", type(inner).__name__)

    def rows_for(self, doc: DocumentRecord) -> np.ndarray:
        rows = self.inner.rows(doc.doc_id)
        if rows.shape[0] != len(doc.sentences):
            raise DataError(
                f"{doc.doc_id}: source has {rows.shape[0]} rows for "
                f"{len(doc.sentences)} sentences"
            )
        return rows


def as_feature_source(obj) -> FeatureSource:
    """Coerce archives, featurizers, and row providers to one interface."""
    if hasattr(obj, "rows_for"):
        return obj
    if isinstance(obj, EmbeddingArchive):
        return ArchiveSource(obj)
    if hasattr(obj, "rows"):
        return _ByIdSource(obj)
    if hasattr(obj, "encode_doc"):
        return FeaturizerSource(obj)
    raise ConfigError(
        f"cannot use {type(obj).__name__} as a feature source; need rows_for/rows/"
        "encode_doc or an embedding archive"
    )


def _label_index(config: SequenceModelConfig) -> dict[str, int]:
    return {code: i for i, code in enumerate(config.label_set)}


def _doc_entries(
    docs: Sequence[DocumentRecord],
    config: SequenceModelConfig,
    features: FeatureSource,
    shifts: FeatureSource | None,
    *,
    with_labels: bool,
    label_overrides: Mapping[str, Sequence[str]] | None = None,
) -> list[dict]:
    """Materialize feature rows and label indices for a list of documents."""
    index = _label_index(config)
    entries = []
    for doc in docs:
        rows = features.rows_for(doc)
        if rows.shape[1] != config.input_dim:
            raise ConfigError(
                f"{doc.doc_id}: feature width {rows.shape[1]} != config input_dim "
                f"{config.input_dim}"
            )
        entry: dict = {"doc_id": doc.doc_id, "features": rows}
        if with_labels:
            if label_overrides is not None and doc.doc_id in label_overrides:
                codes = list(label_overrides[doc.doc_id])
                if len(codes) != len(doc.sentences):
                    raise DataError(
                        f"{doc.doc_id}: {len(codes)} override labels for "
                        f"{len(doc.sentences)} sentences"
                    )
            else:
                codes = [m.value for m in doc.gold_main_labels()]
            bad = sorted({c for c in codes if c not in index})
            if bad:
                raise LabelError(f"{doc.doc_id}: labels {bad} not in configured label set")
            entry["labels"] = [index[c] for c in codes]
        if shifts is not None:
            srows = shifts.rows_for(doc)
            if srows.shape[1] != config.shift_input_dim:
                raise ConfigError(
                    f"{doc.doc_id}: shift width {srows.shape[1]} != config "
                    f"shift_input_dim {config.shift_input_dim}"
                )
            entry["shift_features"] = srows
        entries.append(entry)
    return entries


def _chunks(seq: Sequence[int], size: int) -> Iterable[Sequence[int]]:
    for i in range(0, len(seq), size):
        yield seq[i : i + size]


@dataclass
class TrainResult:
    model: SequenceTagger
    config: SequenceModelConfig
    log: list[dict]
    best_epoch: int
    val_macro_f1: float | None
    feature_source_id: str
    shift_source_id: str | None = None
    checkpoint_dir: Path | None = None
    initial_fingerprint: str | None = None


def _decode_codes(
    model: SequenceTagger, entries: list[dict], config: SequenceModelConfig, batch_docs: int
) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    model.eval()
    with torch.no_grad():
        for chunk in _chunks(list(range(len(entries))), batch_docs):
            part = [entries[i] for i in chunk]
            labeled = all("labels" in e for e in part)
            batch = make_batch(part, with_labels=labeled)
            for doc_id, seq in zip(batch.doc_ids, model.decode(batch)):
                out[doc_id] = [config.label_set[i] for i in seq]
    model.train()
    return out


def _val_macro_f1(
    model: SequenceTagger, entries: list[dict], config: SequenceModelConfig, batch_docs: int
) -> float:
    preds = _decode_codes(model, entries, config, batch_docs)
    hyp: list[str] = []
    ref: list[str] = []
    for e in entries:
        hyp.extend(preds[e["doc_id"]])
        ref.extend(config.label_set[i] for i in e["labels"])
    return macro_f1(hyp, ref, config.label_set).macro_f1


def train_sequence_labeler(
    config: SequenceModelConfig,
    feature_source,
    docs: Sequence[DocumentRecord],
    split: CorpusSplit,
    *,
    shift_source=None,
    doc_weights: Mapping[str, float] | None = None,
    label_overrides: Mapping[str, Sequence[str]] | None = None,
    out_dir: str | Path | None = None,
    epochs: int | None = None,
    early_stop_patience: int | None = None,
    warm_start_state: Mapping[str, torch.Tensor] | None = None,
    on_epoch: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Train one labeler with best-validation-F1 checkpointing.

    ``doc_weights`` maps doc_id to its loss weight (default 1/|train|).
    ``label_overrides`` substitutes training labels for specific documents
    (used for pseudo-labeled data); validation always scores against gold.
    ``epochs`` overrides config.epochs; ``early_stop_patience`` stops after
    that many epochs without validation improvement. ``warm_start_state``
    replaces the seeded initialization with an existing state dict.
    """
    features = as_feature_source(feature_source)
    shifts = as_feature_source(shift_source) if shift_source is not None else None
    if config.variant == "mtl" and shifts is None:
        raise ConfigError("mtl training requires a shift feature source")
    if config.variant != "mtl" and shifts is not None:
        raise ConfigError(f"variant {config.variant!r} takes no shift feature source")

    train_docs = select_docs(list(docs), split.train)
    if not train_docs:
        raise DataError("empty training split")
    val_docs = select_docs(list(docs), split.val)

    train_entries = _doc_entries(
        train_docs, config, features, shifts, with_labels=True, label_overrides=label_overrides
    )
    val_entries = _doc_entries(val_docs, config, features, shifts, with_labels=True)

    if doc_weights is None:
        weights = [1.0 / len(train_entries)] * len(train_entries)
    else:
        missing = [e["doc_id"] for e in train_entries if e["doc_id"] not in doc_weights]
        if missing:
            raise ConfigError(f"doc_weights missing training documents: {missing[:5]}")
        weights = [float(doc_weights[e["doc_id"]]) for e in train_entries]

    model = build_tagger(config)
    if warm_start_state is not None:
        model.load_state_dict(warm_start_state)
    initial_fp = state_fingerprint(model.state_dict())
    opt = torch.optim.Adam(model.parameters(), lr=config.resolved_lr)
    rng = random.Random(config.seed)
    n_epochs = config.epochs if epochs is None else epochs

    log: list[dict] = []
    best_state = copy.deepcopy(model.state_dict())
    best_f1 = -1.0
    best_epoch = -1
    stale = 0

    def evaluate() -> float | None:
        if not val_entries:
            return None
        return _val_macro_f1(model, val_entries, config, config.batch_docs)

    if n_epochs == 0 and val_entries:
        best_f1 = evaluate() or 0.0
        best_epoch = -1

    order = list(range(len(train_entries)))
    for epoch in range(n_epochs):
        rng.shuffle(order)
        model.train()
        epoch_loss = 0.0
        for chunk in _chunks(order, config.batch_docs):
            entries = [train_entries[i] for i in chunk]
            batch = make_batch(entries)
            losses = model.doc_losses(batch)
            w = torch.tensor([weights[i] for i in chunk], dtype=losses.dtype)
            loss = (losses * w).sum()
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_loss += float(loss.detach())
        val_f1 = evaluate()
        rec = {"epoch": epoch, "train_loss": epoch_loss, "val_macro_f1": val_f1}
        log.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
        if val_f1 is None:
            best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())
        elif val_f1 > best_f1:
            best_f1 = val_f1
            best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())
            stale = 0
        else:
            stale += 1
            if early_stop_patience is not None and stale >= early_stop_patience:
                break

    model.load_state_dict(best_state)
    model.eval()
    result = TrainResult(
        model=model,
        config=config,
        log=log,
        best_epoch=best_epoch,
        val_macro_f1=None if best_f1 < 0 else best_f1,
        feature_source_id=features.source_id,
        shift_source_id=None if shifts is None else shifts.source_id,
        initial_fingerprint=initial_fp,
    )
    if out_dir is not None:
        result.checkpoint_dir = save_checkpoint(
            out_dir,
            model,
            feature_source_id=result.feature_source_id,
            shift_source_id=result.shift_source_id,
            best_epoch=best_epoch,
            val_macro_f1=result.val_macro_f1,
            log=log,
        )
    return result


def train_lsp_bilstm_crf(
    config: SequenceModelConfig,
    composed_source,
    docs: Sequence[DocumentRecord],
    split: CorpusSplit,
    **kwargs,
) -> TrainResult:
    """Shift-composed BiLSTM-CRF; the composed rows are the only input."""
    if config.variant != "lsp_bilstm_crf":
        raise ConfigError(f"expected variant 'lsp_bilstm_crf', got {config.variant!r}")
    return train_sequence_labeler(config, composed_source, docs, split, **kwargs)


def train_mtl(
    config: SequenceModelConfig,
    sentence_source,
    shift_aware_source,
    docs: Sequence[DocumentRecord],
    split: CorpusSplit,
    **kwargs,
) -> TrainResult:
    """Joint shift + role model over (plain, composed) feature streams."""
    if config.variant != "mtl":
        raise ConfigError(f"expected variant 'mtl', got {config.variant!r}")
    return train_sequence_labeler(
        config, sentence_source, docs, split, shift_source=shift_aware_source, **kwargs
    )


_DEFAULT_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))


@dataclass
class LambdaSweep:
    rows: list[dict] = field(default_factory=list)
    best_lambda: float | None = None

    def to_dict(self) -> dict:
        return {"rows": self.rows, "best_lambda": self.best_lambda}


def sweep_lambda(
    base_config: SequenceModelConfig,
    sentence_source,
    shift_aware_source,
    docs: Sequence[DocumentRecord],
    split: CorpusSplit,
    *,
    grid: Sequence[float] = _DEFAULT_GRID,
    **kwargs,
) -> LambdaSweep:
    """One mtl training per grid point; best row by validation macro F1.

    Ties go to the smaller λ. The default grid is 0.1..0.9 in steps of 0.1.
    """
    if base_config.variant != "mtl":
        raise ConfigError("lambda sweep applies to the mtl variant")
    if not grid:
        raise ConfigError("empty lambda grid")
    sweep = LambdaSweep()
    best = (-1.0, None)
    for lam in grid:
        result = train_mtl(
            base_config.with_lambda(float(lam)),
            sentence_source,
            shift_aware_source,
            docs,
            split,
            **kwargs,
        )
        row = {
            "lambda": float(lam),
            "val_macro_f1": result.val_macro_f1,
            "best_epoch": result.best_epoch,
        }
        sweep.rows.append(row)
        score = -1.0 if result.val_macro_f1 is None else result.val_macro_f1
        if score > best[0]:
            best = (score, float(lam))
    sweep.best_lambda = best[1]
    return sweep


def predict_labels(
    model: SequenceTagger,
    feature_source,
    docs: Sequence[DocumentRecord],
    *,
    shift_source=None,
    with_marginals: bool = False,
):
    """Viterbi labels (and optional per-position marginals) per document."""
    config = model.config
    features = as_feature_source(feature_source)
    shifts = as_feature_source(shift_source) if shift_source is not None else None
    if config.variant == "mtl" and shifts is None:
        raise ConfigError("mtl prediction requires a shift feature source")
    entries = _doc_entries(list(docs), config, features, shifts, with_labels=False)
    labels = _decode_codes(model, entries, config, config.batch_docs)
    if not with_marginals:
        return labels
    margs: dict[str, np.ndarray] = {}
    model.eval()
    with torch.no_grad():
        for chunk in _chunks(list(range(len(entries))), config.batch_docs):
            part = [entries[i] for i in chunk]
            batch = make_batch(part, with_labels=False)
            for doc_id, m in zip(batch.doc_ids, model.marginals(batch)):
                margs[doc_id] = m
    return labels, margs


def predict_from_checkpoint(
    ckpt: LoadedCheckpoint,
    feature_source,
    docs: Sequence[DocumentRecord],
    *,
    shift_source=None,
    with_marginals: bool = False,
):
    """Predict with a loaded checkpoint, enforcing feature-source identity."""
    features = as_feature_source(feature_source)
    if features.source_id != ckpt.feature_source_id:
        raise ConfigError(
            f"feature source {features.source_id!r} does not match checkpoint's "
            f"{ckpt.feature_source_id!r}"
        )
    if shift_source is not None:
        shifts = as_feature_source(shift_source)
        if ckpt.shift_source_id is not None and shifts.source_id != ckpt.shift_source_id:
            raise ConfigError(
                f"shift source {shifts.source_id!r} does not match checkpoint's "
                f"{ckpt.shift_source_id!r}"
            )
    return predict_labels(
        ckpt.model, feature_source, docs, shift_source=shift_source,
        with_marginals=with_marginals,
    )


def evaluate_labeler(
    model: SequenceTagger,
    feature_source,
    docs: Sequence[DocumentRecord],
    *,
    shift_source=None,
    zero_support: str = "exclude",
) -> MetricsReport:
    """Macro F1 of Viterbi predictions against gold main labels."""
    preds = predict_labels(model, feature_source, docs, shift_source=shift_source)
    hyp: list[str] = []
    ref: list[str] = []
    for doc in docs:
        hyp.extend(preds[doc.doc_id])
        ref.extend(m.value for m in doc.gold_main_labels())
    return macro_f1(
        hyp,
        ref,
        model.config.label_set,
        zero_support=zero_support,
        metadata={
            "n_docs": len(docs),
            "n_sentences": len(ref),
            "variant": model.config.variant,
        },
    )


def write_predictions_jsonl(path: str | Path, labels_by_doc: Mapping[str, Sequence[str]]) -> None:
    lines = [
        json.dumps({"doc_id": doc_id, "labels": list(labels)}, ensure_ascii=False)
        for doc_id, labels in labels_by_doc.items()
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_predictions_jsonl(path: str | Path) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        rec = json.loads(line)
        if "doc_id" not in rec or "labels" not in rec:
            raise DataError(f"{path}:{ln}: prediction rows need doc_id and labels")
        if rec["doc_id"] in out:
            raise DataError(f"{path}:{ln}: duplicate doc_id {rec['doc_id']!r}")
        out[rec["doc_id"]] = [str(c) for c in rec["labels"]]
    return out
