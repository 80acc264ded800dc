"""Self-training distillation over unlabeled documents.

Each iteration the current teacher hard-labels a fresh sample of unlabeled
documents (Viterbi), and a student trains on labeled plus pseudo-labeled data
with the objective

    L_ST = (1/|D_L|) * sum_{D_L} L(d) + (alpha_U/|D_U|) * sum_{D_U} L(d)

implemented as per-document loss weights, so the epoch total matches the
formula regardless of batching. The student then becomes the next teacher.
With alpha_U = 0 the pseudo-labeled documents are excluded from the batches
outright: the unlabeled term is identically zero, and keeping the documents in
would still reorder batch boundaries and perturb the optimizer trajectory, so
exclusion is what makes the degenerate run bit-identical to supervised
training.

Pseudo-labels never enter validation or test; students are validated on the
original labeled validation split.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import torch

from .corpus.records import CorpusSplit, DocumentRecord
from .errors import ConfigError, DataError, LeakageError
from .labelers.checkpoint import state_fingerprint
from .labelers.config import SequenceModelConfig
from .labelers.models import SequenceTagger, make_batch
from .labelers.training import (
    TrainResult,
    _doc_entries,
    as_feature_source,
    evaluate_labeler,
    predict_labels,
    train_sequence_labeler,
    write_predictions_jsonl,
)
from .utils import atomic_write_text

__all__ = [
    "DistillConfig",
    "DistillResult",
    "self_train",
    "self_training_loss",
    "supervised_loss",
    "verify_chain",
]

_LOG_FORMAT = "rrseg-distill-log-v1"


@dataclass(frozen=True)
class DistillConfig:
    """Self-training hyperparameters around a student model config."""

    student: SequenceModelConfig
    alpha_u: float = 0.3
    iterations: int = 2
    unlabeled_per_iteration: int = 48
    warm_start: bool = False
    early_stop_patience: int | None = None
    sample_seed: int = 0

    def __post_init__(self) -> None:
        if self.alpha_u < 0:
            raise ConfigError(f"alpha_u must be non-negative, got {self.alpha_u}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.unlabeled_per_iteration < 1:
            raise ConfigError(
                f"unlabeled_per_iteration must be >= 1, got {self.unlabeled_per_iteration}"
            )

    def to_dict(self) -> dict:
        return {
            "student": self.student.to_dict(),
            "alpha_u": self.alpha_u,
            "iterations": self.iterations,
            "unlabeled_per_iteration": self.unlabeled_per_iteration,
            "warm_start": self.warm_start,
            "early_stop_patience": self.early_stop_patience,
            "sample_seed": self.sample_seed,
        }


@dataclass
class DistillResult:
    student: TrainResult
    records: list[dict] = field(default_factory=list)
    teacher_val_f1: float | None = None
    log_path: Path | None = None

    @property
    def final_val_f1(self) -> float | None:
        return self.student.val_macro_f1


def _weighted_epoch_loss(
    model: SequenceTagger,
    entries: list[dict],
    weights: Sequence[float],
    batch_docs: int,
) -> float:
    total = 0.0
    model.eval()
    with torch.no_grad():
        for i in range(0, len(entries), batch_docs):
            part = entries[i : i + batch_docs]
            losses = model.doc_losses(make_batch(part))
            w = torch.tensor(list(weights[i : i + batch_docs]), dtype=losses.dtype)
            total += float((losses * w).sum())
    return total


def supervised_loss(
    model: SequenceTagger,
    feature_source,
    labeled_docs: Sequence[DocumentRecord],
    *,
    shift_source=None,
) -> float:
    """(1/|D_L|) * sum of per-document losses under the current weights."""
    if not labeled_docs:
        raise DataError("no labeled documents")
    cfg = model.config
    features = as_feature_source(feature_source)
    shifts = as_feature_source(shift_source) if shift_source is not None else None
    entries = _doc_entries(list(labeled_docs), cfg, features, shifts, with_labels=True)
    w = [1.0 / len(entries)] * len(entries)
    return _weighted_epoch_loss(model, entries, w, cfg.batch_docs)


def self_training_loss(
    model: SequenceTagger,
    feature_source,
    labeled_docs: Sequence[DocumentRecord],
    pseudo_docs: Sequence[DocumentRecord],
    pseudo_labels: Mapping[str, Sequence[str]],
    alpha_u: float,
    *,
    shift_source=None,
) -> float:
    """L_ST evaluated at the model's current weights (no gradient step)."""
    base = supervised_loss(model, feature_source, labeled_docs, shift_source=shift_source)
    if alpha_u == 0.0 or not pseudo_docs:
        return base
    cfg = model.config
    features = as_feature_source(feature_source)
    shifts = as_feature_source(shift_source) if shift_source is not None else None
    entries = _doc_entries(
        list(pseudo_docs), cfg, features, shifts,
        with_labels=True, label_overrides=pseudo_labels,
    )
    w = [alpha_u / len(entries)] * len(entries)
    return base + _weighted_epoch_loss(model, entries, w, cfg.batch_docs)


def _teacher_model(teacher) -> SequenceTagger:
    model = getattr(teacher, "model", None)
    if model is None or not isinstance(model, SequenceTagger):
        raise ConfigError(
            "teacher must be a trained checkpoint or TrainResult with a .model"
        )
    return model


def self_train(
    teacher,
    labeled_docs: Sequence[DocumentRecord],
    unlabeled_pool: Sequence[DocumentRecord],
    cfg: DistillConfig,
    feature_source,
    split: CorpusSplit,
    *,
    shift_source=None,
    out_dir: str | Path | None = None,
) -> DistillResult:
    """Run iterative self-training and return the final student.

    ``split`` partitions the labeled documents; the unlabeled pool must be
    disjoint from all of it. Each iteration samples
    ``cfg.unlabeled_per_iteration`` fresh pool documents without replacement
    (seeded by ``cfg.sample_seed``); if fewer remain, the remainder is used,
    and a pending iteration with an empty pool is an error.
    """
    teacher_net = _teacher_model(teacher)
    features = as_feature_source(feature_source)

    labeled_ids = {d.doc_id for d in labeled_docs}
    pool_ids = [d.doc_id for d in unlabeled_pool]
    if len(set(pool_ids)) != len(pool_ids):
        raise DataError("duplicate doc ids in the unlabeled pool")
    overlap = set(pool_ids) & (labeled_ids | set(split.all_doc_ids))
    if overlap:
        raise LeakageError(
            f"unlabeled pool overlaps labeled/eval documents: {sorted(overlap)[:5]}"
        )

    val_docs = [d for d in labeled_docs if d.doc_id in set(split.val)]
    teacher_val = None
    if val_docs:
        teacher_val = evaluate_labeler(
            teacher_net, features, val_docs, shift_source=shift_source
        ).macro_f1

    rng = random.Random(cfg.sample_seed)
    order = sorted(pool_ids)
    rng.shuffle(order)
    by_id = {d.doc_id: d for d in unlabeled_pool}

    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    records: list[dict] = []
    current_teacher = teacher_net
    student_result: TrainResult | None = None
    cursor = 0

    for it in range(1, cfg.iterations + 1):
        chunk_ids = order[cursor : cursor + cfg.unlabeled_per_iteration]
        cursor += len(chunk_ids)
        if not chunk_ids:
            raise DataError(
                f"iteration {it}: unlabeled pool exhausted "
                f"({len(order)} documents, {cfg.iterations} iterations requested)"
            )
        iter_docs = [by_id[i] for i in chunk_ids]

        teacher_fp = state_fingerprint(current_teacher.state_dict())
        pseudo = predict_labels(
            current_teacher, features, iter_docs, shift_source=shift_source
        )

        iter_dir = None
        pseudo_path = None
        if out_path is not None:
            iter_dir = out_path / f"iteration_{it:02d}"
            iter_dir.mkdir(parents=True, exist_ok=True)
            pseudo_path = iter_dir / "pseudo_labels.jsonl"
            write_predictions_jsonl(pseudo_path, pseudo)

        if cfg.alpha_u == 0.0:
            train_docs_all = list(labeled_docs)
            train_ids = tuple(split.train)
            weights = {i: 1.0 / len(split.train) for i in split.train}
            overrides: dict[str, Sequence[str]] = {}
        else:
            train_docs_all = list(labeled_docs) + iter_docs
            train_ids = tuple(split.train) + tuple(chunk_ids)
            weights = {i: 1.0 / len(split.train) for i in split.train}
            weights.update({i: cfg.alpha_u / len(chunk_ids) for i in chunk_ids})
            overrides = dict(pseudo)

        student_split = CorpusSplit(
            train=train_ids, val=split.val, test=split.test,
            seed=split.seed, ratios=split.ratios,
        )
        ckpt_dir = None if iter_dir is None else iter_dir / "checkpoint"
        student_result = train_sequence_labeler(
            cfg.student,
            features,
            train_docs_all,
            student_split,
            shift_source=shift_source,
            doc_weights=weights,
            label_overrides=overrides,
            out_dir=ckpt_dir,
            early_stop_patience=cfg.early_stop_patience,
            warm_start_state=current_teacher.state_dict() if cfg.warm_start else None,
        )
        student_fp = state_fingerprint(student_result.model.state_dict())
        records.append(
            {
                "iteration": it,
                "teacher_fingerprint": teacher_fp,
                "student_fingerprint": student_fp,
                "student_initial_fingerprint": student_result.initial_fingerprint,
                "pseudo_doc_ids": list(chunk_ids),
                "n_labeled": len(split.train),
                "n_pseudo": len(chunk_ids),
                "alpha_u": cfg.alpha_u,
                "val_macro_f1": student_result.val_macro_f1,
                "best_epoch": student_result.best_epoch,
                "pseudo_labels": None if pseudo_path is None else pseudo_path.name,
                "checkpoint": None if ckpt_dir is None else ckpt_dir.name,
            }
        )
        current_teacher = student_result.model

    assert student_result is not None
    result = DistillResult(
        student=student_result, records=records, teacher_val_f1=teacher_val
    )
    if out_path is not None:
        log = {
            "format": _LOG_FORMAT,
            "config": cfg.to_dict(),
            "initial_teacher_fingerprint": records[0]["teacher_fingerprint"],
            "teacher_val_macro_f1": teacher_val,
            "records": records,
        }
        result.log_path = out_path / "distill_log.json"
        atomic_write_text(result.log_path, json.dumps(log, indent=2) + "\n")
    return result


def verify_chain(log: str | Path | Mapping) -> list[str]:
    """Check the teacher-student fingerprint chain; returns the fingerprints.

    Accepts the ``distill_log.json`` path or its parsed dict. Raises DataError
    on a broken chain. When the log sits in a run directory with per-iteration
    checkpoints, each stored student checkpoint is re-fingerprinted and
    compared to the logged value.
    """
    run_dir: Path | None = None
    if isinstance(log, (str, Path)):
        run_dir = Path(log).parent
        log = json.loads(Path(log).read_text())
    if log.get("format") != _LOG_FORMAT:
        raise DataError(f"unsupported distillation log format: {log.get('format')!r}")
    records = log["records"]
    if not records:
        raise DataError("distillation log has no iterations")
    chain = [log["initial_teacher_fingerprint"]]
    prev_student = log["initial_teacher_fingerprint"]
    for rec in records:
        if rec["teacher_fingerprint"] != prev_student:
            raise DataError(
                f"iteration {rec['iteration']}: teacher fingerprint "
                f"{rec['teacher_fingerprint']} does not match previous student "
                f"{prev_student}"
            )
        prev_student = rec["student_fingerprint"]
        chain.append(prev_student)
        if run_dir is not None and rec.get("checkpoint"):
            ckpt = run_dir / f"iteration_{rec['iteration']:02d}" / rec["checkpoint"]
            if ckpt.exists():
                state = torch.load(
                    ckpt / "weights.pt", map_location="cpu", weights_only=True
                )
                got = state_fingerprint(state)
                if got != rec["student_fingerprint"]:
                    raise DataError(
                        f"iteration {rec['iteration']}: checkpoint weights "
                        f"fingerprint {got} does not match log "
                        f"{rec['student_fingerprint']}"
                    )
    return chain
