"""Domain-transfer experiment harness.

Trains one model per training domain and evaluates it on the test slice of
every requested test domain. The relative F1 drop against the test domain's
own in-domain model is reported whenever that in-domain model is part of the
run matrix.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from ..corpus.records import CorpusSplit, DocumentRecord, select_docs
from ..corpus.splitting import split_corpus
from ..errors import ConfigError, DataError
from ..labelers.config import SequenceModelConfig
from ..labelers.training import TrainResult, evaluate_labeler, train_sequence_labeler
from ..metrics import domain_transfer_delta

__all__ = ["TransferRun", "run_transfer"]


@dataclass(frozen=True)
class TransferRun:
    """One (train domain, test domain) cell of the transfer matrix."""

    train_domain: str
    test_domain: str
    variant: str
    macro_f1: float
    delta_g: float | None
    n_train_docs: int
    n_test_docs: int

    def to_dict(self) -> dict:
        return {
            "train_domain": self.train_domain,
            "test_domain": self.test_domain,
            "variant": self.variant,
            "macro_f1": self.macro_f1,
            "delta_g": self.delta_g,
            "n_train_docs": self.n_train_docs,
            "n_test_docs": self.n_test_docs,
        }


def _require_gold(domain: str, docs: Sequence[DocumentRecord]) -> None:
    if not docs:
        raise DataError(f"domain {domain!r} has no documents")
    for doc in docs:
        for s in doc.sentences:
            if s.gold_main is None:
                raise DataError(
                    f"domain {domain!r}, doc {doc.doc_id!r}: sentence {s.index} has no "
                    "main label; map the corpus to main labels first (the G corpus "
                    "needs its label mapping file)"
                )


def run_transfer(
    config: SequenceModelConfig,
    feature_source,
    corpora: Mapping[str, Sequence[DocumentRecord]],
    pairs: Sequence[tuple[str, str]],
    *,
    split_seed: int = 0,
    splits: Mapping[str, CorpusSplit] | None = None,
    shift_source=None,
    out_dir: str | Path | None = None,
    train_kwargs: Mapping | None = None,
) -> list[TransferRun]:
    """Train per train-domain, evaluate per (train, test) pair.

    ``corpora`` maps a domain key (a composite like "IT+CL" is just another
    key) to its documents; each domain gets its own train/val/test split,
    either supplied via ``splits`` or derived with ``split_seed``. The drop
    percentage for a pair is computed against the same-variant model trained
    on the test domain, so it is only emitted when that domain also appears
    as a training domain; the in-domain cell itself reports 0.0.
    """
    if not pairs:
        raise ConfigError("no (train, test) pairs requested")
    for a, b in pairs:
        if a not in corpora:
            raise ConfigError(f"train domain {a!r} not in supplied corpora")
        if b not in corpora:
            raise ConfigError(f"test domain {b!r} not in supplied corpora")

    used = {d for pair in pairs for d in pair}
    domain_splits: dict[str, CorpusSplit] = {}
    for domain in sorted(used):
        docs = list(corpora[domain])
        _require_gold(domain, docs)
        if splits is not None and domain in splits:
            domain_splits[domain] = splits[domain]
        else:
            domain_splits[domain] = split_corpus(docs, seed=split_seed)

    train_domains = sorted({a for a, _ in pairs})
    models: dict[str, TrainResult] = {}
    kwargs = dict(train_kwargs or {})
    for domain in train_domains:
        models[domain] = train_sequence_labeler(
            config,
            feature_source,
            list(corpora[domain]),
            domain_splits[domain],
            shift_source=shift_source,
            **kwargs,
        )

    def test_f1(model: TrainResult, domain: str) -> tuple[float, int]:
        test_docs = select_docs(list(corpora[domain]), domain_splits[domain].test)
        if not test_docs:
            raise DataError(f"domain {domain!r} has an empty test slice")
        report = evaluate_labeler(
            model.model, feature_source, test_docs, shift_source=shift_source
        )
        return report.macro_f1, len(test_docs)

    in_domain: dict[str, float] = {}
    for domain in train_domains:
        if any(b == domain for _, b in pairs) or (domain, domain) in pairs:
            in_domain[domain], _ = test_f1(models[domain], domain)

    runs: list[TransferRun] = []
    for a, b in pairs:
        if a == b:
            f1, n_test = in_domain[b], len(domain_splits[b].test)
            delta = 0.0
        else:
            f1, n_test = test_f1(models[a], b)
            delta = None
            if b in in_domain:
                delta = domain_transfer_delta(in_domain[b], f1)
        runs.append(
            TransferRun(
                train_domain=a,
                test_domain=b,
                variant=config.variant,
                macro_f1=f1,
                delta_g=delta,
                n_train_docs=len(domain_splits[a].train),
                n_test_docs=n_test,
            )
        )

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rows = [r.to_dict() for r in runs]
        (out / "transfer_runs.json").write_text(json.dumps(rows, indent=2) + "\n")
        with open(out / "transfer_runs.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    return runs
