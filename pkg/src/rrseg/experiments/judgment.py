"""Judgment-prediction inputs and the external classifier bridge.

The outcome classifier is not trained here: it is consumed as a separate
process speaking newline-delimited JSON on its standard streams, one
``{"text": ...}`` request per line answered by ``{"label": 0|1, "score": f}``.
Inputs are built either from the final tokens of the judgment or from the
sentences carrying selected rhetorical roles (ratio and ruling by default).
Callers supply documents with explicit final-decision text already removed.
"""
from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..corpus.records import DocumentRecord
from ..errors import ClassifierUnavailable, ConfigError, DataError
from ..metrics import MetricsReport, macro_f1

__all__ = [
    "JudgmentInput",
    "RRExtraction",
    "extract_rr_for_judgment",
    "last_k_tokens",
    "ExternalProcessClassifier",
    "JudgmentEvalResult",
    "judgment_eval",
]

_MODES = ("last_k_tokens", "gold_rr", "predicted_rr")
DEFAULT_RR_LABELS = frozenset({"ROD", "RPC"})


@dataclass(frozen=True)
class JudgmentInput:
    """One document's classifier payload with its gold outcome."""

    doc_id: str
    mode: str
    text: str
    gold_outcome: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in _MODES:
            raise ConfigError(f"unknown judgment input mode {self.mode!r}")
        if self.gold_outcome not in (None, 0, 1):
            raise DataError(
                f"{self.doc_id}: gold outcome must be 0 or 1, got {self.gold_outcome!r}"
            )
        if not self.text.strip():
            raise DataError(f"{self.doc_id}: empty payload")


@dataclass(frozen=True)
class RRExtraction:
    inputs: tuple[JudgmentInput, ...]
    excluded_doc_ids: tuple[str, ...]

    @property
    def excluded_count(self) -> int:
        return len(self.excluded_doc_ids)


def extract_rr_for_judgment(
    docs: Sequence[DocumentRecord],
    *,
    source: str | Mapping[str, Sequence[str]] = "gold",
    labels: frozenset[str] = DEFAULT_RR_LABELS,
    outcomes: Mapping[str, int] | None = None,
) -> RRExtraction:
    """Per-document ordered concatenation of sentences with selected roles.

    ``source`` is "gold" for adjudicated labels or a mapping doc_id -> label
    codes (one per sentence) for model predictions. Documents with no
    matching sentence are excluded and reported, not errored.
    """
    if isinstance(source, str) and source != "gold":
        raise ConfigError(f"source must be 'gold' or a predictions mapping, got {source!r}")
    mode = "gold_rr" if isinstance(source, str) else "predicted_rr"
    inputs: list[JudgmentInput] = []
    excluded: list[str] = []
    for doc in docs:
        if isinstance(source, str):
            codes = [m.value for m in doc.gold_main_labels()]
        else:
            if doc.doc_id not in source:
                raise DataError(f"no predictions for document {doc.doc_id!r}")
            codes = list(source[doc.doc_id])
            if len(codes) != len(doc.sentences):
                raise DataError(
                    f"{doc.doc_id}: {len(codes)} predicted labels for "
                    f"{len(doc.sentences)} sentences"
                )
        picked = [s.text for s, c in zip(doc.sentences, codes) if c in labels]
        if not picked:
            excluded.append(doc.doc_id)
            continue
        inputs.append(
            JudgmentInput(
                doc_id=doc.doc_id,
                mode=mode,
                text=" ".join(picked),
                gold_outcome=None if outcomes is None else outcomes.get(doc.doc_id),
            )
        )
    return RRExtraction(inputs=tuple(inputs), excluded_doc_ids=tuple(excluded))


def last_k_tokens(
    doc: DocumentRecord,
    k: int = 512,
    *,
    tokenizer=None,
    outcome: int | None = None,
) -> JudgmentInput:
    """Payload = the final k tokens of the document text.

    ``tokenizer`` should be the downstream classifier's tokenizer (anything
    with ``tokenize`` and ``convert_tokens_to_string``); without one the
    fallback is whitespace tokens.
    """
    if k < 1:
        raise ConfigError(f"k must be positive, got {k}")
    text = doc.text
    if tokenizer is None:
        tokens = text.split()
        tail = tokens[-k:]
        payload = " ".join(tail)
    else:
        tokens = tokenizer.tokenize(text)
        tail = tokens[-k:]
        payload = tokenizer.convert_tokens_to_string(tail)
    return JudgmentInput(
        doc_id=doc.doc_id, mode="last_k_tokens", text=payload, gold_outcome=outcome
    )


class ExternalProcessClassifier:
    """Binary outcome classifier spoken to over a child process's stdio.

    Protocol: one JSON object per line. Request {"text": str}; response
    {"label": 0 or 1, "score": float}. Any startup or protocol failure is a
    ClassifierUnavailable error so harnesses can mark runs skipped.
    """

    def __init__(self, command: Sequence[str]):
        if not command:
            raise ConfigError("classifier command is empty")
        self.command = list(command)
        self._proc: subprocess.Popen | None = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    bufsize=1,
                )
            except OSError as exc:
                raise ClassifierUnavailable(
                    f"cannot start classifier {self.command!r}: {exc}"
                ) from exc
        return self._proc

    def classify(self, text: str) -> tuple[int, float]:
        proc = self._ensure()
        try:
            assert proc.stdin is not None and proc.stdout is not None
            proc.stdin.write(json.dumps({"text": text}, ensure_ascii=False) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise ClassifierUnavailable(f"classifier process died: {exc}") from exc
        if not line:
            raise ClassifierUnavailable("classifier closed its output stream")
        try:
            resp = json.loads(line)
            label = int(resp["label"])
            score = float(resp.get("score", 0.0))
        except (ValueError, KeyError, TypeError) as exc:
            raise ClassifierUnavailable(f"bad classifier response {line!r}") from exc
        if label not in (0, 1):
            raise ClassifierUnavailable(f"classifier label must be 0 or 1, got {label}")
        return label, score

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.close()
            except OSError:
                pass
            self._proc.wait(timeout=10)
        self._proc = None

    def __enter__(self) -> "ExternalProcessClassifier":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


@dataclass
class JudgmentEvalResult:
    """Outcome of an evaluation attempt; unavailable classifiers skip."""

    status: str  # "ok" or "skipped"
    report: MetricsReport | None = None
    reason: str | None = None
    predictions: dict[str, int] = field(default_factory=dict)


def judgment_eval(classifier, inputs: Sequence[JudgmentInput]) -> JudgmentEvalResult:
    """Macro F1 over the two outcomes; a missing classifier marks a skip.

    ``classifier`` needs ``classify(text) -> (label, score)``.
    """
    if not inputs:
        raise DataError("no judgment inputs")
    missing = [i.doc_id for i in inputs if i.gold_outcome is None]
    if missing:
        raise DataError(f"inputs without gold outcomes: {missing[:5]}")
    preds: dict[str, int] = {}
    try:
        for item in inputs:
            label, _score = classifier.classify(item.text)
            preds[item.doc_id] = label
    except ClassifierUnavailable as exc:
        return JudgmentEvalResult(status="skipped", reason=str(exc))
    hyp = [str(preds[i.doc_id]) for i in inputs]
    ref = [str(i.gold_outcome) for i in inputs]
    report = macro_f1(
        hyp,
        ref,
        ("0", "1"),
        metadata={
            "n_docs": len(inputs),
            "modes": sorted({i.mode for i in inputs}),
        },
    )
    return JudgmentEvalResult(status="ok", report=report, predictions=preds)
