"""Core data model: annotated sentences, documents, and corpus splits.

Records are frozen; pipeline stages that change labels (adjudication,
reduction) build new documents instead of mutating, so a loaded corpus can
be shared freely across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from ..errors import DataError
from ..labels import MainLabel, RhetoricalRole

#: Domains covered by the corpus and the transfer experiments.
KNOWN_DOMAINS: frozenset[str] = frozenset({"IT", "CL", "G"})


@dataclass(frozen=True)
class AnnotationCell:
    """One annotator's labels for one sentence.

    A primary role is always present; a tertiary role is only meaningful on
    top of a secondary one.
    """

    annotator_id: str
    primary: RhetoricalRole
    secondary: RhetoricalRole | None = None
    tertiary: RhetoricalRole | None = None

    def __post_init__(self) -> None:
        if not self.annotator_id:
            raise DataError("annotator_id must be nonempty")
        if self.tertiary is not None and self.secondary is None:
            raise DataError(
                f"annotator {self.annotator_id!r}: tertiary role without a secondary role"
            )


@dataclass(frozen=True)
class SentenceRecord:
    """One sentence with its annotations and (once adjudicated) gold labels."""

    index: int
    text: str
    annotations: tuple[AnnotationCell, ...] = ()
    gold: RhetoricalRole | None = None
    gold_main: MainLabel | None = None

    def __post_init__(self) -> None:
        if self.index < 0:
            raise DataError(f"sentence index must be >= 0, got {self.index}")
        if not self.text.strip():
            raise DataError(f"sentence {self.index}: text is empty after preprocessing")
        ids = [c.annotator_id for c in self.annotations]
        if len(ids) != len(set(ids)):
            dup = sorted({a for a in ids if ids.count(a) > 1})
            raise DataError(f"sentence {self.index}: duplicate annotator cell(s) {dup}")


@dataclass(frozen=True)
class DocumentRecord:
    """An ordered, contiguously indexed sequence of sentences from one judgment."""

    doc_id: str
    domain: str
    sentences: tuple[SentenceRecord, ...] = ()

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise DataError("doc_id must be nonempty")
        if self.domain not in KNOWN_DOMAINS:
            raise DataError(
                f"doc {self.doc_id!r}: unknown domain {self.domain!r}; expected one of "
                f"{sorted(KNOWN_DOMAINS)}"
            )
        for pos, sent in enumerate(self.sentences):
            if sent.index != pos:
                raise DataError(
                    f"doc {self.doc_id!r}: sentence index {sent.index} at position {pos}; "
                    "indices must be contiguous from 0"
                )

    def __len__(self) -> int:
        return len(self.sentences)

    @property
    def text(self) -> str:
        return " ".join(s.text for s in self.sentences)

    def gold_roles(self) -> list[RhetoricalRole]:
        """Gold fine labels, erroring on any unadjudicated sentence."""
        out = []
        for s in self.sentences:
            if s.gold is None:
                raise DataError(f"doc {self.doc_id!r}: sentence {s.index} has no gold label")
            out.append(s.gold)
        return out

    def gold_main_labels(self) -> list[MainLabel]:
        """Gold main labels, erroring on any sentence missing one."""
        out = []
        for s in self.sentences:
            if s.gold_main is None:
                raise DataError(
                    f"doc {self.doc_id!r}: sentence {s.index} has no gold main label"
                )
            out.append(s.gold_main)
        return out

    def with_sentences(self, sentences: tuple[SentenceRecord, ...]) -> "DocumentRecord":
        return replace(self, sentences=sentences)


@dataclass(frozen=True)
class CorpusSplit:
    """Document-level train/val/test partition of a corpus."""

    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]
    seed: int = 0
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)

    def __post_init__(self) -> None:
        groups = (set(self.train), set(self.val), set(self.test))
        names = ("train", "val", "test")
        for i in range(3):
            for j in range(i + 1, 3):
                overlap = groups[i] & groups[j]
                if overlap:
                    raise DataError(
                        f"split not disjoint: {sorted(overlap)} in both {names[i]} and {names[j]}"
                    )

    @property
    def all_doc_ids(self) -> frozenset[str]:
        return frozenset(self.train) | frozenset(self.val) | frozenset(self.test)

    def to_dict(self) -> dict:
        return {
            "train": list(self.train),
            "val": list(self.val),
            "test": list(self.test),
            "seed": self.seed,
            "ratios": list(self.ratios),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusSplit":
        return cls(
            train=tuple(d["train"]),
            val=tuple(d["val"]),
            test=tuple(d["test"]),
            seed=int(d.get("seed", 0)),
            ratios=tuple(d.get("ratios", (0.8, 0.1, 0.1))),
        )


def select_docs(docs: list[DocumentRecord], doc_ids) -> list[DocumentRecord]:
    """Pick documents by id, preserving the order of ``doc_ids``."""
    by_id = {d.doc_id: d for d in docs}
    missing = [i for i in doc_ids if i not in by_id]
    if missing:
        raise DataError(f"doc ids not in corpus: {missing[:5]}")
    return [by_id[i] for i in doc_ids]
