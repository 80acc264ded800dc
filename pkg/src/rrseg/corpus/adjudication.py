"""Gold label assembly: majority vote over annotators, then label-set reduction."""
from __future__ import annotations

from collections import Counter
from dataclasses import replace
from typing import Iterable, Mapping

from ..errors import AdjudicationError, DataError
from ..labels import RhetoricalRole, reduce_role
from .records import DocumentRecord


def majority_primary(doc_id: str, index: int, labels: list[RhetoricalRole]) -> RhetoricalRole | None:
    """Strict-majority winner of the primary votes, or None on a tie."""
    if not labels:
        raise AdjudicationError(f"doc {doc_id!r} sentence {index}: no annotations to adjudicate")
    counts = Counter(labels)
    top, votes = counts.most_common(1)[0]
    if votes * 2 > len(labels):
        return top
    return None


def adjudicate(
    doc: DocumentRecord,
    overrides: Mapping[int, RhetoricalRole] | None = None,
) -> tuple[DocumentRecord, list[int]]:
    """Assign gold labels by strict majority of primary annotations.

    ``overrides`` resolves ties only: supplying an override for a sentence
    that has a clear majority is an error, as is overriding a sentence index
    that does not exist. Returns the adjudicated document and the indices
    still unresolved (ties without an override). Sentences already carrying
    a gold label keep it.
    """
    overrides = dict(overrides or {})
    for idx in overrides:
        if not 0 <= idx < len(doc.sentences):
            raise AdjudicationError(
                f"doc {doc.doc_id!r}: override for sentence {idx} out of range"
            )
    unresolved: list[int] = []
    new_sentences = []
    for s in doc.sentences:
        if s.gold is not None:
            if s.index in overrides:
                raise AdjudicationError(
                    f"doc {doc.doc_id!r} sentence {s.index}: override given but gold already set"
                )
            new_sentences.append(s)
            continue
        winner = majority_primary(doc.doc_id, s.index, [c.primary for c in s.annotations])
        if winner is not None:
            if s.index in overrides:
                raise AdjudicationError(
                    f"doc {doc.doc_id!r} sentence {s.index}: override given but majority is clear "
                    f"({winner.value})"
                )
            new_sentences.append(replace(s, gold=winner))
        elif s.index in overrides:
            new_sentences.append(replace(s, gold=overrides[s.index]))
        else:
            unresolved.append(s.index)
            new_sentences.append(s)
    return doc.with_sentences(tuple(new_sentences)), unresolved


def reduce_labels(doc: DocumentRecord) -> DocumentRecord | None:
    """Map gold roles to the 7-label main set, dropping non-role sentences.

    Kept sentences are re-indexed to stay contiguous. Returns None when every
    sentence of the document is dropped. Requires gold on every sentence.
    """
    kept = []
    for s in doc.sentences:
        if s.gold is None:
            raise DataError(
                f"doc {doc.doc_id!r} sentence {s.index}: cannot reduce without a gold label"
            )
        main = reduce_role(s.gold)
        if main is None:
            continue
        kept.append(replace(s, index=len(kept), gold_main=main))
    if not kept:
        return None
    return doc.with_sentences(tuple(kept))


def reduce_corpus(
    docs: Iterable[DocumentRecord],
) -> tuple[list[DocumentRecord], list[str]]:
    """Reduce every document; returns (reduced docs, ids of fully dropped docs)."""
    reduced = []
    emptied = []
    for doc in docs:
        r = reduce_labels(doc)
        if r is None:
            emptied.append(doc.doc_id)
        else:
            reduced.append(r)
    return reduced, emptied
