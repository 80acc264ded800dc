"""Descriptive corpus statistics: label distributions and shift rates."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Literal, Sequence

from ..errors import DataError
from ..labels import FINE_LABELS, MAIN_LABELS
from .records import DocumentRecord


def label_distribution(
    docs: Iterable[DocumentRecord],
    *,
    level: Literal["fine", "main"] = "fine",
    by_domain: bool = True,
) -> dict[str, dict[str, int]]:
    """Count gold labels, keyed by domain (plus an "ALL" row) then label code.

    Every label of the chosen level appears in each row, zero-filled, so the
    result is table-shaped.
    """
    codes = FINE_LABELS if level == "fine" else MAIN_LABELS
    counts: dict[str, Counter] = {"ALL": Counter()}
    for doc in docs:
        seq = doc.gold_roles() if level == "fine" else doc.gold_main_labels()
        row = counts.setdefault(doc.domain, Counter()) if by_domain else counts["ALL"]
        for lab in seq:
            row[lab.value] += 1
            if by_domain:
                counts["ALL"][lab.value] += 1
    return {
        dom: {c: ctr.get(c, 0) for c in codes}
        for dom, ctr in sorted(counts.items())
    }


@dataclass(frozen=True)
class ShiftStatistic:
    """Label-change rates over adjacent sentence pairs.

    ``micro`` pools every pair in the corpus; ``macro`` averages the per-document
    rates. ``per_doc`` maps doc_id to (shift_pairs, total_pairs).
    """

    shift_pairs: int
    total_pairs: int
    macro_shift_rate: float
    per_doc: dict[str, tuple[int, int]]

    @property
    def micro_shift_rate(self) -> float:
        return self.shift_pairs / self.total_pairs

    @property
    def micro_same_rate(self) -> float:
        # Complement computed from the same counts, so the two rates sum to 1.0
        # exactly in floating point.
        return (self.total_pairs - self.shift_pairs) / self.total_pairs

    def as_fraction(self) -> Fraction:
        return Fraction(self.shift_pairs, self.total_pairs)


def _doc_shift_counts(doc: DocumentRecord, level: str) -> tuple[int, int]:
    seq = doc.gold_roles() if level == "fine" else doc.gold_main_labels()
    total = len(seq) - 1
    shifts = sum(1 for a, b in zip(seq, seq[1:]) if a != b)
    return shifts, total


def shift_statistic(
    docs: Sequence[DocumentRecord],
    *,
    level: Literal["fine", "main"] = "fine",
) -> ShiftStatistic:
    """Measure how often adjacent sentences change gold label.

    Documents with fewer than two sentences contribute no pairs and are
    excluded from the macro average.
    """
    per_doc: dict[str, tuple[int, int]] = {}
    shift_pairs = 0
    total_pairs = 0
    rates = []
    for doc in docs:
        s, t = _doc_shift_counts(doc, level)
        per_doc[doc.doc_id] = (s, t)
        shift_pairs += s
        total_pairs += t
        if t > 0:
            rates.append(s / t)
    if total_pairs == 0:
        raise DataError("no adjacent sentence pairs in corpus; cannot compute shift rate")
    return ShiftStatistic(
        shift_pairs=shift_pairs,
        total_pairs=total_pairs,
        macro_shift_rate=sum(rates) / len(rates),
        per_doc=per_doc,
    )
