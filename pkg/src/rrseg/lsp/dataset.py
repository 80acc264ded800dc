"""Shift-pair dataset construction: does the label change between neighbors?"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Sequence

from ..corpus.records import DocumentRecord
from ..errors import DataError


@dataclass(frozen=True)
class ShiftPair:
    """Consecutive sentence pair (s_i, s_{i+1}) with label 1 iff the gold label shifts."""

    doc_id: str
    i: int
    text_a: str
    text_b: str
    label: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise DataError(f"shift label must be 0 or 1, got {self.label!r}")
        if self.i < 0:
            raise DataError(f"pair index must be non-negative, got {self.i}")


def build_shift_dataset(
    docs: Iterable[DocumentRecord],
    *,
    level: Literal["main", "fine"] = "main",
) -> list[ShiftPair]:
    """One pair per adjacent sentence couple; n sentences yield n-1 pairs.

    ``level`` picks which gold labels define a shift: the reduced 7-label set
    (default, what the auxiliary task trains on) or the full 13-role set.
    """
    pairs: list[ShiftPair] = []
    for doc in docs:
        labels = []
        for s in doc.sentences:
            lab = s.gold_main if level == "main" else s.gold
            if lab is None:
                raise DataError(
                    f"doc {doc.doc_id!r} sentence {s.index}: no gold "
                    f"{'main ' if level == 'main' else ''}label; "
                    "build shift pairs after adjudication"
                    + (" and reduction" if level == "main" else "")
                )
            labels.append(lab)
        for i in range(len(doc.sentences) - 1):
            pairs.append(
                ShiftPair(
                    doc_id=doc.doc_id,
                    i=i,
                    text_a=doc.sentences[i].text,
                    text_b=doc.sentences[i + 1].text,
                    label=int(labels[i] != labels[i + 1]),
                )
            )
    return pairs


def consecutive_pairs(doc: DocumentRecord) -> list[ShiftPair]:
    """Unlabeled inference-time pairs of one document (label fixed to 0)."""
    return [
        ShiftPair(doc_id=doc.doc_id, i=i, text_a=doc.sentences[i].text,
                  text_b=doc.sentences[i + 1].text, label=0)
        for i in range(len(doc.sentences) - 1)
    ]


def positive_rate(pairs: Sequence[ShiftPair]) -> float:
    if not pairs:
        raise DataError("no pairs")
    return sum(p.label for p in pairs) / len(pairs)


def write_shift_pairs_jsonl(pairs: Iterable[ShiftPair], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            f.write(json.dumps({"doc_id": p.doc_id, "i": p.i, "text_a": p.text_a,
                                "text_b": p.text_b, "label": p.label},
                               ensure_ascii=False) + "\n")


def read_shift_pairs_jsonl(path: str | Path) -> list[ShiftPair]:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                pairs.append(ShiftPair(doc_id=obj["doc_id"], i=int(obj["i"]),
                                       text_a=obj["text_a"], text_b=obj["text_b"],
                                       label=int(obj["label"])))
            except (KeyError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: bad shift pair: {exc}") from None
    return pairs
