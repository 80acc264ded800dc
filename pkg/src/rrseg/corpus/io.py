"""Corpus serialization: the native JSONL schema and the WebAnno TSV import path.

Native JSONL, one document per line:

    {"doc_id": str, "domain": "IT"|"CL"|"G",
     "sentences": [{"text": str,
                    "annotations": {annotator_id: {"primary": code,
                                                   "secondary": code?,
                                                   "tertiary": code?}},
                    "gold": code?, "gold_main": code?}]}

``gold_main`` is written for reduced corpora and accepted on read; the rest
of the schema is strict (unknown keys and unknown label codes are errors).
"""
from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Iterable, Mapping

from ..errors import AnnotationImportError, DataError, LabelError
from ..labels import MainLabel, RhetoricalRole, parse_main_label, parse_role
from .records import AnnotationCell, DocumentRecord, SentenceRecord

_SENTENCE_KEYS = {"text", "annotations", "gold", "gold_main"}
_DOC_KEYS = {"doc_id", "domain", "sentences"}
_CELL_KEYS = {"primary", "secondary", "tertiary"}


def _no_dup_pairs(pairs):
    seen = set()
    for key, _ in pairs:
        if key in seen:
            raise AnnotationImportError(f"duplicate key {key!r} in JSON object")
        seen.add(key)
    return dict(pairs)


def _parse_cell(annotator_id: str, obj: dict, where: str) -> AnnotationCell:
    unknown = set(obj) - _CELL_KEYS
    if unknown:
        raise AnnotationImportError(f"{where}: unknown annotation keys {sorted(unknown)}")
    if "primary" not in obj:
        raise AnnotationImportError(f"{where}: annotator {annotator_id!r} has no primary label")

    def role(key):
        if obj.get(key) is None:
            return None
        try:
            return parse_role(obj[key])
        except LabelError as exc:
            raise AnnotationImportError(f"{where}: {exc}") from None

    try:
        return AnnotationCell(
            annotator_id=annotator_id,
            primary=role("primary"),
            secondary=role("secondary"),
            tertiary=role("tertiary"),
        )
    except DataError as exc:
        raise AnnotationImportError(f"{where}: {exc}") from None


def _parse_doc(obj: dict, where: str) -> DocumentRecord:
    unknown = set(obj) - _DOC_KEYS
    if unknown:
        raise AnnotationImportError(f"{where}: unknown document keys {sorted(unknown)}")
    for key in ("doc_id", "domain", "sentences"):
        if key not in obj:
            raise AnnotationImportError(f"{where}: missing {key!r}")
    doc_id = obj["doc_id"]
    sentences = []
    for i, s in enumerate(obj["sentences"]):
        swhere = f"{where}: doc {doc_id!r} sentence {i}"
        unknown = set(s) - _SENTENCE_KEYS
        if unknown:
            raise AnnotationImportError(f"{swhere}: unknown keys {sorted(unknown)}")
        cells = tuple(
            _parse_cell(aid, cell, swhere)
            for aid, cell in (s.get("annotations") or {}).items()
        )
        gold = None
        if s.get("gold") is not None:
            try:
                gold = parse_role(s["gold"])
            except LabelError as exc:
                raise AnnotationImportError(f"{swhere}: {exc}") from None
        gold_main = None
        if s.get("gold_main") is not None:
            try:
                gold_main = parse_main_label(s["gold_main"])
            except LabelError as exc:
                raise AnnotationImportError(f"{swhere}: {exc}") from None
        try:
            sentences.append(
                SentenceRecord(index=i, text=s["text"], annotations=cells,
                               gold=gold, gold_main=gold_main)
            )
        except DataError as exc:
            raise AnnotationImportError(f"{swhere}: {exc}") from None
    try:
        return DocumentRecord(doc_id=doc_id, domain=obj["domain"], sentences=tuple(sentences))
    except DataError as exc:
        raise AnnotationImportError(f"{where}: {exc}") from None


def read_corpus_jsonl(path: str | Path) -> list[DocumentRecord]:
    """Load a corpus from native JSONL, strictly validating labels and schema."""
    docs = []
    seen_ids = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line, object_pairs_hook=_no_dup_pairs)
            except json.JSONDecodeError as exc:
                raise AnnotationImportError(f"{where}: invalid JSON: {exc}") from None
            doc = _parse_doc(obj, where)
            if doc.doc_id in seen_ids:
                raise AnnotationImportError(f"{where}: duplicate doc_id {doc.doc_id!r}")
            seen_ids.add(doc.doc_id)
            docs.append(doc)
    return docs


def doc_to_dict(doc: DocumentRecord) -> dict:
    sentences = []
    for s in doc.sentences:
        entry: dict = {"text": s.text}
        if s.annotations:
            entry["annotations"] = {
                c.annotator_id: {
                    k: v.value
                    for k, v in (
                        ("primary", c.primary),
                        ("secondary", c.secondary),
                        ("tertiary", c.tertiary),
                    )
                    if v is not None
                }
                for c in s.annotations
            }
        if s.gold is not None:
            entry["gold"] = s.gold.value
        if s.gold_main is not None:
            entry["gold_main"] = s.gold_main.value
        sentences.append(entry)
    return {"doc_id": doc.doc_id, "domain": doc.domain, "sentences": sentences}


def write_corpus_jsonl(docs: Iterable[DocumentRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for doc in docs:
            f.write(json.dumps(doc_to_dict(doc), ensure_ascii=False) + "\n")


# --- WebAnno TSV v3 import ---

_DISAMBIG = re.compile(r"\[\d+\]$")
_ESCAPES = [("\\t", "\t"), ("\\n", "\n"), ("\\r", "\r"), ("\\\\", "\\")]


def _unescape(text: str) -> str:
    for esc, raw in _ESCAPES:
        text = text.replace(esc, raw)
    return text


def _tsv_sentences(content: str, where: str) -> list[tuple[str, list[list[str]]]]:
    """Parse TSV into (sentence_text, token_feature_rows) pairs."""
    sentences: list[tuple[str, list[list[str]]]] = []
    current_text = None
    current_rows: list[list[str]] = []
    saw_format = False
    for lineno, line in enumerate(content.splitlines(), start=1):
        if line.startswith("#FORMAT="):
            saw_format = True
            continue
        if line.startswith(("#T_SP=", "#T_CH=", "#T_RL=", "#Sentence")):
            continue
        if line.startswith("#Text="):
            if current_text is not None:
                sentences.append((current_text, current_rows))
            current_text = _unescape(line[len("#Text=") :])
            current_rows = []
            continue
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) < 4:
            raise AnnotationImportError(
                f"{where}:{lineno}: token row has {len(cols)} columns, expected >= 4"
            )
        if current_text is None:
            raise AnnotationImportError(f"{where}:{lineno}: token row before any #Text= line")
        current_rows.append(cols[3:])  # feature columns follow id, offsets, form
    if current_text is not None:
        sentences.append((current_text, current_rows))
    if not saw_format:
        raise AnnotationImportError(f"{where}: missing #FORMAT= header; not a WebAnno TSV v3 file")
    return sentences


def _sentence_feature(rows: list[list[str]], col: int, where: str) -> str | None:
    """The single span value a sentence's tokens carry in one feature column."""
    values = set()
    for row in rows:
        if col < len(row):
            v = _DISAMBIG.sub("", row[col])
            if v not in ("_", "*", ""):
                values.add(v)
    if not values:
        return None
    if len(values) > 1:
        raise AnnotationImportError(
            f"{where}: tokens of one sentence carry conflicting labels {sorted(values)}; "
            "sentence-level annotation expected"
        )
    return values.pop()


def read_webanno_tsv(content: str, *, where: str = "<tsv>") -> list[tuple[str, str, str | None, str | None]]:
    """Parse one annotator's WebAnno TSV v3 export.

    Returns (text, primary, secondary, tertiary) per sentence. Feature
    columns are read in order primary, secondary, tertiary; disambiguation
    suffixes like ``FAC[3]`` are stripped.
    """
    out = []
    for idx, (text, rows) in enumerate(_tsv_sentences(content, where)):
        swhere = f"{where}: sentence {idx}"
        primary = _sentence_feature(rows, 0, swhere)
        if primary is None:
            raise AnnotationImportError(f"{swhere}: no primary label on any token")
        secondary = _sentence_feature(rows, 1, swhere)
        tertiary = _sentence_feature(rows, 2, swhere)
        out.append((text, primary, secondary, tertiary))
    return out


def import_webanno(
    doc_id: str,
    domain: str,
    sources: Mapping[str, str],
) -> DocumentRecord:
    """Merge per-annotator WebAnno TSV exports of one document.

    ``sources`` maps annotator_id to TSV file content. All exports must
    agree on sentence count and text.
    """
    if not sources:
        raise AnnotationImportError(f"doc {doc_id!r}: no annotator files supplied")
    parsed = {}
    for annotator, content in sources.items():
        parsed[annotator] = read_webanno_tsv(content, where=f"doc {doc_id!r} [{annotator}]")
    counts = {a: len(p) for a, p in parsed.items()}
    if len(set(counts.values())) != 1:
        raise AnnotationImportError(f"doc {doc_id!r}: sentence counts differ across annotators: {counts}")
    annotators = sorted(parsed)
    n = counts[annotators[0]]
    sentences = []
    for i in range(n):
        texts = {parsed[a][i][0] for a in annotators}
        if len(texts) != 1:
            raise AnnotationImportError(
                f"doc {doc_id!r} sentence {i}: text differs across annotator exports"
            )
        cells = []
        for a in annotators:
            _, prim, sec, ter = parsed[a][i]
            where = f"doc {doc_id!r} sentence {i} [{a}]"
            try:
                cells.append(
                    AnnotationCell(
                        annotator_id=a,
                        primary=parse_role(prim),
                        secondary=parse_role(sec) if sec else None,
                        tertiary=parse_role(ter) if ter else None,
                    )
                )
            except (LabelError, DataError) as exc:
                raise AnnotationImportError(f"{where}: {exc}") from None
        sentences.append(SentenceRecord(index=i, text=texts.pop(), annotations=tuple(cells)))
    return DocumentRecord(doc_id=doc_id, domain=domain, sentences=tuple(sentences))


# --- externally labeled corpora (transfer path) ---


def load_label_mapping(path: str | Path) -> dict[str, MainLabel | None]:
    """Load a user-supplied label mapping file: {source_label: main-code or "DROP"}."""
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    if not isinstance(raw, dict) or not raw:
        raise DataError(f"{path}: mapping file must be a nonempty JSON object")
    mapping: dict[str, MainLabel | None] = {}
    for src, dst in raw.items():
        if dst in (None, "DROP", "drop"):
            mapping[src] = None
        else:
            mapping[src] = parse_main_label(dst)
    return mapping


def read_mapped_corpus_jsonl(
    path: str | Path, mapping: Mapping[str, MainLabel | None]
) -> list[DocumentRecord]:
    """Load an externally labeled corpus whose gold codes live outside the 13-role set.

    Each sentence's ``gold`` field is mapped through ``mapping`` straight to
    a main label; DROP sentences are removed and the rest re-indexed.
    """
    docs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            obj = json.loads(line)
            kept = []
            for i, s in enumerate(obj["sentences"]):
                code = s.get("gold")
                if code is None:
                    raise AnnotationImportError(f"{where}: sentence {i} has no gold label")
                if code not in mapping:
                    raise AnnotationImportError(
                        f"{where}: sentence {i}: label {code!r} missing from the mapping file"
                    )
                main = mapping[code]
                if main is None:
                    continue
                kept.append((s["text"], main))
            if not kept:
                continue
            sentences = tuple(
                SentenceRecord(index=i, text=t, gold=None, gold_main=m)
                for i, (t, m) in enumerate(kept)
            )
            docs.append(DocumentRecord(doc_id=obj["doc_id"], domain=obj["domain"], sentences=sentences))
    return docs
