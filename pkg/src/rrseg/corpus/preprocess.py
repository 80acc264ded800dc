"""Raw-judgment cleaning and sentence segmentation.

Cleaning is driven by an ordered list of regex directives loaded from a
rule file, so new courts or domains only need a new rules file, not code.
The shipped default rules (dates, cause-title headers, bench lines, HTML
artifacts) are toolkit choices; court scrapes vary too much for one
canonical set.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence

from ..errors import ConfigError, IngestionError
from .records import DocumentRecord, SentenceRecord

_ACTIONS = ("delete", "replace")


@dataclass(frozen=True)
class PreprocessRule:
    """One pattern -> delete/replace directive, applied in file order."""

    pattern: str
    action: str = "delete"
    replacement: str = ""
    flags: int = re.MULTILINE

    def __post_init__(self) -> None:
        if self.action not in _ACTIONS:
            raise ConfigError(f"rule action must be one of {_ACTIONS}, got {self.action!r}")
        if self.action == "delete" and self.replacement:
            raise ConfigError("delete rules must not carry a replacement")
        try:
            re.compile(self.pattern, self.flags)
        except re.error as exc:
            raise ConfigError(f"bad rule pattern {self.pattern!r}: {exc}") from None

    def apply(self, text: str) -> str:
        repl = "" if self.action == "delete" else self.replacement
        return re.sub(self.pattern, repl, text, flags=self.flags)


def load_rules(path: str | Path) -> list[PreprocessRule]:
    """Load an ordered rule file: a JSON list of {pattern, action, replacement?}."""
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    return _rules_from_obj(raw, source=str(path))


def default_rules() -> list[PreprocessRule]:
    """The shipped default directive set for Indian court scrapes."""
    raw = json.loads(
        resources.files("rrseg.data").joinpath("default_preprocess_rules.json").read_text()
    )
    return _rules_from_obj(raw, source="<default rules>")


def _rules_from_obj(raw, source: str) -> list[PreprocessRule]:
    if not isinstance(raw, list):
        raise ConfigError(f"{source}: rule file must be a JSON list")
    rules = []
    for i, item in enumerate(raw):
        unknown = set(item) - {"pattern", "action", "replacement"}
        if unknown:
            raise ConfigError(f"{source}: rule {i} has unknown keys {sorted(unknown)}")
        if "pattern" not in item:
            raise ConfigError(f"{source}: rule {i} is missing 'pattern'")
        rules.append(
            PreprocessRule(
                pattern=item["pattern"],
                action=item.get("action", "delete"),
                replacement=item.get("replacement", ""),
            )
        )
    return rules


def apply_rules(text: str, rules: Sequence[PreprocessRule]) -> str:
    for rule in rules:
        text = rule.apply(text)
    return text


class SentenceSplitter(Protocol):
    """Contract: ordered, non-overlapping spans whose concatenation covers the text."""

    def split(self, text: str) -> list[tuple[int, int]]: ...


# Abbreviations that end with a period but do not end a sentence. Tuned for
# Indian legal prose (case cites, honorifics, statute shorthand).
_ABBREVIATIONS = (
    "no", "nos", "rs", "vs", "v", "mr", "mrs", "ms", "dr", "hon", "smt", "shri",
    "sec", "s", "ss", "art", "cl", "sub-s", "para", "co", "ltd", "pvt", "corpn",
    "govt", "dept", "anr", "ors", "etc", "i.e", "e.g", "viz", "cit", "ito", "cst",
    "ed", "vol", "p", "pp", "u", "w.e.f", "a.y", "f.y",
)
_ABBREV_SET = frozenset(_ABBREVIATIONS)

_BOUNDARY = re.compile(r"[.?!]+[\"')\]]*\s+")


class RegexSentenceSplitter:
    """Rule-based splitter for legal prose.

    Splits after terminal punctuation followed by whitespace, except after
    known abbreviations, single-letter initials, and digits-with-decimals.
    Returned spans partition the input (trailing whitespace stays with the
    preceding span).
    """

    def split(self, text: str) -> list[tuple[int, int]]:
        if not text:
            return []
        cuts = [0]
        for m in _BOUNDARY.finditer(text):
            if self._is_boundary(text, m):
                cuts.append(m.end())
        if cuts[-1] != len(text):
            cuts.append(len(text))
        return [(a, b) for a, b in zip(cuts, cuts[1:]) if a < b]

    @staticmethod
    def _is_boundary(text: str, m: re.Match) -> bool:
        # The word immediately before the punctuation run.
        before = text[: m.start()]
        word = re.search(r"[\w.\-']+$", before)
        token = word.group(0).lower() if word else ""
        if token in _ABBREV_SET or token.rstrip(".") in _ABBREV_SET:
            return False
        if len(token) == 1 and token.isalpha():
            return False  # initials like "J. Smith"
        # Decimal / enumeration contexts: "12.3.2004" has no space so it never
        # reaches here; "Section 147." at line end is a real boundary.
        nxt = text[m.end() : m.end() + 1]
        if nxt and nxt.islower():
            return False  # mid-sentence period, e.g. bad spacing around cites
        return True


class NltkSentenceSplitter:
    """Adapter over NLTK's punkt tokenizer, normalized to covering spans."""

    def __init__(self) -> None:
        try:
            import nltk  # noqa: F401
            from nltk.tokenize import PunktSentenceTokenizer
        except ImportError as exc:
            raise ConfigError(
                "NltkSentenceSplitter requires the optional 'nltk' package"
            ) from exc
        self._tok = PunktSentenceTokenizer()

    def split(self, text: str) -> list[tuple[int, int]]:
        if not text:
            return []
        raw = list(self._tok.span_tokenize(text))
        if not raw:
            return [(0, len(text))]
        # Extend each span to the start of the next so the spans tile the text.
        spans = []
        start = 0
        for i, (_, e) in enumerate(raw):
            end = raw[i + 1][0] if i + 1 < len(raw) else len(text)
            spans.append((start, end))
            start = end
        return spans


def validate_spans(text: str, spans: Sequence[tuple[int, int]]) -> None:
    """Check the splitter contract: ordered, non-overlapping, covering."""
    pos = 0
    for a, b in spans:
        if a != pos or b <= a:
            raise IngestionError(
                f"splitter violated its contract at span ({a}, {b}); expected start {pos}"
            )
        pos = b
    if pos != len(text):
        raise IngestionError(f"splitter spans cover {pos} of {len(text)} characters")


def ingest_raw(
    raw_text: str,
    rules: Sequence[PreprocessRule],
    splitter: SentenceSplitter,
    *,
    doc_id: str,
    domain: str,
) -> DocumentRecord:
    """Clean a raw judgment and segment it into unlabeled sentences.

    Empty or whitespace-only segments are dropped. A document that cleans
    down to zero sentences is an ingestion error.
    """
    if not raw_text:
        raise IngestionError(f"doc {doc_id!r}: raw text is empty")
    cleaned = apply_rules(raw_text, rules)
    spans = splitter.split(cleaned)
    validate_spans(cleaned, spans)
    texts = [cleaned[a:b].strip() for a, b in spans]
    texts = [t for t in texts if t]
    if not texts:
        raise IngestionError(f"doc {doc_id!r}: no sentences remain after cleaning")
    sentences = tuple(SentenceRecord(index=i, text=t) for i, t in enumerate(texts))
    return DocumentRecord(doc_id=doc_id, domain=domain, sentences=sentences)
