"""Deterministic handcrafted sentence features with a fixed 172-dim contract.

The exact feature inventory behind the published 172-dim setting is not
reproducible from public sources, so this module ships a documented default
set (positional, length, regex, lexicon, and surface statistics) and
zero-pads to the contracted width. Swap in another featurizer by matching
the DocumentEncoder contract.
"""
from __future__ import annotations

import re
from typing import Sequence

import numpy as np

from ..corpus.records import DocumentRecord

_TOKEN = re.compile(r"\S+")
_WORD = re.compile(r"[A-Za-z]+")
_STATUTE = re.compile(r"\b(?:section|sec\.?|article|art\.?|rule|order)\s+\d+", re.IGNORECASE)
_CITATION = re.compile(
    r"\b(?:AIR|SCC|SCR|ITR|CriLJ)\b|\(\d{4}\)\s*\d+|\bv(?:s)?\.\s+[A-Z]", re.VERBOSE
)
_ACT_NAME = re.compile(r"\b[A-Z][A-Za-z]*\s+Act\b|\bthe Act\b")
_YEAR = re.compile(r"\b(?:19|20)\d{2}\b")
_MONEY = re.compile(r"\bRs\.?\s*[\d,]+|\₹")

_LENGTH_BUCKETS = (5, 10, 20, 30, 45, 60, 80)

# Cue-phrase groups; each yields a presence flag and a length-normalized count.
CUE_LEXICON: dict[str, tuple[str, ...]] = {
    "fact": ("filed", "alleged", "entered into", "agreement", "incident", "deceased",
             "during the year", "assessment year"),
    "procedure": ("appeal", "petition", "writ", "trial court", "high court",
                  "tribunal", "impugned", "notice", "show cause"),
    "issue": ("whether", "question of law", "question for consideration", "issue"),
    "argument": ("contended", "submitted", "argued", "urged", "relied upon",
                 "learned counsel", "on behalf of"),
    "precedent": ("held in", "observed", "followed", "in the case of", "cited",
                  "this court held", "laid down", "ratio"),
    "statute": ("section", "sub-section", "provision", "act provides", "article",
                "rule", "notification"),
    "ruling_lower": ("convicted", "acquitted", "assessing officer", "commissioner held",
                     "tribunal held", "trial court held"),
    "ruling_present": ("we hold", "we are of the view", "appeal is allowed",
                       "appeal is dismissed", "set aside", "quashed", "remanded",
                       "disposed of", "no order as to costs"),
}


def _named_features() -> list[str]:
    names = [
        "rel_position",
        "is_first",
        "is_last",
        "norm_char_len",
        "norm_token_len",
    ]
    names += [f"len_bucket_{i}" for i in range(len(_LENGTH_BUCKETS) + 1)]
    names += ["statute_flag", "citation_flag", "act_name_flag", "year_flag", "money_flag"]
    for group in CUE_LEXICON:
        names += [f"cue_{group}_flag", f"cue_{group}_rate"]
    names += [
        "digit_ratio",
        "upper_ratio",
        "punct_ratio",
        "quote_flag",
        "question_flag",
        "exclaim_flag",
        "avg_word_len",
        "starts_with_digit",
        "all_caps_flag",
    ]
    return names


FEATURE_NAMES: tuple[str, ...] = tuple(_named_features())
FEATURE_INDEX: dict[str, int] = {n: i for i, n in enumerate(FEATURE_NAMES)}

DEFAULT_DIM = 172

assert len(FEATURE_NAMES) <= DEFAULT_DIM


class HandcraftedFeaturizer:
    """DocumentEncoder producing the padded handcrafted feature vector."""

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < len(FEATURE_NAMES):
            raise ValueError(
                f"dim {dim} smaller than the {len(FEATURE_NAMES)} named features"
            )
        self.dim = dim
        self.encoder_id = f"handcrafted-v1-d{dim}"

    def encode_doc(self, doc: DocumentRecord) -> np.ndarray:
        n = len(doc.sentences)
        out = np.zeros((n, self.dim), dtype=np.float32)
        for s in doc.sentences:
            out[s.index, : len(FEATURE_NAMES)] = self._features(s.text, s.index, n)
        return out

    def _features(self, text: str, index: int, doc_len: int) -> np.ndarray:
        v = np.zeros(len(FEATURE_NAMES), dtype=np.float32)
        lower = text.lower()
        tokens = _TOKEN.findall(text)
        words = _WORD.findall(text)
        n_tok = len(tokens)

        def put(name: str, value: float) -> None:
            v[FEATURE_INDEX[name]] = value

        put("rel_position", index / (doc_len - 1) if doc_len > 1 else 0.0)
        put("is_first", float(index == 0))
        put("is_last", float(index == doc_len - 1))
        put("norm_char_len", min(len(text), 1000) / 1000.0)
        put("norm_token_len", min(n_tok, 200) / 200.0)
        bucket = sum(1 for t in _LENGTH_BUCKETS if n_tok > t)
        put(f"len_bucket_{bucket}", 1.0)
        put("statute_flag", float(bool(_STATUTE.search(text))))
        put("citation_flag", float(bool(_CITATION.search(text))))
        put("act_name_flag", float(bool(_ACT_NAME.search(text))))
        put("year_flag", float(bool(_YEAR.search(text))))
        put("money_flag", float(bool(_MONEY.search(text))))
        for group, cues in CUE_LEXICON.items():
            hits = sum(lower.count(c) for c in cues)
            put(f"cue_{group}_flag", float(hits > 0))
            put(f"cue_{group}_rate", min(hits / max(n_tok, 1), 1.0))
        n_char = max(len(text), 1)
        put("digit_ratio", sum(c.isdigit() for c in text) / n_char)
        put("upper_ratio", sum(c.isupper() for c in text) / n_char)
        put("punct_ratio", sum(not c.isalnum() and not c.isspace() for c in text) / n_char)
        put("quote_flag", float('"' in text or "'" in text or "“" in text))
        put("question_flag", float("?" in text))
        put("exclaim_flag", float("!" in text))
        put("avg_word_len", min(np.mean([len(w) for w in words]) if words else 0.0, 20.0) / 20.0)
        put("starts_with_digit", float(bool(text) and text[0].isdigit()))
        put("all_caps_flag", float(bool(words) and all(w.isupper() for w in words)))
        return v
