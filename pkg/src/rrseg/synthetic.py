"""Synthetic block-structured corpora for desk-scale end-to-end checks.

Documents are sequences of label blocks: a role is held for a geometric
number of sentences, then switches. Each role owns an exclusive vocabulary,
mixed with shared noise tokens, so the labeling task is learnable from lexical
features alone at small scale.
"""
from __future__ import annotations

import random

import numpy as np

from .corpus.records import DocumentRecord, SentenceRecord
from .errors import ConfigError
from .labels import REDUCTION_MAP, MainLabel, RhetoricalRole

__all__ = [
    "CANONICAL_FINE",
    "generate_block_corpus",
    "gaussian_label_embeddings",
]

#: One representative fine label per main label (first in enum order).
CANONICAL_FINE: dict[MainLabel, RhetoricalRole] = {}
for _role in RhetoricalRole:
    _main = REDUCTION_MAP[_role]
    if _main is not None and _main not in CANONICAL_FINE:
        CANONICAL_FINE[_main] = _role


def _label_vocab(label: MainLabel, size: int) -> list[str]:
    stem = label.value.lower().replace("-", "")
    return [f"{stem}term{j}" for j in range(size)]


def generate_block_corpus(
    n_docs: int,
    *,
    seed: int = 0,
    domain: str = "IT",
    mean_sentences: int = 18,
    min_sentences: int = 5,
    mean_block: float = 4.0,
    noise_rate: float = 0.25,
    vocab_per_label: int = 30,
    noise_vocab: int = 60,
    tokens_per_sentence: tuple[int, int] = (8, 14),
) -> list[DocumentRecord]:
    """Generate adjudicated documents with gold fine and main labels set."""
    if n_docs < 1:
        raise ConfigError("need at least one document")
    if mean_block < 1.0:
        raise ConfigError("mean_block must be >= 1")
    rng = random.Random(seed)
    labels = list(MainLabel)
    vocab = {lab: _label_vocab(lab, vocab_per_label) for lab in labels}
    noise = [f"filler{j}" for j in range(noise_vocab)]

    docs: list[DocumentRecord] = []
    for d in range(n_docs):
        n = max(min_sentences, int(rng.gauss(mean_sentences, mean_sentences / 4)))
        seq: list[MainLabel] = []
        # rotate the opening label across documents so every class shows up
        # in every split of a modest corpus
        prev: MainLabel | None = None
        start = labels[d % len(labels)]
        while len(seq) < n:
            if prev is None:
                lab = start
            else:
                lab = rng.choice([l for l in labels if l is not prev])
            block = 1
            while block < 12 and rng.random() > 1.0 / mean_block:
                block += 1
            seq.extend([lab] * min(block, n - len(seq)))
            prev = lab
        sentences = []
        for i, lab in enumerate(seq):
            k = rng.randint(*tokens_per_sentence)
            words = [
                rng.choice(noise) if rng.random() < noise_rate else rng.choice(vocab[lab])
                for _ in range(k)
            ]
            sentences.append(
                SentenceRecord(
                    index=i,
                    text=" ".join(words) + ".",
                    gold=CANONICAL_FINE[lab],
                    gold_main=lab,
                )
            )
        docs.append(
            DocumentRecord(doc_id=f"syn-{seed}-{d:04d}", domain=domain, sentences=tuple(sentences))
        )
    return docs


def gaussian_label_embeddings(
    docs: list[DocumentRecord],
    dim: int,
    *,
    seed: int = 0,
    noise: float = 0.3,
) -> dict[str, np.ndarray]:
    """Label-conditioned gaussian rows per document (a fast feature stand-in).

    Each main label gets a fixed random mean vector; every sentence's row is
    its label's mean plus isotropic noise. Useful when a check needs separable
    features without tokenizing text.
    """
    gen = np.random.default_rng(seed)
    means = {lab: gen.normal(size=dim).astype(np.float32) for lab in MainLabel}
    out: dict[str, np.ndarray] = {}
    for doc in docs:
        rows = np.stack(
            [
                means[s.gold_main] + noise * gen.normal(size=dim).astype(np.float32)
                for s in doc.sentences
            ]
        )
        out[doc.doc_id] = rows.astype(np.float32)
    return out
