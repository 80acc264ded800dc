"""Static sentence embeddings from externally trained word-vector files.

Loads the plain word2vec text format (header line "<vocab> <dim>", then one
"token v1 ... vdim" line per word) and mean-pools token vectors per sentence.
This is how externally trained sentence/word vector baselines plug into the
encoder contract without any training code here.
"""
from __future__ import annotations

import re
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ConfigError
from ..utils import sha256_file

_TOKEN = re.compile(r"[A-Za-z0-9]+")


class StaticVectorEncoder:
    def __init__(self, vocab: dict[str, np.ndarray], dim: int, *, source_id: str):
        self.vocab = vocab
        self.dim = dim
        self.encoder_id = f"static-{source_id}-d{dim}"

    @classmethod
    def load(cls, path: str | Path) -> "StaticVectorEncoder":
        path = Path(path)
        vocab: dict[str, np.ndarray] = {}
        with open(path, encoding="utf-8") as f:
            header = f.readline().split()
            if len(header) != 2:
                raise ConfigError(f"{path}: expected word2vec text header '<count> <dim>'")
            _, dim = int(header[0]), int(header[1])
            if dim <= 0:
                raise ConfigError(f"{path}: non-positive dim {dim}")
            for lineno, line in enumerate(f, start=2):
                parts = line.rstrip("\n").split(" ")
                if len(parts) != dim + 1:
                    raise ConfigError(
                        f"{path}:{lineno}: {len(parts) - 1} values, expected {dim}"
                    )
                vocab[parts[0]] = np.asarray(parts[1:], dtype=np.float32)
        if not vocab:
            raise ConfigError(f"{path}: no vectors")
        return cls(vocab, dim, source_id=sha256_file(path)[:12])

    def encode(self, sentences: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(sentences), self.dim), dtype=np.float32)
        for i, text in enumerate(sentences):
            hits = [self.vocab[t] for t in _TOKEN.findall(text.lower()) if t in self.vocab]
            if hits:
                out[i] = np.mean(hits, axis=0)
        return out
