"""Dependency-free hashed bag-of-words sentence encoder.

Used for tests and synthetic experiments where a transformer is overkill:
tokens are hashed into ``dim`` buckets with blake2b, counted, and the count
vector is L2-normalized. Deterministic across platforms and processes.
"""
from __future__ import annotations

import re
from hashlib import blake2b
from typing import Sequence

import numpy as np

_TOKEN = re.compile(r"[A-Za-z0-9]+")


class HashingSentenceEncoder:
    def __init__(self, dim: int = 256, *, salt: str = "v1"):
        if dim <= 0:
            raise ValueError(f"dim must be positive, got {dim}")
        self.dim = dim
        self.salt = salt
        self.encoder_id = f"hashing-{salt}-d{dim}"

    def _bucket(self, token: str) -> int:
        h = blake2b(token.encode("utf-8"), digest_size=8, key=self.salt.encode("utf-8"))
        return int.from_bytes(h.digest(), "little") % self.dim

    def encode(self, sentences: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(sentences), self.dim), dtype=np.float32)
        for i, text in enumerate(sentences):
            for token in _TOKEN.findall(text.lower()):
                out[i, self._bucket(token)] += 1.0
            norm = float(np.linalg.norm(out[i]))
            if norm > 0:
                out[i] /= norm
        return out
