"""Shift-aware input composition.

Each sentence row becomes [left-shift ⊕ sentence ⊕ right-shift]: the shift
vector into the sentence, the sentence embedding itself, and the shift vector
out of it. The first row has no incoming transition and the last row no
outgoing one; those slices are zero vectors (a trainable alternative lives in
the model via the boundary_shift config).
"""
from __future__ import annotations

import numpy as np

from ..encoders.archive import EmbeddingArchive
from ..errors import DataError

__all__ = ["compose_lsp_input", "ComposedShiftSource"]


def compose_lsp_input(
    sentence_embeddings: np.ndarray,
    shift_embeddings: np.ndarray,
) -> np.ndarray:
    """Build (n, 2*d_s + d_b) composed rows from per-sentence and per-pair vectors.

    sentence_embeddings: (n, d_b); shift_embeddings: (n-1, d_s). For n=1 the
    shift input must have zero rows and the output is a single
    [0 ⊕ b_0 ⊕ 0] row.
    """
    base = np.asarray(sentence_embeddings, dtype=np.float32)
    shifts = np.asarray(shift_embeddings, dtype=np.float32)
    if base.ndim != 2:
        raise DataError(f"sentence embeddings must be 2-d, got shape {base.shape}")
    n = base.shape[0]
    if n == 0:
        raise DataError("cannot compose inputs for an empty document")
    if shifts.ndim != 2:
        if n == 1 and shifts.size == 0:
            shifts = shifts.reshape(0, 0)
        else:
            raise DataError(f"shift embeddings must be 2-d, got shape {shifts.shape}")
    if shifts.shape[0] != n - 1:
        raise DataError(
            f"expected {n - 1} shift rows for {n} sentences, got {shifts.shape[0]}"
        )
    d_s = shifts.shape[1]
    left = np.zeros((n, d_s), dtype=np.float32)
    right = np.zeros((n, d_s), dtype=np.float32)
    if n > 1:
        left[1:] = shifts
        right[:-1] = shifts
    return np.concatenate([left, base, right], axis=1)


class ComposedShiftSource:
    """Per-document composed rows from a sentence archive plus a shift archive.

    ``shift_dim`` must be supplied when the shift archive may lack
    single-sentence documents (those have no pairs to embed); it fixes the
    width of their zero slices.
    """

    def __init__(
        self,
        sentence_archive: EmbeddingArchive,
        shift_archive: EmbeddingArchive,
        *,
        shift_dim: int | None = None,
    ):
        self.sentences = sentence_archive
        self.shifts = shift_archive
        self.shift_dim = shift_dim if shift_dim is not None else shift_archive.dim
        self.dim = 2 * self.shift_dim + sentence_archive.dim
        self.source_id = f"composed({sentence_archive.encoder_id}|{shift_archive.encoder_id})"

    def rows(self, doc_id: str) -> np.ndarray:
        base = self.sentences.read_doc(doc_id)
        n = base.shape[0]
        if n == 1:
            shifts = np.zeros((0, self.shift_dim), dtype=np.float32)
        else:
            shifts = self.shifts.read_doc(doc_id)
            if shifts.shape[0] != n - 1:
                raise DataError(
                    f"{doc_id}: shift archive has {shifts.shape[0]} rows, expected {n - 1}"
                )
        return compose_lsp_input(base, shifts)
