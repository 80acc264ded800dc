"""Shift-embedding extraction and caching for downstream sequence labelers."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from ..corpus.records import DocumentRecord
from ..encoders.archive import EmbeddingArchive, EncodeStats
from ..errors import ArchiveCorruptError
from .dataset import consecutive_pairs
from .models import ShiftModel, SiameseShiftModel


def shift_embeddings(
    model: ShiftModel,
    doc: DocumentRecord,
    sentence_embeddings: np.ndarray | None = None,
) -> np.ndarray:
    """e_{i,i+1} for every consecutive pair of the document: (n-1, dim).

    For the siamese model, precomputed ``sentence_embeddings`` (the document's
    archive matrix) replace re-encoding the texts.
    """
    pairs = consecutive_pairs(doc)
    if not pairs:
        return np.zeros((0, model.shift_embedding_dim), dtype=np.float32)
    if sentence_embeddings is not None and isinstance(model, SiameseShiftModel):
        e = np.asarray(sentence_embeddings, dtype=np.float32)
        return model.shift_embedding(pairs, embeddings=(e[:-1], e[1:]))
    return model.shift_embedding(pairs)


def cache_shift_embeddings(
    model: ShiftModel,
    docs: Sequence[DocumentRecord],
    cache_dir: str | Path,
    *,
    sentence_archive: EmbeddingArchive | None = None,
) -> EmbeddingArchive:
    """Materialize shift embeddings per document, keyed by the shift model's id.

    Uses the EmbeddingArchive format with n-1 rows per document; re-runs skip
    cached documents and repair corrupt records. Single-sentence documents
    have no pairs and are not stored.
    """
    archive = EmbeddingArchive.create(
        cache_dir, encoder_id=model.model_id, dim=model.shift_embedding_dim
    )
    encoded, skipped, repaired = [], [], []
    for doc in docs:
        if len(doc.sentences) < 2:
            continue
        sent = None
        if sentence_archive is not None and doc.doc_id in sentence_archive:
            sent = sentence_archive.read_doc(doc.doc_id)
        if doc.doc_id in archive:
            try:
                archive.read_doc(doc.doc_id)
            except ArchiveCorruptError:
                archive.write_doc(doc.doc_id, shift_embeddings(model, doc, sent))
                repaired.append(doc.doc_id)
            else:
                skipped.append(doc.doc_id)
            continue
        archive.write_doc(doc.doc_id, shift_embeddings(model, doc, sent))
        encoded.append(doc.doc_id)
    archive.last_encode_stats = EncodeStats(
        encoded=tuple(encoded), skipped=tuple(skipped), repaired=tuple(repaired)
    )
    return archive
