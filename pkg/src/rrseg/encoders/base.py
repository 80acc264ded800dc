"""Encoder contracts and the corpus-encoding pipeline over the archive."""
from __future__ import annotations

from pathlib import Path
from typing import Iterable, Protocol, Sequence, runtime_checkable

import numpy as np

from ..corpus.records import DocumentRecord
from ..errors import ArchiveCorruptError, ArchiveError
from .archive import EmbeddingArchive, EncodeStats


@runtime_checkable
class SentenceEncoder(Protocol):
    """Maps a batch of sentence strings to one ``dim``-length vector each.

    ``encoder_id`` must fingerprint everything that affects the output
    (weights, pooling, preprocessing) so the archive cache stays honest.
    """

    encoder_id: str
    dim: int

    def encode(self, sentences: Sequence[str]) -> np.ndarray: ...


@runtime_checkable
class DocumentEncoder(Protocol):
    """Sentence encoder that also sees document context (position, length)."""

    encoder_id: str
    dim: int

    def encode_doc(self, doc: DocumentRecord) -> np.ndarray: ...


class SentenceDocumentAdapter:
    """Lifts a plain SentenceEncoder to the DocumentEncoder interface."""

    def __init__(self, encoder: SentenceEncoder):
        self._encoder = encoder
        self.encoder_id = encoder.encoder_id
        self.dim = encoder.dim

    def encode(self, sentences: Sequence[str]) -> np.ndarray:
        return self._encoder.encode(sentences)

    def encode_doc(self, doc: DocumentRecord) -> np.ndarray:
        return self._encoder.encode([s.text for s in doc.sentences])


def _encode_one(encoder, doc: DocumentRecord) -> np.ndarray:
    if hasattr(encoder, "encode_doc"):
        matrix = encoder.encode_doc(doc)
    else:
        matrix = encoder.encode([s.text for s in doc.sentences])
    matrix = np.asarray(matrix, dtype=np.float32)
    if matrix.shape != (len(doc.sentences), encoder.dim):
        raise ArchiveError(
            f"encoder {encoder.encoder_id!r} returned shape {matrix.shape} for doc "
            f"{doc.doc_id!r}; expected {(len(doc.sentences), encoder.dim)}"
        )
    if not np.isfinite(matrix).all():
        raise ArchiveError(f"encoder output for doc {doc.doc_id!r} contains NaN or Inf")
    return matrix


def encode_corpus(
    encoder: SentenceEncoder | DocumentEncoder,
    docs: Iterable[DocumentRecord],
    archive_dir: str | Path,
) -> EmbeddingArchive:
    """Materialize sentence embeddings for every document into an archive.

    Runs are idempotent: documents already stored under the same encoder_id
    are skipped, and documents whose stored record fails its checksum are
    re-encoded in place. The returned archive carries the run's
    encoded/skipped/repaired doc ids in ``last_encode_stats``.
    """
    archive = EmbeddingArchive.create(archive_dir, encoder_id=encoder.encoder_id, dim=encoder.dim)
    encoded, skipped, repaired = [], [], []
    for doc in docs:
        if doc.doc_id in archive:
            try:
                stored = archive.read_doc(doc.doc_id)
            except ArchiveCorruptError:
                archive.write_doc(doc.doc_id, _encode_one(encoder, doc))
                repaired.append(doc.doc_id)
                continue
            if stored.shape[0] != len(doc.sentences):
                raise ArchiveError(
                    f"doc {doc.doc_id!r}: archive has {stored.shape[0]} rows but the document "
                    f"now has {len(doc.sentences)} sentences; use a fresh archive"
                )
            skipped.append(doc.doc_id)
            continue
        archive.write_doc(doc.doc_id, _encode_one(encoder, doc))
        encoded.append(doc.doc_id)
    archive.last_encode_stats = EncodeStats(
        encoded=tuple(encoded), skipped=tuple(skipped), repaired=tuple(repaired)
    )
    return archive
