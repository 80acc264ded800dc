"""On-disk embedding cache: one binary matrix per document plus a manifest.

Layout: a directory holding ``manifest.json`` and one ``.emb`` file per
document. Each ``.emb`` starts with a 16-byte little-endian header (magic
``RRE1``, uint32 row count, uint32 dim, uint32 reserved) followed by the
row-major float32 matrix. The manifest records the encoder fingerprint, the
dim, and a sha256 per file, so corruption is detectable on read.

Single writer, any number of readers; files are replaced atomically.
"""
from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass
from hashlib import blake2b
from pathlib import Path

import numpy as np

from ..errors import ArchiveCorruptError, ArchiveError
from ..utils import atomic_write_bytes, atomic_write_text, sha256_bytes

_MAGIC = b"RRE1"
_HEADER = struct.Struct("<4sIII")
_MANIFEST_FORMAT = "rrseg-embedding-archive-v1"
_SAFE = re.compile(r"[^A-Za-z0-9._-]")


def _doc_filename(doc_id: str) -> str:
    tag = blake2b(doc_id.encode("utf-8"), digest_size=6).hexdigest()
    stem = _SAFE.sub("_", doc_id)[:64] or "doc"
    return f"{stem}.{tag}.emb"


def _pack(matrix: np.ndarray) -> bytes:
    n, dim = matrix.shape
    data = np.ascontiguousarray(matrix, dtype="<f4")
    return _HEADER.pack(_MAGIC, n, dim, 0) + data.tobytes()


def _unpack(blob: bytes, where: str) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise ArchiveCorruptError(f"{where}: file shorter than header")
    magic, n, dim, _ = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise ArchiveCorruptError(f"{where}: bad magic {magic!r}")
    expected = _HEADER.size + 4 * n * dim
    if len(blob) != expected:
        raise ArchiveCorruptError(f"{where}: expected {expected} bytes, found {len(blob)}")
    return np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(n, dim).copy()


@dataclass(frozen=True)
class EncodeStats:
    encoded: tuple[str, ...]
    skipped: tuple[str, ...]
    repaired: tuple[str, ...]


class EmbeddingArchive:
    """Directory-backed store of per-document sentence-embedding matrices."""

    def __init__(self, root: str | Path, encoder_id: str, dim: int, docs: dict[str, dict]):
        self.root = Path(root)
        self.encoder_id = encoder_id
        self.dim = dim
        self._docs = docs
        self.last_encode_stats: EncodeStats | None = None

    # -- construction --

    @classmethod
    def create(cls, root: str | Path, *, encoder_id: str, dim: int) -> "EmbeddingArchive":
        root = Path(root)
        if (root / "manifest.json").exists():
            existing = cls.open(root)
            if existing.encoder_id != encoder_id:
                raise ArchiveError(
                    f"{root}: archive belongs to encoder {existing.encoder_id!r}, "
                    f"not {encoder_id!r}"
                )
            if existing.dim != dim:
                raise ArchiveError(f"{root}: archive dim {existing.dim} != requested {dim}")
            return existing
        if dim <= 0:
            raise ArchiveError(f"dim must be positive, got {dim}")
        root.mkdir(parents=True, exist_ok=True)
        archive = cls(root, encoder_id, dim, {})
        archive._save_manifest()
        return archive

    @classmethod
    def open(cls, root: str | Path) -> "EmbeddingArchive":
        root = Path(root)
        manifest_path = root / "manifest.json"
        if not manifest_path.exists():
            raise ArchiveError(f"{root}: no manifest.json; not an embedding archive")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        if manifest.get("format") != _MANIFEST_FORMAT:
            raise ArchiveError(f"{root}: unknown archive format {manifest.get('format')!r}")
        return cls(root, manifest["encoder_id"], int(manifest["dim"]), dict(manifest["docs"]))

    def _save_manifest(self) -> None:
        manifest = {
            "format": _MANIFEST_FORMAT,
            "encoder_id": self.encoder_id,
            "dim": self.dim,
            "docs": {k: self._docs[k] for k in sorted(self._docs)},
        }
        atomic_write_text(self.root / "manifest.json", json.dumps(manifest, indent=2) + "\n")

    # -- access --

    @property
    def doc_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._docs))

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    def __len__(self) -> int:
        return len(self._docs)

    def n_sentences(self, doc_id: str) -> int:
        return int(self._docs[doc_id]["n_sentences"])

    def write_doc(self, doc_id: str, matrix: np.ndarray) -> None:
        matrix = np.asarray(matrix)
        if matrix.ndim != 2:
            raise ArchiveError(f"doc {doc_id!r}: matrix must be 2-d, got shape {matrix.shape}")
        if matrix.shape[1] != self.dim:
            raise ArchiveError(
                f"doc {doc_id!r}: matrix width {matrix.shape[1]} != archive dim {self.dim}"
            )
        if matrix.shape[0] == 0:
            raise ArchiveError(f"doc {doc_id!r}: empty matrix")
        if not np.isfinite(matrix).all():
            raise ArchiveError(f"doc {doc_id!r}: matrix contains NaN or Inf")
        blob = _pack(matrix)
        fname = _doc_filename(doc_id)
        atomic_write_bytes(self.root / fname, blob)
        self._docs[doc_id] = {
            "file": fname,
            "n_sentences": int(matrix.shape[0]),
            "sha256": sha256_bytes(blob),
        }
        self._save_manifest()

    def read_doc(self, doc_id: str) -> np.ndarray:
        if doc_id not in self._docs:
            raise ArchiveError(f"doc {doc_id!r} not in archive {self.root}")
        entry = self._docs[doc_id]
        path = self.root / entry["file"]
        where = f"{path} (doc {doc_id!r})"
        try:
            blob = path.read_bytes()
        except FileNotFoundError:
            raise ArchiveCorruptError(f"{where}: file missing") from None
        if sha256_bytes(blob) != entry["sha256"]:
            raise ArchiveCorruptError(f"{where}: checksum mismatch")
        matrix = _unpack(blob, where)
        if matrix.shape[0] != entry["n_sentences"]:
            raise ArchiveCorruptError(
                f"{where}: header rows {matrix.shape[0]} != manifest {entry['n_sentences']}"
            )
        if matrix.shape[1] != self.dim:
            raise ArchiveCorruptError(f"{where}: header dim {matrix.shape[1]} != archive {self.dim}")
        return matrix

    def verify(self) -> list[str]:
        """Doc ids whose stored record is missing or corrupt."""
        bad = []
        for doc_id in self.doc_ids:
            try:
                self.read_doc(doc_id)
            except ArchiveCorruptError:
                bad.append(doc_id)
        return bad
