"""Run manifests: enough identity to re-derive any result table row.

A manifest pins the configuration (by stable hash), the split, and checksums
of every corpus that fed the run.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

from .corpus.io import doc_to_dict
from .corpus.records import CorpusSplit, DocumentRecord
from .errors import DataError
from .utils import atomic_write_text, stable_json_hash

__all__ = ["config_hash", "corpus_checksum", "RunManifest"]

_FORMAT = "rrseg-manifest-v1"


def config_hash(config) -> str:
    """Stable digest of a config object (anything with to_dict) or dict."""
    d = config.to_dict() if hasattr(config, "to_dict") else dict(config)
    return stable_json_hash(d)


def corpus_checksum(docs: Sequence[DocumentRecord]) -> str:
    """Order-independent digest of a document collection."""
    if not docs:
        raise DataError("cannot checksum an empty corpus")
    per_doc = sorted(stable_json_hash(doc_to_dict(d)) for d in docs)
    return stable_json_hash(per_doc)


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_hash: str
    corpus_checksums: Mapping[str, str]
    split: dict | None = None
    created_at: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")
    )
    extra: Mapping[str, object] = field(default_factory=dict)

    @classmethod
    def for_run(
        cls,
        command: str,
        config,
        corpora: Mapping[str, Sequence[DocumentRecord]],
        *,
        split: CorpusSplit | None = None,
        extra: Mapping[str, object] | None = None,
    ) -> "RunManifest":
        return cls(
            command=command,
            config_hash=config_hash(config),
            corpus_checksums={k: corpus_checksum(v) for k, v in sorted(corpora.items())},
            split=None if split is None else split.to_dict(),
            extra=dict(extra or {}),
        )

    def to_dict(self) -> dict:
        return {
            "format": _FORMAT,
            "command": self.command,
            "config_hash": self.config_hash,
            "corpus_checksums": dict(self.corpus_checksums),
            "split": self.split,
            "created_at": self.created_at,
            "extra": dict(self.extra),
        }

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        atomic_write_text(path, json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        d = json.loads(Path(path).read_text())
        if d.get("format") != _FORMAT:
            raise DataError(f"{path}: unsupported manifest format {d.get('format')!r}")
        return cls(
            command=d["command"],
            config_hash=d["config_hash"],
            corpus_checksums=d["corpus_checksums"],
            split=d.get("split"),
            created_at=d.get("created_at", ""),
            extra=d.get("extra", {}),
        )
