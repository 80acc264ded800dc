"""Checkpoint directories for trained sequence labelers.

Layout: ``weights.pt`` (state dict), ``config.json`` (model config, feature
source ids, best epoch, validation F1, weights fingerprint), and
``training_log.jsonl`` (one record per epoch). Reloading rebuilds the model
from the stored config and verifies the weights fingerprint, so a loaded
checkpoint reproduces its recorded validation decisions exactly.
"""
from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import torch

from ..errors import ConfigError, DataError
from ..utils import atomic_write_bytes, atomic_write_text
from .config import SequenceModelConfig
from .models import SequenceTagger, build_tagger

__all__ = ["state_fingerprint", "save_checkpoint", "load_checkpoint", "LoadedCheckpoint"]

_FORMAT = "rrseg-checkpoint-v1"


def state_fingerprint(state: Mapping[str, torch.Tensor]) -> str:
    """Order-independent digest of a state dict (names, shapes, and bytes)."""
    h = hashlib.blake2b(digest_size=16)
    for name in sorted(state):
        t = state[name].detach().cpu().contiguous()
        h.update(name.encode())
        h.update(str(tuple(t.shape)).encode())
        h.update(t.numpy().tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class LoadedCheckpoint:
    model: SequenceTagger
    config: SequenceModelConfig
    feature_source_id: str
    shift_source_id: str | None
    best_epoch: int
    val_macro_f1: float | None
    fingerprint: str
    log: tuple[dict, ...]

    @property
    def label_set(self) -> tuple[str, ...]:
        return self.config.label_set


def save_checkpoint(
    directory: str | Path,
    model: SequenceTagger,
    *,
    feature_source_id: str,
    shift_source_id: str | None = None,
    best_epoch: int,
    val_macro_f1: float | None,
    log: list[dict] | tuple[dict, ...] = (),
    extra: Mapping[str, object] | None = None,
) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    state = model.state_dict()
    buf = io.BytesIO()
    torch.save(state, buf)
    atomic_write_bytes(directory / "weights.pt", buf.getvalue())
    meta = {
        "format": _FORMAT,
        "config": model.config.to_dict(),
        "feature_source_id": feature_source_id,
        "shift_source_id": shift_source_id,
        "best_epoch": int(best_epoch),
        "val_macro_f1": None if val_macro_f1 is None else float(val_macro_f1),
        "weights_fingerprint": state_fingerprint(state),
    }
    if extra:
        overlap = set(extra) & set(meta)
        if overlap:
            raise ConfigError(f"extra metadata may not shadow core keys: {sorted(overlap)}")
        meta.update(extra)
    atomic_write_text(directory / "config.json", json.dumps(meta, indent=2) + "\n")
    lines = "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in log)
    atomic_write_text(directory / "training_log.jsonl", lines)
    return directory


def load_checkpoint(directory: str | Path) -> LoadedCheckpoint:
    directory = Path(directory)
    meta_path = directory / "config.json"
    if not meta_path.exists():
        raise DataError(f"not a checkpoint directory (no config.json): {directory}")
    meta = json.loads(meta_path.read_text())
    if meta.get("format") != _FORMAT:
        raise DataError(f"{meta_path}: unsupported checkpoint format {meta.get('format')!r}")
    config = SequenceModelConfig.from_dict(meta["config"])
    model = build_tagger(config)
    state = torch.load(directory / "weights.pt", map_location="cpu", weights_only=True)
    got = state_fingerprint(state)
    if got != meta["weights_fingerprint"]:
        raise DataError(
            f"{directory}: weights fingerprint mismatch "
            f"(file {got}, recorded {meta['weights_fingerprint']})"
        )
    model.load_state_dict(state)
    model.eval()
    log_path = directory / "training_log.jsonl"
    log: tuple[dict, ...] = ()
    if log_path.exists():
        log = tuple(
            json.loads(line) for line in log_path.read_text().splitlines() if line.strip()
        )
    return LoadedCheckpoint(
        model=model,
        config=config,
        feature_source_id=meta["feature_source_id"],
        shift_source_id=meta.get("shift_source_id"),
        best_epoch=int(meta["best_epoch"]),
        val_macro_f1=meta.get("val_macro_f1"),
        fingerprint=meta["weights_fingerprint"],
        log=log,
    )
