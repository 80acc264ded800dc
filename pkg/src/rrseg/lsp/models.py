"""The two label-shift classifiers and their training/evaluation loops.

SiameseShiftModel keeps a frozen sentence encoder and trains a small
feed-forward network on e_i ⊕ e_{i+1} ⊕ (e_i − e_{i+1}). PairShiftModel
fine-tunes a transformer end to end on "[CLS] s_i [SEP] s_{i+1} [SEP]".
Both expose the representation feeding their output layer as the shift
embedding.
"""
from __future__ import annotations

import abc
import copy
import json
import logging
from dataclasses import dataclass
from hashlib import blake2b
from pathlib import Path
from typing import Sequence

import numpy as np

from ..encoders.base import SentenceEncoder
from ..errors import ConfigError
from ..metrics import MetricsReport, macro_f1
from .dataset import ShiftPair

logger = logging.getLogger(__name__)

SHIFT_LABELS = ("same", "shift")


def _require_torch():
    try:
        import torch

        return torch
    except ImportError as exc:
        raise ConfigError("torch is required for shift models") from exc


@dataclass(frozen=True)
class ShiftSchedule:
    """Shift-classifier training hyperparameters."""

    epochs: int = 5
    batch_size: int = 16
    lr: float = 2e-5
    max_len: int = 256
    seed: int = 0
    pos_weight: float | None = None

    def __post_init__(self) -> None:
        if self.epochs < 0 or self.batch_size <= 0 or self.lr <= 0 or self.max_len <= 0:
            raise ConfigError(f"invalid shift schedule: {self}")
        if self.pos_weight is not None and self.pos_weight <= 0:
            raise ConfigError(f"pos_weight must be positive, got {self.pos_weight}")


SIAMESE_SCHEDULE = ShiftSchedule(epochs=10, batch_size=32, lr=1e-3)
PAIR_SCHEDULE = ShiftSchedule(epochs=5, batch_size=16, lr=2e-5, max_len=256)


class ShiftModel(abc.ABC):
    """Binary classifier over consecutive sentence pairs."""

    model_id: str
    shift_embedding_dim: int

    @abc.abstractmethod
    def predict(self, pairs: Sequence[ShiftPair]) -> np.ndarray:
        """0/1 prediction per pair."""

    @abc.abstractmethod
    def shift_embedding(self, pairs: Sequence[ShiftPair]) -> np.ndarray:
        """The pre-output representation e_{i,i+1}, one row per pair."""

    @abc.abstractmethod
    def save(self, directory: str | Path) -> None: ...


def _fingerprint_module(module) -> str:
    from ..encoders.transformer import weights_fingerprint

    return weights_fingerprint(module)


class _SiameseNet:
    """Builds the feed-forward stack; split out so forward can return the last hidden."""

    def __init__(self, input_dim: int, hidden_dims: tuple[int, ...]):
        torch = _require_torch()
        from torch import nn

        dims = (input_dim, *hidden_dims)
        self.hidden = nn.ModuleList(
            nn.Linear(dims[k], dims[k + 1]) for k in range(len(dims) - 1)
        )
        self.out = nn.Linear(dims[-1], 2)
        self.module = nn.ModuleDict({"hidden": self.hidden, "out": self.out})

    def forward(self, x):
        torch = _require_torch()
        h = x
        for layer in self.hidden:
            h = torch.relu(layer(h))
        return self.out(h), h


class SiameseShiftModel(ShiftModel):
    def __init__(self, encoder: SentenceEncoder, hidden_dims: tuple[int, ...] = (512, 128)):
        if not hidden_dims:
            raise ConfigError("need at least one hidden layer")
        self.encoder = encoder
        self.hidden_dims = tuple(int(h) for h in hidden_dims)
        self.input_dim = 3 * encoder.dim
        self.shift_embedding_dim = self.hidden_dims[-1]
        self.net = _SiameseNet(self.input_dim, self.hidden_dims)
        self._refresh_id()

    def _refresh_id(self) -> None:
        enc_tag = blake2b(self.encoder.encoder_id.encode(), digest_size=4).hexdigest()
        self.model_id = (
            f"siamese-shift-e{enc_tag}-h{'x'.join(map(str, self.hidden_dims))}"
            f"-{_fingerprint_module(self.net.module)[:12]}"
        )

    def features(self, pairs: Sequence[ShiftPair],
                 embeddings: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
        """e_a ⊕ e_b ⊕ (e_a − e_b) rows; precomputed embeddings skip the encoder."""
        if embeddings is None:
            e_a = self.encoder.encode([p.text_a for p in pairs])
            e_b = self.encoder.encode([p.text_b for p in pairs])
        else:
            e_a, e_b = embeddings
        if e_a.shape[1] != self.encoder.dim:
            raise ConfigError(
                f"embedding width {e_a.shape[1]} != encoder dim {self.encoder.dim}"
            )
        return np.concatenate([e_a, e_b, e_a - e_b], axis=1).astype(np.float32)

    def _forward_np(self, feats: np.ndarray):
        torch = _require_torch()
        with torch.no_grad():
            logits, hidden = self.net.forward(torch.from_numpy(feats))
        return logits.numpy(), hidden.numpy()

    def predict(self, pairs: Sequence[ShiftPair]) -> np.ndarray:
        if not pairs:
            return np.zeros(0, dtype=np.int64)
        logits, _ = self._forward_np(self.features(pairs))
        return logits.argmax(axis=1)

    def shift_embedding(self, pairs: Sequence[ShiftPair],
                        embeddings: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
        if not pairs:
            return np.zeros((0, self.shift_embedding_dim), dtype=np.float32)
        _, hidden = self._forward_np(self.features(pairs, embeddings))
        return hidden.astype(np.float32)

    def save(self, directory: str | Path) -> None:
        torch = _require_torch()
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        torch.save(self.net.module.state_dict(), directory / "weights.pt")
        (directory / "config.json").write_text(json.dumps({
            "type": "siamese",
            "hidden_dims": list(self.hidden_dims),
            "encoder_id": self.encoder.encoder_id,
            "encoder_dim": self.encoder.dim,
            "model_id": self.model_id,
        }, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, directory: str | Path, encoder: SentenceEncoder) -> "SiameseShiftModel":
        torch = _require_torch()
        directory = Path(directory)
        cfg = json.loads((directory / "config.json").read_text(encoding="utf-8"))
        if cfg.get("type") != "siamese":
            raise ConfigError(f"{directory}: not a siamese shift checkpoint")
        if cfg["encoder_id"] != encoder.encoder_id:
            raise ConfigError(
                f"{directory}: checkpoint was trained over encoder {cfg['encoder_id']!r}, "
                f"got {encoder.encoder_id!r}"
            )
        model = cls(encoder, hidden_dims=tuple(cfg["hidden_dims"]))
        model.net.module.load_state_dict(torch.load(directory / "weights.pt", weights_only=True))
        model._refresh_id()
        if model.model_id != cfg["model_id"]:
            raise ConfigError(f"{directory}: weights do not match the stored model_id")
        return model


def train_siamese_shift(
    sentence_encoder: SentenceEncoder,
    pairs: Sequence[ShiftPair],
    schedule: ShiftSchedule = SIAMESE_SCHEDULE,
    *,
    hidden_dims: tuple[int, ...] = (512, 128),
) -> SiameseShiftModel:
    """Train the feed-forward shift head over a frozen sentence encoder.

    Cross-entropy over the two classes with Adam; the encoder is only ever
    called in inference mode. Per-batch losses land in ``model.training_log``.
    """
    torch = _require_torch()
    if not pairs:
        raise ConfigError("no training pairs")
    torch.manual_seed(schedule.seed)
    model = SiameseShiftModel(sentence_encoder, hidden_dims=hidden_dims)
    feats = torch.from_numpy(model.features(pairs))
    labels = torch.tensor([p.label for p in pairs], dtype=torch.long)
    weight = None
    if schedule.pos_weight is not None:
        weight = torch.tensor([1.0, schedule.pos_weight])
    loss_fn = torch.nn.CrossEntropyLoss(weight=weight)
    optimizer = torch.optim.Adam(model.net.module.parameters(), lr=schedule.lr)
    generator = torch.Generator().manual_seed(schedule.seed)
    log = []
    for epoch in range(schedule.epochs):
        order = torch.randperm(len(pairs), generator=generator)
        for start in range(0, len(pairs), schedule.batch_size):
            idx = order[start : start + schedule.batch_size]
            optimizer.zero_grad()
            logits, _ = model.net.forward(feats[idx])
            loss = loss_fn(logits, labels[idx])
            loss.backward()
            optimizer.step()
            log.append({"epoch": epoch, "loss": float(loss.detach())})
    model.net.module.eval()
    model._refresh_id()
    model.training_log = log
    return model


class _PairNet:
    def __init__(self, backbone, hidden_size: int):
        from torch import nn

        self.backbone = backbone
        self.out = nn.Linear(hidden_size, 2)
        self.module = nn.ModuleDict({"backbone": backbone, "out": self.out})

    def forward(self, batch):
        result = self.backbone(**batch)
        pooled = getattr(result, "pooler_output", None)
        if pooled is None:
            pooled = result.last_hidden_state[:, 0]
        return self.out(pooled), pooled


class PairShiftModel(ShiftModel):
    """Cross-encoder shift classifier: one transformer pass per sentence pair."""

    def __init__(self, model, tokenizer, *, max_len: int = 256, name: str = "pair"):
        self.tokenizer = tokenizer
        self.max_len = max_len
        self.name = name
        self.shift_embedding_dim = int(model.config.hidden_size)
        self.net = _PairNet(model, self.shift_embedding_dim)
        self._refresh_id()

    def _refresh_id(self) -> None:
        self.model_id = (
            f"pair-shift-{self.name}-L{self.max_len}"
            f"-{_fingerprint_module(self.net.module)[:12]}"
        )

    def _encode_batch(self, pairs: Sequence[ShiftPair]):
        a = [p.text_a for p in pairs]
        b = [p.text_b for p in pairs]
        full_lens = self.tokenizer(a, b, padding=False, truncation=False)["input_ids"]
        n_over = sum(1 for ids in full_lens if len(ids) > self.max_len)
        if n_over:
            logger.warning("%d of %d pairs exceed max_len=%d and were truncated",
                           n_over, len(pairs), self.max_len)
        return self.tokenizer(a, b, padding=True, truncation=True,
                              max_length=self.max_len, return_tensors="pt")

    def _forward_all(self, pairs: Sequence[ShiftPair], batch_size: int = 32):
        torch = _require_torch()
        self.net.module.eval()
        logits_out, hidden_out = [], []
        with torch.no_grad():
            for start in range(0, len(pairs), batch_size):
                chunk = pairs[start : start + batch_size]
                logits, hidden = self.net.forward(self._encode_batch(chunk))
                logits_out.append(logits.numpy())
                hidden_out.append(hidden.numpy())
        return np.concatenate(logits_out), np.concatenate(hidden_out)

    def predict(self, pairs: Sequence[ShiftPair]) -> np.ndarray:
        if not pairs:
            return np.zeros(0, dtype=np.int64)
        logits, _ = self._forward_all(pairs)
        return logits.argmax(axis=1)

    def shift_embedding(self, pairs: Sequence[ShiftPair]) -> np.ndarray:
        if not pairs:
            return np.zeros((0, self.shift_embedding_dim), dtype=np.float32)
        _, hidden = self._forward_all(pairs)
        return hidden.astype(np.float32)

    def save(self, directory: str | Path) -> None:
        torch = _require_torch()
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        torch.save(self.net.module.state_dict(), directory / "weights.pt")
        (directory / "config.json").write_text(json.dumps({
            "type": "pair",
            "name": self.name,
            "max_len": self.max_len,
            "hf_config": self.net.backbone.config.to_dict(),
            "model_id": self.model_id,
        }, indent=2) + "\n", encoding="utf-8")
        self.tokenizer.save_pretrained(str(directory / "tokenizer"))

    @classmethod
    def load(cls, directory: str | Path) -> "PairShiftModel":
        torch = _require_torch()
        try:
            from transformers import AutoConfig, AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ConfigError("transformers is required for pair shift models") from exc
        directory = Path(directory)
        cfg = json.loads((directory / "config.json").read_text(encoding="utf-8"))
        if cfg.get("type") != "pair":
            raise ConfigError(f"{directory}: not a pair shift checkpoint")
        hf_config = AutoConfig.for_model(**cfg["hf_config"])
        backbone = AutoModel.from_config(hf_config)
        tokenizer = AutoTokenizer.from_pretrained(str(directory / "tokenizer"))
        model = cls(backbone, tokenizer, max_len=int(cfg["max_len"]), name=cfg["name"])
        model.net.module.load_state_dict(torch.load(directory / "weights.pt", weights_only=True))
        model._refresh_id()
        if model.model_id != cfg["model_id"]:
            raise ConfigError(f"{directory}: weights do not match the stored model_id")
        return model


def train_pair_shift(
    pair_encoder,
    pairs: Sequence[ShiftPair],
    schedule: ShiftSchedule = PAIR_SCHEDULE,
) -> PairShiftModel:
    """Fine-tune a transformer end to end as a pair classifier.

    ``pair_encoder`` is a TransformerSentenceEncoder (or anything with
    ``model``/``tokenizer``/``name``); its weights are copied, not mutated.
    Per-batch losses land in ``model.training_log``.
    """
    torch = _require_torch()
    if not pairs:
        raise ConfigError("no training pairs")
    torch.manual_seed(schedule.seed)
    model = PairShiftModel(
        copy.deepcopy(pair_encoder.model),
        pair_encoder.tokenizer,
        max_len=schedule.max_len,
        name=getattr(pair_encoder, "name", "pair"),
    )
    labels_all = torch.tensor([p.label for p in pairs], dtype=torch.long)
    weight = None
    if schedule.pos_weight is not None:
        weight = torch.tensor([1.0, schedule.pos_weight])
    loss_fn = torch.nn.CrossEntropyLoss(weight=weight)
    optimizer = torch.optim.Adam(model.net.module.parameters(), lr=schedule.lr)
    generator = torch.Generator().manual_seed(schedule.seed)
    log = []
    model.net.module.train()
    for epoch in range(schedule.epochs):
        order = torch.randperm(len(pairs), generator=generator)
        for start in range(0, len(pairs), schedule.batch_size):
            idx = order[start : start + schedule.batch_size].tolist()
            batch = model._encode_batch([pairs[k] for k in idx])
            optimizer.zero_grad()
            logits, _ = model.net.forward(batch)
            loss = loss_fn(logits, labels_all[idx])
            loss.backward()
            optimizer.step()
            log.append({"epoch": epoch, "loss": float(loss.detach())})
    model.net.module.eval()
    model._refresh_id()
    model.training_log = log
    return model


def eval_shift(model: ShiftModel, pairs: Sequence[ShiftPair]) -> MetricsReport:
    """Macro F1 over {same, shift} on labeled pairs."""
    if not pairs:
        raise ConfigError("no evaluation pairs")
    preds = model.predict(pairs)
    return macro_f1(
        [SHIFT_LABELS[int(p)] for p in preds],
        [SHIFT_LABELS[p.label] for p in pairs],
        SHIFT_LABELS,
        metadata={"model_id": model.model_id, "n_pairs": len(pairs)},
    )
