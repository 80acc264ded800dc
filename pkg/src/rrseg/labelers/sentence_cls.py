"""Per-sentence transformer classifier baselines.

Each sentence is classified independently with the encoder fine-tuned end to
end. With neighbor_window=1 the input is the left neighbor, the sentence, and
the right neighbor joined by the tokenizer's separator; a missing neighbor at
a document boundary becomes an empty text.
"""
from __future__ import annotations

import copy
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn

from ..corpus.records import CorpusSplit, DocumentRecord, select_docs
from ..errors import ConfigError, DataError
from ..labels import MAIN_LABELS
from ..metrics import MetricsReport, macro_f1

__all__ = [
    "ClsSchedule",
    "SentenceClassifier",
    "train_sentence_classifier",
    "eval_sentence_classifier",
]


@dataclass(frozen=True)
class ClsSchedule:
    epochs: int = 5
    batch_size: int = 32
    lr: float = 2e-5
    max_len: int = 256
    seed: int = 0


def _windowed_text(doc: DocumentRecord, i: int, window: int, sep: str) -> str:
    if window == 0:
        return doc.sentences[i].text
    left = doc.sentences[i - 1].text if i > 0 else ""
    right = doc.sentences[i + 1].text if i + 1 < len(doc.sentences) else ""
    return f"{left} {sep} {doc.sentences[i].text} {sep} {right}"


class _ClsNet(nn.Module):
    def __init__(self, backbone, hidden: int, num_labels: int):
        super().__init__()
        self.backbone = backbone
        self.head = nn.Linear(hidden, num_labels)

    def forward(self, **enc):
        out = self.backbone(**enc)
        pooled = getattr(out, "pooler_output", None)
        if pooled is None:
            pooled = out.last_hidden_state[:, 0]
        return self.head(pooled)


class SentenceClassifier:
    """A fine-tuned per-sentence labeler over windowed text inputs."""

    def __init__(
        self,
        model: nn.Module,
        tokenizer,
        *,
        label_set: tuple[str, ...] = MAIN_LABELS,
        neighbor_window: int = 0,
        max_len: int = 256,
        name: str = "sentence-cls",
    ):
        if neighbor_window not in (0, 1):
            raise ConfigError(f"neighbor_window must be 0 or 1, got {neighbor_window}")
        self.net = model
        self.tokenizer = tokenizer
        self.label_set = tuple(label_set)
        self.neighbor_window = neighbor_window
        self.max_len = max_len
        self.name = name
        self.sep = tokenizer.sep_token or "[SEP]"

    @property
    def model_id(self) -> str:
        return f"{self.name}-w{self.neighbor_window}"

    def _logits(self, texts: Sequence[str], batch_size: int = 32) -> torch.Tensor:
        outs = []
        self.net.eval()
        with torch.no_grad():
            for i in range(0, len(texts), batch_size):
                enc = self.tokenizer(
                    list(texts[i : i + batch_size]),
                    padding=True,
                    truncation=True,
                    max_length=self.max_len,
                    return_tensors="pt",
                )
                outs.append(self.net(**enc))
        return torch.cat(outs) if outs else torch.zeros(0, len(self.label_set))

    def classify_doc(self, doc: DocumentRecord) -> list[str]:
        texts = [
            _windowed_text(doc, i, self.neighbor_window, self.sep)
            for i in range(len(doc.sentences))
        ]
        logits = self._logits(texts)
        picks = np.argmax(logits.numpy().astype(np.float64), axis=1)
        return [self.label_set[int(p)] for p in picks]

    def save(self, directory: str | Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        torch.save(self.net.state_dict(), directory / "weights.pt")
        cfg = {
            "format": "rrseg-sentence-cls-v1",
            "label_set": list(self.label_set),
            "neighbor_window": self.neighbor_window,
            "max_len": self.max_len,
            "name": self.name,
            "hf_config": self.net.backbone.config.to_dict(),
        }
        (directory / "config.json").write_text(json.dumps(cfg, indent=2) + "\n")
        self.tokenizer.save_pretrained(str(directory / "tokenizer"))
        return directory

    @classmethod
    def load(cls, directory: str | Path) -> "SentenceClassifier":
        from transformers import AutoConfig, AutoModel, AutoTokenizer

        directory = Path(directory)
        cfg = json.loads((directory / "config.json").read_text())
        if cfg.get("format") != "rrseg-sentence-cls-v1":
            raise DataError(f"{directory}: not a sentence classifier checkpoint")
        hf = AutoConfig.for_model(cfg["hf_config"]["model_type"], **cfg["hf_config"])
        backbone = AutoModel.from_config(hf)
        net = _ClsNet(backbone, hf.hidden_size, len(cfg["label_set"]))
        net.load_state_dict(
            torch.load(directory / "weights.pt", map_location="cpu", weights_only=True)
        )
        net.eval()
        tokenizer = AutoTokenizer.from_pretrained(str(directory / "tokenizer"))
        return cls(
            net,
            tokenizer,
            label_set=tuple(cfg["label_set"]),
            neighbor_window=int(cfg["neighbor_window"]),
            max_len=int(cfg["max_len"]),
            name=cfg["name"],
        )


def train_sentence_classifier(
    encoder,
    docs: Sequence[DocumentRecord],
    split: CorpusSplit,
    *,
    neighbor_window: int = 0,
    schedule: ClsSchedule = ClsSchedule(),
    label_set: tuple[str, ...] = MAIN_LABELS,
) -> tuple[SentenceClassifier, list[dict]]:
    """Fine-tune a transformer encoder as a per-sentence classifier.

    ``encoder`` needs ``.model`` (HF backbone) and ``.tokenizer``. Best epoch
    by validation macro F1 is kept when a validation split is present.
    """
    if neighbor_window not in (0, 1):
        raise ConfigError(f"neighbor_window must be 0 or 1, got {neighbor_window}")
    train_docs = select_docs(list(docs), split.train)
    if not train_docs:
        raise DataError("empty training split")
    val_docs = select_docs(list(docs), split.val)

    torch.manual_seed(schedule.seed)
    backbone = copy.deepcopy(encoder.model)
    hidden = backbone.config.hidden_size
    net = _ClsNet(backbone, hidden, len(label_set))
    clf = SentenceClassifier(
        net,
        encoder.tokenizer,
        label_set=label_set,
        neighbor_window=neighbor_window,
        max_len=schedule.max_len,
        name=getattr(encoder, "name", type(encoder).__name__),
    )

    index = {c: i for i, c in enumerate(label_set)}
    items: list[tuple[str, int]] = []
    for doc in train_docs:
        for i, m in enumerate(doc.gold_main_labels()):
            items.append((_windowed_text(doc, i, neighbor_window, clf.sep), index[m.value]))

    opt = torch.optim.AdamW(net.parameters(), lr=schedule.lr)
    rng = random.Random(schedule.seed)
    log: list[dict] = []
    best_f1 = -1.0
    best_state = copy.deepcopy(net.state_dict())

    def val_f1() -> float | None:
        if not val_docs:
            return None
        hyp: list[str] = []
        ref: list[str] = []
        for doc in val_docs:
            hyp.extend(clf.classify_doc(doc))
            ref.extend(m.value for m in doc.gold_main_labels())
        return macro_f1(hyp, ref, label_set).macro_f1

    order = list(range(len(items)))
    for epoch in range(schedule.epochs):
        rng.shuffle(order)
        net.train()
        total = 0.0
        for start in range(0, len(order), schedule.batch_size):
            chunk = order[start : start + schedule.batch_size]
            texts = [items[i][0] for i in chunk]
            ys = torch.tensor([items[i][1] for i in chunk], dtype=torch.int64)
            enc = clf.tokenizer(
                texts, padding=True, truncation=True,
                max_length=schedule.max_len, return_tensors="pt",
            )
            logits = net(**enc)
            loss = nn.functional.cross_entropy(logits, ys)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(chunk)
        f1 = val_f1()
        log.append({"epoch": epoch, "train_loss": total / len(items), "val_macro_f1": f1})
        if f1 is None or f1 > best_f1:
            best_f1 = f1 if f1 is not None else best_f1
            best_state = copy.deepcopy(net.state_dict())

    net.load_state_dict(best_state)
    net.eval()
    return clf, log


def eval_sentence_classifier(
    clf: SentenceClassifier, docs: Sequence[DocumentRecord]
) -> MetricsReport:
    hyp: list[str] = []
    ref: list[str] = []
    for doc in docs:
        hyp.extend(clf.classify_doc(doc))
        ref.extend(m.value for m in doc.gold_main_labels())
    return macro_f1(
        hyp, ref, clf.label_set,
        metadata={"model_id": clf.model_id, "n_docs": len(docs)},
    )
