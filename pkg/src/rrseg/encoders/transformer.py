"""Transformer sentence encoders and masked-language-model fine-tuning.

Requires the optional ``transformers`` dependency (and ``sentence-transformers``
for the SBERT adapter). Sentence vectors default to the pooled
classification-token output with a 256-token truncation limit; mean pooling
over non-padding positions is available via ``pooling="mean"``.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from hashlib import blake2b
from typing import Iterable, Literal, Sequence

import numpy as np

from ..corpus.records import CorpusSplit, DocumentRecord
from ..errors import ConfigError, LeakageError
from ..utils import stable_json_hash

Pooling = Literal["cls", "mean"]


def _require_torch():
    try:
        import torch  # noqa: F401

        return torch
    except ImportError as exc:
        raise ConfigError("torch is required for transformer encoders") from exc


def weights_fingerprint(model) -> str:
    """Stable hash of every parameter and buffer of a torch module."""
    h = blake2b(digest_size=16)
    state = model.state_dict()
    for name in sorted(state):
        t = state[name].detach().cpu().contiguous()
        h.update(name.encode("utf-8"))
        h.update(str(tuple(t.shape)).encode("utf-8"))
        h.update(t.numpy().tobytes())
    return h.hexdigest()


class TransformerSentenceEncoder:
    """SentenceEncoder over a HuggingFace masked-LM backbone."""

    def __init__(self, model, tokenizer, *, pooling: Pooling = "cls", max_len: int = 256,
                 name: str | None = None, device: str = "cpu"):
        if pooling not in ("cls", "mean"):
            raise ConfigError(f"unknown pooling {pooling!r}")
        torch = _require_torch()
        self.model = model.to(device).eval()
        self.tokenizer = tokenizer
        self.pooling: Pooling = pooling
        self.max_len = max_len
        self.device = device
        self.name = name or getattr(model.config, "model_type", "transformer")
        self.dim = int(model.config.hidden_size)
        self.encoder_id = (
            f"{self.name}-{pooling}-L{max_len}-{weights_fingerprint(model)[:12]}"
        )
        self._torch = torch

    @classmethod
    def from_pretrained(cls, path_or_name: str, *, pooling: Pooling = "cls",
                        max_len: int = 256, device: str = "cpu") -> "TransformerSentenceEncoder":
        try:
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ConfigError("transformers is required for pretrained encoders") from exc
        model = AutoModel.from_pretrained(path_or_name)
        tokenizer = AutoTokenizer.from_pretrained(path_or_name)
        return cls(model, tokenizer, pooling=pooling, max_len=max_len,
                   name=path_or_name.replace("/", "_"), device=device)

    def _batch(self, sentences: Sequence[str]):
        return self.tokenizer(
            list(sentences), padding=True, truncation=True, max_length=self.max_len,
            return_tensors="pt",
        ).to(self.device)

    def encode(self, sentences: Sequence[str], batch_size: int = 32) -> np.ndarray:
        torch = self._torch
        out = np.zeros((len(sentences), self.dim), dtype=np.float32)
        with torch.no_grad():
            for start in range(0, len(sentences), batch_size):
                chunk = sentences[start : start + batch_size]
                enc = self._batch(chunk)
                result = self.model(**enc)
                if self.pooling == "cls":
                    pooled = getattr(result, "pooler_output", None)
                    if pooled is None:
                        pooled = result.last_hidden_state[:, 0]
                else:
                    mask = enc["attention_mask"].unsqueeze(-1).to(result.last_hidden_state.dtype)
                    summed = (result.last_hidden_state * mask).sum(dim=1)
                    pooled = summed / mask.sum(dim=1).clamp(min=1.0)
                out[start : start + len(chunk)] = pooled.cpu().numpy()
        return out


@dataclass(frozen=True)
class MlmSchedule:
    """Masked-LM fine-tuning hyperparameters."""

    epochs: int = 1
    batch_size: int = 16
    lr: float = 2e-5
    mask_prob: float = 0.15
    max_len: int = 256
    seed: int = 0
    head_seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 0 or self.batch_size <= 0 or self.lr <= 0:
            raise ConfigError(f"invalid MLM schedule: {self}")
        if not 0 < self.mask_prob < 1:
            raise ConfigError(f"mask_prob must lie in (0, 1), got {self.mask_prob}")


def _mlm_model_for(encoder: TransformerSentenceEncoder, head_seed: int):
    """Fresh masked-LM wrapper carrying the encoder's weights, seeded head."""
    torch = _require_torch()
    try:
        from transformers import AutoModelForMaskedLM
    except ImportError as exc:
        raise ConfigError("transformers is required for MLM fine-tuning") from exc
    torch.manual_seed(head_seed)
    mlm = AutoModelForMaskedLM.from_config(copy.deepcopy(encoder.model.config))
    mlm.base_model.load_state_dict(encoder.model.state_dict(), strict=False)
    return mlm


def _mask_tokens(input_ids, special_mask, tokenizer, mask_prob: float, generator):
    """BERT-style corruption: of the chosen positions, 80% MASK / 10% random / 10% kept."""
    torch = _require_torch()
    labels = input_ids.clone()
    prob = torch.full(input_ids.shape, mask_prob)
    prob.masked_fill_(special_mask, 0.0)
    chosen = torch.bernoulli(prob, generator=generator).bool()
    labels[~chosen] = -100
    replace = torch.bernoulli(torch.full(input_ids.shape, 0.8), generator=generator).bool() & chosen
    input_ids[replace] = tokenizer.mask_token_id
    random_ids = torch.randint(len(tokenizer), input_ids.shape, generator=generator)
    randomize = (
        torch.bernoulli(torch.full(input_ids.shape, 0.5), generator=generator).bool()
        & chosen & ~replace
    )
    input_ids[randomize] = random_ids[randomize]
    return input_ids, labels


def _mlm_batches(sentences: Sequence[str], tokenizer, schedule: MlmSchedule, generator):
    torch = _require_torch()
    order = torch.randperm(len(sentences), generator=generator).tolist()
    for start in range(0, len(order), schedule.batch_size):
        chunk = [sentences[i] for i in order[start : start + schedule.batch_size]]
        enc = tokenizer(chunk, padding=True, truncation=True,
                        max_length=schedule.max_len, return_tensors="pt")
        special = torch.tensor(
            [tokenizer.get_special_tokens_mask(ids, already_has_special_tokens=True)
             for ids in enc["input_ids"].tolist()],
            dtype=torch.bool,
        )
        special |= enc["attention_mask"] == 0
        input_ids, labels = _mask_tokens(
            enc["input_ids"].clone(), special, tokenizer, schedule.mask_prob, generator
        )
        yield {"input_ids": input_ids, "attention_mask": enc["attention_mask"],
               "labels": labels}


def finetune_mlm(
    base_encoder: TransformerSentenceEncoder,
    train_docs: Sequence[DocumentRecord],
    schedule: MlmSchedule,
    *,
    split: CorpusSplit | None = None,
) -> TransformerSentenceEncoder:
    """Adapt the encoder to the training documents by masked-token prediction.

    When ``split`` is given, every input document must belong to its train
    partition; anything else raises LeakageError. The returned encoder has
    fresh weights and a new encoder_id; its trained MLM head is kept so
    ``masked_lm_loss`` can score it.
    """
    torch = _require_torch()
    if split is not None:
        train_ids = set(split.train)
        held = set(split.val) | set(split.test)
        for doc in train_docs:
            if doc.doc_id in held:
                raise LeakageError(
                    f"doc {doc.doc_id!r} belongs to a held-out split; "
                    "MLM fine-tuning sees the train split only"
                )
            if doc.doc_id not in train_ids:
                raise LeakageError(f"doc {doc.doc_id!r} is not in the train split")
    sentences = [s.text for doc in train_docs for s in doc.sentences]
    if not sentences:
        raise ConfigError("no sentences to fine-tune on")
    mlm = _mlm_model_for(base_encoder, schedule.head_seed)
    if schedule.epochs > 0:
        mlm.train()
        optimizer = torch.optim.AdamW(mlm.parameters(), lr=schedule.lr)
        generator = torch.Generator().manual_seed(schedule.seed)
        for _ in range(schedule.epochs):
            for batch in _mlm_batches(sentences, base_encoder.tokenizer, schedule, generator):
                optimizer.zero_grad()
                loss = mlm(**batch).loss
                loss.backward()
                optimizer.step()
        mlm.eval()
    new_model = copy.deepcopy(base_encoder.model)
    new_model.load_state_dict(mlm.base_model.state_dict(), strict=False)
    tuned = TransformerSentenceEncoder(
        new_model,
        base_encoder.tokenizer,
        pooling=base_encoder.pooling,
        max_len=base_encoder.max_len,
        name=f"{base_encoder.name}+mlm{stable_json_hash(schedule.__dict__)[:8]}",
        device=base_encoder.device,
    )
    tuned.mlm_state = {k: v.detach().clone() for k, v in mlm.state_dict().items()}
    return tuned


def masked_lm_loss(
    encoder: TransformerSentenceEncoder,
    sentences: Sequence[str],
    *,
    mask_prob: float = 0.15,
    seed: int = 0,
    head_seed: int = 0,
    batch_size: int = 16,
    max_len: int = 256,
) -> float:
    """Mean masked-token cross-entropy of the encoder on ``sentences``.

    Encoders returned by finetune_mlm are scored with their trained MLM head;
    a base encoder gets a deterministically seeded untrained head, which makes
    before/after comparisons under the same ``head_seed`` meaningful.
    """
    torch = _require_torch()
    mlm = _mlm_model_for(encoder, head_seed)
    state = getattr(encoder, "mlm_state", None)
    if state is not None:
        mlm.load_state_dict(state)
    mlm.eval()
    schedule = MlmSchedule(epochs=0, batch_size=batch_size, mask_prob=mask_prob,
                           max_len=max_len, seed=seed)
    generator = torch.Generator().manual_seed(seed)
    total, count = 0.0, 0
    with torch.no_grad():
        for batch in _mlm_batches(list(sentences), encoder.tokenizer, schedule, generator):
            n = int((batch["labels"] != -100).sum())
            if n == 0:
                continue
            loss = mlm(**batch).loss
            total += float(loss) * n
            count += n
    if count == 0:
        raise ConfigError("masking produced no predicted positions; increase mask_prob")
    return total / count


class SbertSentenceEncoder:
    """Adapter for sentence-transformers models behind the encoder contract."""

    def __init__(self, model, *, name: str):
        self.model = model
        self.name = name
        self.dim = int(model.get_sentence_embedding_dimension())
        self.encoder_id = f"sbert-{name}-d{self.dim}"

    @classmethod
    def load(cls, model_name: str, *, device: str = "cpu") -> "SbertSentenceEncoder":
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise ConfigError("sentence-transformers is required for SBERT encoders") from exc
        return cls(SentenceTransformer(model_name, device=device),
                   name=model_name.replace("/", "_"))

    def encode(self, sentences: Sequence[str], batch_size: int = 32) -> np.ndarray:
        vectors = self.model.encode(
            list(sentences), batch_size=batch_size, convert_to_numpy=True,
            show_progress_bar=False,
        )
        return np.asarray(vectors, dtype=np.float32)
