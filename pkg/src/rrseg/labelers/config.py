"""Configuration for sequence labelers, with the published defaults baked in.

Hidden sizes follow the input-dim/2 pattern (768→384, 2304→1152). The
CRF/BiLSTM family defaults to lr 0.01; the shift-aware variants (lsp_bilstm_crf,
mtl) default to lr 0.005. Batches are counted in documents.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

from ..errors import ConfigError
from ..labels import MAIN_LABELS

Variant = Literal["crf", "bilstm", "bilstm_crf", "lsp_bilstm_crf", "mtl"]

VARIANTS: tuple[str, ...] = ("crf", "bilstm", "bilstm_crf", "lsp_bilstm_crf", "mtl")
_SHIFT_AWARE = ("lsp_bilstm_crf", "mtl")


@dataclass(frozen=True)
class SequenceModelConfig:
    """Everything needed to build and train one sequence labeler.

    ``input_dim`` is the main (RR) feature width; ``shift_input_dim`` is the
    composed shift-aware width and applies to the mtl variant only.
    ``lambda_shift`` weighs the shift loss in the mtl objective and must be
    absent elsewhere. ``loss_normalization`` picks whether a document's
    sequence NLL is divided by its sentence count ("token_mean", default,
    keeps the two mtl loss terms on comparable scales) or left as a sum
    ("doc_sum").
    """

    variant: Variant
    input_dim: int
    shift_input_dim: int | None = None
    hidden_dim: int | None = None
    shift_hidden_dim: int | None = None
    lr: float | None = None
    batch_docs: int = 40
    epochs: int = 300
    lambda_shift: float | None = None
    seed: int = 0
    loss_normalization: Literal["token_mean", "doc_sum"] = "token_mean"
    boundary_shift: Literal["zeros", "learned"] = "zeros"
    shift_embedding_dim: int | None = None
    label_set: tuple[str, ...] = MAIN_LABELS

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.input_dim <= 0:
            raise ConfigError(f"input_dim must be positive, got {self.input_dim}")
        if self.variant == "mtl":
            if self.shift_input_dim is None or self.shift_input_dim <= 0:
                raise ConfigError("mtl requires a positive shift_input_dim (E1)")
            if self.lambda_shift is None:
                raise ConfigError("mtl requires lambda_shift")
            if not 0.0 <= self.lambda_shift <= 1.0:
                raise ConfigError(f"lambda_shift must lie in [0, 1], got {self.lambda_shift}")
        else:
            if self.lambda_shift is not None:
                raise ConfigError(f"lambda_shift is mtl-only, not valid for {self.variant!r}")
            if self.shift_input_dim is not None:
                raise ConfigError(f"shift_input_dim is mtl-only, not valid for {self.variant!r}")
        if self.boundary_shift == "learned":
            if self.variant not in _SHIFT_AWARE:
                raise ConfigError("learned boundary vectors apply to shift-aware variants only")
            if self.shift_embedding_dim is None or self.shift_embedding_dim <= 0:
                raise ConfigError(
                    "boundary_shift='learned' requires shift_embedding_dim "
                    "(the width of one shift vector)"
                )
        if self.batch_docs <= 0 or self.epochs < 0:
            raise ConfigError(f"batch_docs must be positive and epochs non-negative: {self}")
        if self.lr is not None and self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if len(self.label_set) < 2 or len(set(self.label_set)) != len(self.label_set):
            raise ConfigError("label_set needs at least 2 distinct labels")

    @property
    def num_labels(self) -> int:
        return len(self.label_set)

    @property
    def resolved_lr(self) -> float:
        if self.lr is not None:
            return self.lr
        return 0.005 if self.variant in _SHIFT_AWARE else 0.01

    @property
    def resolved_hidden(self) -> int:
        return self.hidden_dim if self.hidden_dim is not None else max(self.input_dim // 2, 1)

    @property
    def resolved_shift_hidden(self) -> int:
        if self.variant != "mtl":
            raise ConfigError("shift hidden size applies to the mtl variant only")
        if self.shift_hidden_dim is not None:
            return self.shift_hidden_dim
        return max(self.shift_input_dim // 2, 1)

    def with_lambda(self, lam: float) -> "SequenceModelConfig":
        return replace(self, lambda_shift=lam)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "input_dim": self.input_dim,
            "shift_input_dim": self.shift_input_dim,
            "hidden_dim": self.hidden_dim,
            "shift_hidden_dim": self.shift_hidden_dim,
            "lr": self.lr,
            "batch_docs": self.batch_docs,
            "epochs": self.epochs,
            "lambda_shift": self.lambda_shift,
            "seed": self.seed,
            "loss_normalization": self.loss_normalization,
            "boundary_shift": self.boundary_shift,
            "shift_embedding_dim": self.shift_embedding_dim,
            "label_set": list(self.label_set),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SequenceModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(d)
        if "label_set" in kwargs:
            kwargs["label_set"] = tuple(kwargs["label_set"])
        return cls(**kwargs)
