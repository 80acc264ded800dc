"""Experiment harnesses: domain transfer and judgment prediction."""
from .judgment import (
    ExternalProcessClassifier,
    JudgmentEvalResult,
    JudgmentInput,
    RRExtraction,
    extract_rr_for_judgment,
    judgment_eval,
    last_k_tokens,
)
from .transfer import TransferRun, run_transfer

__all__ = [
    "TransferRun",
    "run_transfer",
    "JudgmentInput",
    "RRExtraction",
    "extract_rr_for_judgment",
    "last_k_tokens",
    "ExternalProcessClassifier",
    "JudgmentEvalResult",
    "judgment_eval",
]
