"""rrseg: rhetorical role segmentation of legal judgments.

Sentence-level sequence labeling over court decisions: corpus tooling
(ingestion, annotation import, adjudication, label reduction, splits),
agreement and span metrics, sentence encoders with a binary embedding
archive, label-shift auxiliary models, BiLSTM-CRF sequence labelers with a
multitask variant, self-training distillation, and domain-transfer /
judgment-prediction experiment harnesses.
"""
from .labels import FINE_LABELS, MAIN_LABELS, MainLabel, RhetoricalRole

__version__ = "0.1.0"

__all__ = [
    "FINE_LABELS",
    "MAIN_LABELS",
    "MainLabel",
    "RhetoricalRole",
    "__version__",
]
