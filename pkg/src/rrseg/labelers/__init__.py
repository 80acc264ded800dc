"""Sequence labelers: CRF core, BiLSTM variants, shift-aware models, training."""
from .checkpoint import LoadedCheckpoint, load_checkpoint, save_checkpoint, state_fingerprint
from .compose import ComposedShiftSource, compose_lsp_input
from .config import VARIANTS, SequenceModelConfig
from .crf import LinearChainCRF, crf_decode, crf_nll
from .models import (
    BiLSTMCRFTagger,
    BiLSTMTagger,
    DocBatch,
    EmissionCRFTagger,
    MultitaskTagger,
    SequenceTagger,
    build_tagger,
    make_batch,
    shift_gold,
)
from .sentence_cls import SentenceClassifier, train_sentence_classifier
from .training import (
    ArchiveSource,
    FeatureSource,
    FeaturizerSource,
    LambdaSweep,
    MappingSource,
    TrainResult,
    as_feature_source,
    evaluate_labeler,
    predict_from_checkpoint,
    predict_labels,
    read_predictions_jsonl,
    sweep_lambda,
    train_lsp_bilstm_crf,
    train_mtl,
    train_sequence_labeler,
    write_predictions_jsonl,
)

__all__ = [
    "VARIANTS",
    "SequenceModelConfig",
    "LinearChainCRF",
    "crf_nll",
    "crf_decode",
    "compose_lsp_input",
    "ComposedShiftSource",
    "DocBatch",
    "make_batch",
    "shift_gold",
    "SequenceTagger",
    "BiLSTMTagger",
    "BiLSTMCRFTagger",
    "EmissionCRFTagger",
    "MultitaskTagger",
    "build_tagger",
    "LoadedCheckpoint",
    "save_checkpoint",
    "load_checkpoint",
    "state_fingerprint",
    "FeatureSource",
    "ArchiveSource",
    "FeaturizerSource",
    "MappingSource",
    "as_feature_source",
    "TrainResult",
    "train_sequence_labeler",
    "train_lsp_bilstm_crf",
    "train_mtl",
    "sweep_lambda",
    "LambdaSweep",
    "predict_labels",
    "predict_from_checkpoint",
    "evaluate_labeler",
    "write_predictions_jsonl",
    "read_predictions_jsonl",
    "SentenceClassifier",
    "train_sentence_classifier",
]
