"""Corpus records, ingestion, annotation import, adjudication, splits, stats."""
from .adjudication import adjudicate, majority_primary, reduce_corpus, reduce_labels
from .io import (
    import_webanno,
    load_label_mapping,
    read_corpus_jsonl,
    read_mapped_corpus_jsonl,
    write_corpus_jsonl,
)
from .preprocess import (
    NltkSentenceSplitter,
    PreprocessRule,
    RegexSentenceSplitter,
    apply_rules,
    default_rules,
    ingest_raw,
    load_rules,
)
from .records import (
    AnnotationCell,
    CorpusSplit,
    DocumentRecord,
    SentenceRecord,
    select_docs,
)
from .splitting import split_corpus
from .stats import ShiftStatistic, label_distribution, shift_statistic

__all__ = [
    "AnnotationCell",
    "CorpusSplit",
    "DocumentRecord",
    "NltkSentenceSplitter",
    "PreprocessRule",
    "RegexSentenceSplitter",
    "SentenceRecord",
    "ShiftStatistic",
    "adjudicate",
    "apply_rules",
    "default_rules",
    "import_webanno",
    "ingest_raw",
    "label_distribution",
    "load_label_mapping",
    "load_rules",
    "majority_primary",
    "read_corpus_jsonl",
    "read_mapped_corpus_jsonl",
    "reduce_corpus",
    "reduce_labels",
    "select_docs",
    "shift_statistic",
    "split_corpus",
    "write_corpus_jsonl",
]
