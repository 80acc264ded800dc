"""Sentence encoders and the on-disk embedding archive."""
from .archive import EmbeddingArchive, EncodeStats
from .base import DocumentEncoder, SentenceDocumentAdapter, SentenceEncoder, encode_corpus
from .handcrafted import FEATURE_INDEX, FEATURE_NAMES, HandcraftedFeaturizer
from .hashing import HashingSentenceEncoder
from .static_vectors import StaticVectorEncoder

__all__ = [
    "DocumentEncoder",
    "EmbeddingArchive",
    "EncodeStats",
    "FEATURE_INDEX",
    "FEATURE_NAMES",
    "HandcraftedFeaturizer",
    "HashingSentenceEncoder",
    "SentenceDocumentAdapter",
    "SentenceEncoder",
    "StaticVectorEncoder",
    "encode_corpus",
]
