"""Shared fixtures: synthetic corpora, feature sources, a tiny local BERT."""
import os

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")
os.environ.setdefault("TOKENIZERS_PARALLELISM", "false")

import pytest

from rrseg.corpus.records import DocumentRecord, SentenceRecord
from rrseg.corpus.splitting import split_corpus
from rrseg.labels import parse_role, reduce_role


def make_doc(doc_id: str, codes: list[str], *, domain: str = "IT",
             text_prefix: str = "Sentence") -> DocumentRecord:
    """Document with gold fine roles (and their main reductions) from codes."""
    sentences = []
    for i, code in enumerate(codes):
        role = parse_role(code)
        sentences.append(SentenceRecord(
            index=i,
            text=f"{text_prefix} {doc_id}-{i} about topic {i % 5}.",
            gold=role,
            gold_main=reduce_role(role),
        ))
    return DocumentRecord(doc_id=doc_id, domain=domain, sentences=tuple(sentences))


@pytest.fixture(scope="session")
def block_corpus():
    from rrseg.synthetic import generate_block_corpus

    return generate_block_corpus(24, seed=7)


@pytest.fixture(scope="session")
def block_split(block_corpus):
    return split_corpus(block_corpus, seed=3)


@pytest.fixture(scope="session")
def hash_source():
    from rrseg.encoders.base import SentenceDocumentAdapter
    from rrseg.encoders.hashing import HashingSentenceEncoder
    from rrseg.labelers.training import FeaturizerSource

    return FeaturizerSource(SentenceDocumentAdapter(HashingSentenceEncoder(dim=32)))


@pytest.fixture(scope="session")
def tiny_bert_dir(tmp_path_factory):
    """A randomly initialized 2-layer BERT checkpoint saved to disk."""
    transformers = pytest.importorskip("transformers")
    import torch

    tokens = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + [
        "the", "court", "appellant", "filed", "suit", "act", "section",
        "held", "appeal", "allowed", "dismissed", "facts", "argued", "law",
        "order", "judgment", "s", "no", "of", "in", "is", "a", ".", ",",
    ]
    cfg = transformers.BertConfig(
        vocab_size=len(tokens),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    torch.manual_seed(0)
    model = transformers.BertModel(cfg)
    tok = transformers.BertTokenizerFast(
        vocab={t: i for i, t in enumerate(tokens)}, do_lower_case=True
    )
    d = tmp_path_factory.mktemp("tiny_bert")
    model.save_pretrained(d)
    tok.save_pretrained(d)
    return d
