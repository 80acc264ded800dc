"""Deterministic document-level corpus splitting."""
from __future__ import annotations

import random
from typing import Iterable, Sequence

from ..errors import DataError
from .records import CorpusSplit, DocumentRecord


def _round_half_up(x: float) -> int:
    return int(x + 0.5)


def split_corpus(
    docs: Sequence[DocumentRecord],
    *,
    seed: int,
    val_ratio: float = 1 / 6,
    test_ratio: float = 1 / 6,
    by_domain: bool = False,
) -> CorpusSplit:
    """Shuffle documents with ``seed`` and cut train/val/test at the document level.

    Val and test sizes are round-half-up of ratio * n; the remainder is train.
    Document ids are sorted before shuffling so the split depends only on the
    id set and the seed, not on input order. With ``by_domain`` the split is
    performed independently per domain and the parts unioned, keeping each
    domain's ratios close to the requested ones.
    """
    if not 0 <= val_ratio < 1 or not 0 <= test_ratio < 1:
        raise DataError("split ratios must lie in [0, 1)")
    if val_ratio + test_ratio >= 1:
        raise DataError("val_ratio + test_ratio must leave room for train")
    ids = [d.doc_id for d in docs]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate doc_ids in corpus")
    if by_domain:
        by_dom: dict[str, list[DocumentRecord]] = {}
        for d in docs:
            by_dom.setdefault(d.domain, []).append(d)
        train: list[str] = []
        val: list[str] = []
        test: list[str] = []
        for dom in sorted(by_dom):
            part = split_corpus(
                by_dom[dom], seed=seed, val_ratio=val_ratio, test_ratio=test_ratio
            )
            train += part.train
            val += part.val
            test += part.test
        return CorpusSplit(
            train=tuple(sorted(train)),
            val=tuple(sorted(val)),
            test=tuple(sorted(test)),
            seed=seed,
            ratios=(1.0 - val_ratio - test_ratio, val_ratio, test_ratio),
        )
    n = len(docs)
    if n < 3:
        raise DataError(f"need at least 3 documents to split, got {n}")
    n_val = _round_half_up(n * val_ratio)
    n_test = _round_half_up(n * test_ratio)
    if n - n_val - n_test < 1:
        raise DataError(
            f"ratios leave no training documents (n={n}, val={n_val}, test={n_test})"
        )
    order = sorted(ids)
    random.Random(seed).shuffle(order)
    val_ids = order[:n_val]
    test_ids = order[n_val : n_val + n_test]
    train_ids = order[n_val + n_test :]
    return CorpusSplit(
        train=tuple(sorted(train_ids)),
        val=tuple(sorted(val_ids)),
        test=tuple(sorted(test_ids)),
        seed=seed,
        ratios=(1.0 - val_ratio - test_ratio, val_ratio, test_ratio),
    )
