"""Evaluation and agreement measures.

All F1 values are macro-averaged: per-label F1 = TP/(TP + (FP+FN)/2), then an
unweighted mean over labels. Micro/weighted averaging is deliberately absent.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Any, Iterable, Literal, Mapping, Sequence

import numpy as np

from .errors import MetricError

ZeroSupport = Literal["exclude", "include"]


def _code(label: Any) -> str:
    return label.value if hasattr(label, "value") else str(label)


def _codes(seq: Iterable[Any]) -> list[str]:
    return [_code(x) for x in seq]


@dataclass(frozen=True)
class MetricsReport:
    """Per-label and macro F1 plus the bookkeeping needed to reproduce them.

    ``per_label_f1`` holds exactly the labels that entered the macro average;
    ``support`` counts reference occurrences for every label of the declared
    label set. ``metadata`` records the zero-support convention, and callers
    add seed / config fingerprints.
    """

    per_label_f1: dict[str, float]
    macro_f1: float
    support: dict[str, int]
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.per_label_f1:
            mean = sum(self.per_label_f1.values()) / len(self.per_label_f1)
            if abs(mean - self.macro_f1) > 1e-9:
                raise MetricError(
                    f"macro_f1 {self.macro_f1} is not the mean of per-label values ({mean})"
                )

    def to_dict(self) -> dict:
        return {
            "per_label_f1": dict(self.per_label_f1),
            "macro_f1": self.macro_f1,
            "support": dict(self.support),
            "metadata": dict(self.metadata),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["label", "f1", "support"])
            for lab in self.support:
                f1 = self.per_label_f1.get(lab)
                w.writerow([lab, "" if f1 is None else f"{f1:.6f}", self.support[lab]])
            w.writerow(["MACRO", f"{self.macro_f1:.6f}", sum(self.support.values())])

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(
            per_label_f1=dict(d["per_label_f1"]),
            macro_f1=float(d["macro_f1"]),
            support={k: int(v) for k, v in d["support"].items()},
            metadata=dict(d.get("metadata", {})),
        )


def label_f1(tp: int, fp: int, fn: int) -> float:
    """F1 for one label from one-vs-rest counts: TP / (TP + (FP + FN) / 2).

    Returns 0.0 when all three counts are zero.
    """
    if tp < 0 or fp < 0 or fn < 0:
        raise MetricError(f"negative counts: tp={tp} fp={fp} fn={fn}")
    denom = tp + (fp + fn) / 2
    if denom == 0:
        return 0.0
    return tp / denom


def _ovr_counts(
    predictions: Sequence[str], references: Sequence[str], label_set: Sequence[str]
) -> dict[str, tuple[int, int, int]]:
    known = set(label_set)
    for name, seq in (("predictions", predictions), ("references", references)):
        bad = set(seq) - known
        if bad:
            raise MetricError(f"{name} contain labels outside the label set: {sorted(bad)}")
    counts = {}
    for lab in label_set:
        tp = sum(1 for p, r in zip(predictions, references) if p == lab and r == lab)
        fp = sum(1 for p, r in zip(predictions, references) if p == lab and r != lab)
        fn = sum(1 for p, r in zip(predictions, references) if p != lab and r == lab)
        counts[lab] = (tp, fp, fn)
    return counts


def macro_f1(
    predictions: Sequence[Any],
    references: Sequence[Any],
    label_set: Sequence[Any],
    *,
    zero_support: ZeroSupport = "exclude",
    metadata: Mapping[str, Any] | None = None,
) -> MetricsReport:
    """Macro-averaged F1 of aligned label sequences over ``label_set``.

    With ``zero_support="exclude"`` (default) a label absent from both the
    references and the predictions is left out of the average; with
    ``"include"`` it contributes F1 = 0. The convention used is recorded in
    the report metadata.
    """
    predictions = _codes(predictions)
    references = _codes(references)
    label_set = _codes(label_set)
    if len(predictions) != len(references):
        raise MetricError(
            f"length mismatch: {len(predictions)} predictions vs {len(references)} references"
        )
    if not predictions:
        raise MetricError("empty sequences")
    if len(set(label_set)) != len(label_set):
        raise MetricError("label set contains duplicates")
    counts = _ovr_counts(predictions, references, label_set)
    per_label: dict[str, float] = {}
    for lab, (tp, fp, fn) in counts.items():
        if zero_support == "exclude" and tp == fp == fn == 0:
            continue
        per_label[lab] = label_f1(tp, fp, fn)
    if not per_label:
        raise MetricError("no label of the label set occurs in either sequence")
    meta = dict(metadata or {})
    meta["zero_support"] = zero_support
    return MetricsReport(
        per_label_f1=per_label,
        macro_f1=sum(per_label.values()) / len(per_label),
        support={lab: counts[lab][0] + counts[lab][2] for lab in label_set},
        metadata=meta,
    )


def pairwise_annotator_f1(
    labels_a: Sequence[Any],
    labels_b: Sequence[Any],
    label_set: Sequence[Any],
    *,
    zero_support: ZeroSupport = "exclude",
) -> MetricsReport:
    """Agreement of two annotators, treating A's labels as the reference."""
    return macro_f1(labels_b, labels_a, label_set, zero_support=zero_support,
                    metadata={"reference": "annotator_a"})


def aggregate_pairwise_f1(
    annotations: Mapping[str, Sequence[Any]],
    label_set: Sequence[Any],
    *,
    label_map: Mapping[str, str] | None = None,
    zero_support: ZeroSupport = "exclude",
) -> MetricsReport:
    """Corpus-level agreement: mean pairwise F1 per label, then over labels.

    ``annotations`` maps annotator_id to that annotator's aligned primary
    labels over the whole corpus. ``label_map`` optionally folds codes into a
    coarser grouping before scoring. Per-label values are averaged over every
    unordered annotator pair for which the label entered the pair's report;
    the macro value averages those label means.
    """
    if len(annotations) < 2:
        raise MetricError("need at least two annotators for pairwise agreement")
    sequences = {a: _codes(seq) for a, seq in annotations.items()}
    if label_map:
        label_map = {str(k): str(v) for k, v in label_map.items()}
        sequences = {a: [label_map.get(x, x) for x in seq] for a, seq in sequences.items()}
        label_set = sorted({label_map.get(x, x) for x in _codes(label_set)})
    lengths = {len(s) for s in sequences.values()}
    if len(lengths) != 1:
        raise MetricError(f"annotators cover different numbers of sentences: {sorted(lengths)}")
    per_label_values: dict[str, list[float]] = {}
    support: dict[str, int] = {_code(l): 0 for l in label_set}
    n_pairs = 0
    for a, b in combinations(sorted(sequences), 2):
        rep = pairwise_annotator_f1(sequences[a], sequences[b], label_set,
                                    zero_support=zero_support)
        n_pairs += 1
        for lab, f1 in rep.per_label_f1.items():
            per_label_values.setdefault(lab, []).append(f1)
        for lab, s in rep.support.items():
            support[lab] += s
    per_label = {lab: sum(v) / len(v) for lab, v in sorted(per_label_values.items())}
    return MetricsReport(
        per_label_f1=per_label,
        macro_f1=sum(per_label.values()) / len(per_label),
        support=support,
        metadata={"zero_support": zero_support, "pairs": n_pairs,
                  "aggregation": "mean over pairs then labels"},
    )


def fleiss_kappa(item_label_counts: Sequence[Sequence[int]], raters_per_item: int | None = None) -> float:
    """Fleiss' kappa from an items x categories count matrix.

    Every row must sum to the same number of raters n >= 2. When expected
    agreement is 1 (all mass in one category) the result is 1.0 for perfect
    observed agreement and an error otherwise.
    """
    counts = np.asarray(item_label_counts, dtype=np.float64)
    if counts.ndim != 2 or counts.size == 0:
        raise MetricError("count matrix must be items x categories and nonempty")
    if (counts < 0).any():
        raise MetricError("negative counts")
    row_sums = counts.sum(axis=1)
    n = raters_per_item if raters_per_item is not None else int(row_sums[0])
    if n < 2:
        raise MetricError(f"need at least 2 raters per item, got {n}")
    if not np.all(row_sums == n):
        raise MetricError(f"rows must each sum to {n} raters; row sums are {row_sums.tolist()}")
    n_items = counts.shape[0]
    p_i = ((counts * counts).sum(axis=1) - n) / (n * (n - 1))
    p_bar = float(p_i.mean())
    p_j = counts.sum(axis=0) / (n_items * n)
    p_e = float((p_j * p_j).sum())
    if abs(1.0 - p_e) < 1e-12:
        if abs(1.0 - p_bar) < 1e-12:
            return 1.0
        raise MetricError("kappa undefined: expected agreement is 1 but observed is not")
    return (p_bar - p_e) / (1.0 - p_e)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Reference x hypothesis counts over an ordered label set."""

    label_set: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]
    normalization: Literal["none", "row-percent"] = "none"

    def __post_init__(self) -> None:
        k = len(self.label_set)
        if len(self.counts) != k or any(len(r) != k for r in self.counts):
            raise MetricError("counts must be square over the label set")
        if any(c < 0 for row in self.counts for c in row):
            raise MetricError("negative counts")

    @property
    def total(self) -> int:
        return sum(c for row in self.counts for c in row)

    def values(self) -> list[list[float]]:
        """Counts, or row percentages under row-percent normalization."""
        if self.normalization == "none":
            return [list(map(float, row)) for row in self.counts]
        out = []
        for row in self.counts:
            s = sum(row)
            out.append([100.0 * c / s if s else 0.0 for c in row])
        return out

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["ref\\hyp", *self.label_set])
            for lab, row in zip(self.label_set, self.values()):
                if self.normalization == "row-percent":
                    w.writerow([lab, *(f"{v:.2f}" for v in row)])
                else:
                    w.writerow([lab, *(int(v) for v in row)])

    def save_heatmap(self, path: str | Path) -> None:
        """Render the matrix as an image; requires matplotlib."""
        try:
            import matplotlib

            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
        except ImportError as exc:
            raise MetricError("matplotlib is not installed; cannot render heatmap") from exc
        vals = np.asarray(self.values())
        fig, ax = plt.subplots(figsize=(1.0 + 0.6 * len(self.label_set),) * 2)
        im = ax.imshow(vals, cmap="Blues")
        ax.set_xticks(range(len(self.label_set)), self.label_set, rotation=45, ha="right")
        ax.set_yticks(range(len(self.label_set)), self.label_set)
        ax.set_xlabel("hypothesis")
        ax.set_ylabel("reference")
        fmt = "{:.0f}" if self.normalization == "row-percent" else "{:g}"
        for i in range(len(self.label_set)):
            for j in range(len(self.label_set)):
                ax.text(j, i, fmt.format(vals[i, j]), ha="center", va="center", fontsize=8)
        fig.colorbar(im, ax=ax, shrink=0.8)
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)


def confusion_matrix(
    reference_labels: Sequence[Any],
    hypothesis_labels: Sequence[Any],
    label_set: Sequence[Any],
    normalize: Literal["none", "row-percent"] = "none",
) -> ConfusionMatrix:
    refs = _codes(reference_labels)
    hyps = _codes(hypothesis_labels)
    labels = tuple(_codes(label_set))
    if len(refs) != len(hyps):
        raise MetricError(f"length mismatch: {len(refs)} references vs {len(hyps)} hypotheses")
    index = {lab: i for i, lab in enumerate(labels)}
    bad = (set(refs) | set(hyps)) - set(index)
    if bad:
        raise MetricError(f"labels outside the label set: {sorted(bad)}")
    counts = [[0] * len(labels) for _ in labels]
    for r, h in zip(refs, hyps):
        counts[index[r]][index[h]] += 1
    return ConfusionMatrix(
        label_set=labels,
        counts=tuple(tuple(row) for row in counts),
        normalization=normalize,
    )


def domain_transfer_delta(f1_in_domain: float, f1_transferred: float) -> float:
    """Relative performance drop, in percent, of a transferred model."""
    if f1_in_domain <= 0:
        raise MetricError(f"in-domain F1 must be positive, got {f1_in_domain}")
    return 100.0 * (f1_in_domain - f1_transferred) / f1_in_domain


def permutation_test(
    scores_a: Sequence[float],
    scores_b: Sequence[float],
    *,
    n_resamples: int = 10_000,
    seed: int = 0,
) -> float:
    """Two-sided paired sign-flip permutation test on mean score difference.

    Returns the p-value for the null that the paired differences are
    symmetric around zero, with the +1 small-sample correction.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise MetricError("score lists must be nonempty, one-dimensional, and aligned")
    diffs = a - b
    observed = abs(diffs.mean())
    rng = np.random.default_rng(seed)
    signs = rng.choice((-1.0, 1.0), size=(n_resamples, diffs.size))
    perm = np.abs((signs * diffs).mean(axis=1))
    return (1.0 + float((perm >= observed - 1e-15).sum())) / (n_resamples + 1.0)
