"""Command-line interface: one subcommand per pipeline stage.

Exit codes: 0 success, 2 configuration error (bad flags, bad config file,
incompatible sources), 3 data error (unreadable or inconsistent corpora,
label problems), 4 job error (external process or numerics failures).
Every failure prints a single JSON line to stderr:
``{"error": "<class>", "exit": <code>, "message": "..."}``.

Options may also come from a JSON file via ``--config``; command-line flags
win, and keys the subcommand does not know are rejected.

Feature-source specs (for --features / --shift-features):
    archive:DIR                 embeddings previously written by `encode`
    compose:SENT_DIR:SHIFT_DIR  per-sentence rows of shift-aware context
    handcrafted[:DIM]           deterministic lexical/structural features
    hashing:DIM[:SALT]          hashed bag-of-tokens (no training data)
    static:PATH                 word-vector file, mean-pooled per sentence

Encoder specs (for `encode` / `train-lsp` / `shift-embed`) additionally allow
    transformer:DIR[:POOLING[:MAXLEN]]   HuggingFace checkpoint directory

Paths inside specs cannot contain ":" or ",".
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import shlex
import statistics
import sys
from contextlib import closing
from dataclasses import replace
from datetime import datetime
from pathlib import Path
from typing import Sequence

from . import __version__
from .corpus.adjudication import adjudicate, reduce_corpus
from .corpus.io import (
    import_webanno,
    load_label_mapping,
    read_corpus_jsonl,
    read_mapped_corpus_jsonl,
    write_corpus_jsonl,
)
from .corpus.preprocess import (
    NltkSentenceSplitter,
    RegexSentenceSplitter,
    default_rules,
    ingest_raw,
    load_rules,
)
from .corpus.records import KNOWN_DOMAINS, CorpusSplit, DocumentRecord, select_docs
from .corpus.splitting import split_corpus
from .corpus.stats import label_distribution, shift_statistic
from .errors import ConfigError, DataError, JobError, MetricError, RRSegError
from .labels import parse_main_label, parse_role
from .manifest import RunManifest

RUNS_DIR_ENV = "RRSEG_RUNS_DIR"
CACHE_DIR_ENV = "RRSEG_CACHE_DIR"

# Mirrors labelers.config.VARIANTS; kept literal so building the parser does
# not import torch. A unit test asserts the two stay equal.
VARIANT_CHOICES = ("crf", "bilstm", "bilstm_crf", "lsp_bilstm_crf", "mtl")


# --- plumbing ---------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors go through the JSON diagnostic path."""

    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigError(message)


def _exit_code(exc: RRSegError) -> int:
    if isinstance(exc, ConfigError):
        return 2
    if isinstance(exc, (DataError, MetricError)):
        return 3
    if isinstance(exc, JobError):
        return 4
    return 4


def _read_json(path: str | Path, what: str) -> object:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON in {what}: {exc}") from None


def _write_json(path: str | Path, obj: object) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_corpus(path: str | Path) -> list[DocumentRecord]:
    try:
        return read_corpus_jsonl(path)
    except FileNotFoundError:
        raise DataError(f"corpus file not found: {path}") from None


def _load_split(path: str | Path) -> CorpusSplit:
    obj = _read_json(path, "split")
    if not isinstance(obj, dict):
        raise DataError(f"{path}: split file must hold a JSON object")
    return CorpusSplit.from_dict(obj)


def _out_dir(args, command: str, *, env: str = RUNS_DIR_ENV) -> Path:
    """Resolve --out, falling back to $RRSEG_RUNS_DIR/<command>-<timestamp>."""
    if getattr(args, "out", None):
        out = Path(args.out)
    else:
        root = os.environ.get(env)
        if not root:
            raise ConfigError(f"--out is required (or set ${env})")
        out = Path(root) / f"{command}-{datetime.now().strftime('%Y%m%d-%H%M%S')}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def _part_docs(docs: Sequence[DocumentRecord], split: CorpusSplit | None, part: str):
    if split is None:
        if part != "all":
            raise ConfigError(f"--part {part} requires --split")
        return list(docs)
    if part == "all":
        return list(docs)
    return select_docs(docs, getattr(split, part))


def _mean_stdev(values: Sequence[float]) -> tuple[float, float]:
    mean = statistics.fmean(values)
    stdev = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, stdev


def _parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip() != ""]
    except ValueError:
        raise ConfigError(f"--seeds must be comma-separated integers, got {text!r}") from None
    if not seeds:
        raise ConfigError("--seeds is empty")
    if len(set(seeds)) != len(seeds):
        raise ConfigError(f"--seeds contains duplicates: {text!r}")
    return seeds


def _parse_grid(text: str) -> list[float]:
    """Either START:STOP:STEP (inclusive) or a comma list of values."""
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError("expected START:STOP:STEP")
            start, stop, step = (float(p) for p in parts)
            if step <= 0 or stop < start:
                raise ValueError("need step > 0 and stop >= start")
            n = int(round((stop - start) / step)) + 1
            values = [round(start + i * step, 10) for i in range(n)]
            return [v for v in values if v <= stop + 1e-9]
        return [float(p) for p in text.split(",") if p.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad --grid {text!r}: {exc}") from None


# --- config-file merging ----------------------------------------------------


def _apply_config_file(args: argparse.Namespace, sub: argparse.ArgumentParser,
                       argv: Sequence[str]) -> None:
    if not getattr(args, "config", None):
        return
    path = Path(args.config)
    raw = _read_json(path, "config")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config file must hold a JSON object")
    actions = {
        a.dest: a
        for a in sub._actions
        if a.option_strings and a.dest not in ("help", "config")
    }
    for key, value in raw.items():
        dest = key.replace("-", "_")
        if dest == "in":
            dest = "infile"
        if dest not in actions:
            raise ConfigError(f"{path}: unknown config key {key!r} for this subcommand")
        action = actions[dest]
        if _given_on_cli(action, argv):
            continue
        setattr(args, dest, _config_value(action, value, key, path))


def _given_on_cli(action: argparse.Action, argv: Sequence[str]) -> bool:
    for opt in action.option_strings:
        for token in argv:
            if token == opt or token.startswith(opt + "="):
                return True
    return False


def _config_value(action: argparse.Action, value, key: str, path: Path):
    if action.nargs == 0:  # store_true flags
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: key {key!r} must be true or false")
        return value
    if isinstance(action, argparse._AppendAction):
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{path}: key {key!r} must be a list of strings")
        return list(value)
    if action.type is not None:
        try:
            value = action.type(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}: key {key!r} has the wrong type") from None
    elif not isinstance(value, str):
        raise ConfigError(f"{path}: key {key!r} must be a string")
    if action.choices is not None and value not in action.choices:
        raise ConfigError(
            f"{path}: key {key!r} must be one of {sorted(action.choices)}, got {value!r}"
        )
    return value


# --- spec grammars ----------------------------------------------------------


def build_encoder(spec: str):
    """Encoder spec -> object with encode()/encode_doc(), encoder_id, dim."""
    kind, _, rest = spec.partition(":")
    if kind == "hashing":
        from .encoders.hashing import HashingSentenceEncoder

        if not rest:
            raise ConfigError("hashing spec needs a dimension: hashing:DIM[:SALT]")
        dim_s, _, salt = rest.partition(":")
        return HashingSentenceEncoder(_positive_int(dim_s, spec), salt=salt or "v1")
    if kind == "static":
        from .encoders.static_vectors import StaticVectorEncoder

        if not rest:
            raise ConfigError("static spec needs a path: static:PATH")
        return StaticVectorEncoder.load(rest)
    if kind == "handcrafted":
        from .encoders.handcrafted import DEFAULT_DIM, HandcraftedFeaturizer

        dim = _positive_int(rest, spec) if rest else DEFAULT_DIM
        return HandcraftedFeaturizer(dim=dim)
    if kind == "transformer":
        from .encoders.transformer import TransformerSentenceEncoder

        if not rest:
            raise ConfigError("transformer spec needs a path: transformer:DIR[:POOLING[:MAXLEN]]")
        parts = rest.split(":")
        if len(parts) > 3:
            raise ConfigError(f"bad transformer spec {spec!r}")
        pooling = parts[1] if len(parts) > 1 and parts[1] else "cls"
        max_len = _positive_int(parts[2], spec) if len(parts) > 2 else 256
        return TransformerSentenceEncoder.from_pretrained(
            parts[0], pooling=pooling, max_len=max_len
        )
    raise ConfigError(
        f"unknown encoder spec {spec!r}; expected hashing:, static:, handcrafted, or transformer:"
    )


def build_feature_source(spec: str):
    """Feature-source spec -> FeatureSource for training/prediction."""
    from .encoders.base import SentenceDocumentAdapter
    from .labelers.training import FeaturizerSource, as_feature_source

    kind, _, rest = spec.partition(":")
    if kind == "archive":
        from .encoders.archive import EmbeddingArchive

        if not rest:
            raise ConfigError("archive spec needs a directory: archive:DIR")
        return as_feature_source(EmbeddingArchive.open(rest))
    if kind == "compose":
        from .encoders.archive import EmbeddingArchive
        from .labelers.compose import ComposedShiftSource

        parts = rest.split(":")
        if len(parts) != 2 or not all(parts):
            raise ConfigError("compose spec needs two archives: compose:SENT_DIR:SHIFT_DIR")
        return as_feature_source(
            ComposedShiftSource(EmbeddingArchive.open(parts[0]), EmbeddingArchive.open(parts[1]))
        )
    if kind == "handcrafted":
        return as_feature_source(build_encoder(spec))
    if kind in ("hashing", "static"):
        return FeaturizerSource(SentenceDocumentAdapter(build_encoder(spec)))
    raise ConfigError(
        f"unknown feature spec {spec!r}; expected archive:, compose:, handcrafted, "
        "hashing:, or static:"
    )


def _positive_int(text: str, spec: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ConfigError(f"bad integer {text!r} in spec {spec!r}") from None
    if value <= 0:
        raise ConfigError(f"value must be positive in spec {spec!r}")
    return value


def _labeler_config(args, input_dim: int, shift_input_dim: int | None, seed: int):
    from .labelers.config import SequenceModelConfig

    return SequenceModelConfig(
        variant=args.variant,
        input_dim=input_dim,
        shift_input_dim=shift_input_dim,
        hidden_dim=args.hidden,
        shift_hidden_dim=getattr(args, "shift_hidden", None),
        lr=args.lr,
        batch_docs=args.batch_docs,
        epochs=args.epochs,
        lambda_shift=getattr(args, "lambda_shift", None),
        seed=seed,
        loss_normalization=args.loss_normalization,
        boundary_shift=args.boundary_shift,
        shift_embedding_dim=getattr(args, "shift_embedding_dim", None),
    )


# --- corpus-stage subcommands -----------------------------------------------


def cmd_ingest(args) -> int:
    if bool(args.raw) == bool(args.jsonl):
        raise ConfigError("ingest needs exactly one of --raw or --jsonl")
    if args.raw:
        if args.mapping:
            raise ConfigError("--mapping applies to --jsonl ingestion only")
        rules = load_rules(args.rules) if args.rules else default_rules()
        splitter = NltkSentenceSplitter() if args.splitter == "nltk" else RegexSentenceSplitter()
        docs = []
        for raw_path in args.raw:
            p = Path(raw_path)
            try:
                text = p.read_text(encoding="utf-8")
            except FileNotFoundError:
                raise DataError(f"raw text file not found: {p}") from None
            docs.append(
                ingest_raw(text, rules, splitter, doc_id=p.stem, domain=args.domain)
            )
    elif args.mapping:
        docs = read_mapped_corpus_jsonl(args.jsonl, load_label_mapping(args.mapping))
    else:
        docs = _load_corpus(args.jsonl)
    if not docs:
        raise DataError("no documents ingested")
    write_corpus_jsonl(docs, args.out)
    n_sent = sum(len(d.sentences) for d in docs)
    print(f"wrote {len(docs)} docs ({n_sent} sentences) to {args.out}")
    return 0


def cmd_import(args) -> int:
    sources = {}
    for item in args.annotator:
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            raise ConfigError(f"--annotator expects NAME=TSV_PATH, got {item!r}")
        if name in sources:
            raise ConfigError(f"duplicate annotator {name!r}")
        try:
            sources[name] = Path(path).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise DataError(f"annotator file not found: {path}") from None
    doc = import_webanno(args.doc_id, args.domain, sources)
    docs = []
    if args.append and Path(args.out).exists():
        docs = _load_corpus(args.out)
        if any(d.doc_id == doc.doc_id for d in docs):
            raise DataError(f"doc_id {doc.doc_id!r} already present in {args.out}")
    docs.append(doc)
    write_corpus_jsonl(docs, args.out)
    print(
        f"imported {doc.doc_id!r} ({len(doc.sentences)} sentences, "
        f"{len(sources)} annotators) into {args.out}"
    )
    return 0


def cmd_adjudicate(args) -> int:
    docs = _load_corpus(args.infile)
    overrides_by_doc: dict[str, dict[int, object]] = {}
    if args.overrides:
        raw = _read_json(args.overrides, "overrides")
        if not isinstance(raw, dict):
            raise DataError(f"{args.overrides}: overrides must map doc_id to {{index: code}}")
        for doc_id, table in raw.items():
            if not isinstance(table, dict):
                raise DataError(f"{args.overrides}: entry for {doc_id!r} must be an object")
            per_doc = {}
            for idx, code in table.items():
                try:
                    per_doc[int(idx)] = parse_role(code)
                except ValueError:
                    raise DataError(
                        f"{args.overrides}: {doc_id!r} has non-integer sentence index {idx!r}"
                    ) from None
            overrides_by_doc[doc_id] = per_doc
    known_ids = {d.doc_id for d in docs}
    stray = sorted(set(overrides_by_doc) - known_ids)
    if stray:
        raise DataError(f"overrides reference unknown doc_ids: {stray[:5]}")
    out_docs = []
    unresolved_by_doc: dict[str, list[int]] = {}
    for doc in docs:
        adjudicated, unresolved = adjudicate(doc, overrides_by_doc.get(doc.doc_id))
        out_docs.append(adjudicated)
        if unresolved:
            unresolved_by_doc[doc.doc_id] = unresolved
    if unresolved_by_doc and not args.allow_unresolved:
        shown = dict(list(unresolved_by_doc.items())[:3])
        raise DataError(
            f"{sum(len(v) for v in unresolved_by_doc.values())} sentences remain tied "
            f"(e.g. {shown}); supply --overrides or pass --allow-unresolved"
        )
    write_corpus_jsonl(out_docs, args.out)
    print(f"adjudicated {len(out_docs)} docs to {args.out}")
    if unresolved_by_doc:
        print(
            f"warning: {sum(len(v) for v in unresolved_by_doc.values())} sentences left unresolved"
        )
    return 0


def cmd_reduce(args) -> int:
    docs = _load_corpus(args.infile)
    reduced, emptied = reduce_corpus(docs)
    if not reduced:
        raise DataError("label reduction emptied every document")
    write_corpus_jsonl(reduced, args.out)
    print(f"reduced {len(reduced)} docs to {args.out}")
    if emptied:
        print(f"dropped {len(emptied)} docs emptied by reduction: {emptied[:5]}")
    return 0


def cmd_split(args) -> int:
    docs = _load_corpus(args.infile)
    split = split_corpus(
        docs,
        seed=args.seed,
        val_ratio=args.val_ratio,
        test_ratio=args.test_ratio,
        by_domain=args.by_domain,
    )
    _write_json(args.out, split.to_dict())
    print(
        f"split {len(docs)} docs: train {len(split.train)} / val {len(split.val)} / "
        f"test {len(split.test)} (seed {args.seed}) -> {args.out}"
    )
    return 0


def cmd_stats(args) -> int:
    docs = _load_corpus(args.infile)
    dist = label_distribution(docs, level=args.level)
    shift = shift_statistic(docs, level=args.level)
    by_domain: dict[str, int] = {}
    for d in docs:
        by_domain[d.domain] = by_domain.get(d.domain, 0) + 1
    payload = {
        "docs": len(docs),
        "docs_by_domain": dict(sorted(by_domain.items())),
        "sentences": sum(len(d.sentences) for d in docs),
        "level": args.level,
        "label_distribution": dist,
        "shift": {
            "shift_pairs": shift.shift_pairs,
            "total_pairs": shift.total_pairs,
            "micro_shift_rate": shift.micro_shift_rate,
            "micro_same_rate": shift.micro_same_rate,
            "macro_shift_rate": shift.macro_shift_rate,
        },
    }
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
        return 0
    print(f"{payload['docs']} docs, {payload['sentences']} sentences "
          f"({', '.join(f'{k}: {v}' for k, v in payload['docs_by_domain'].items())})")
    labels = list(next(iter(dist.values())))
    width = max(len(c) for c in labels) + 1
    domains = list(dist)
    print("label".ljust(width) + "".join(d.rjust(8) for d in domains))
    for code in labels:
        print(code.ljust(width) + "".join(str(dist[d][code]).rjust(8) for d in domains))
    print(
        f"shift rate: micro {shift.micro_shift_rate:.4f} "
        f"({shift.shift_pairs}/{shift.total_pairs}), macro {shift.macro_shift_rate:.4f}"
    )
    return 0


# --- encoding and LSP subcommands -------------------------------------------


def cmd_encode(args) -> int:
    docs = _load_corpus(args.infile)
    encoder = build_encoder(args.encoder)
    out = _out_dir(args, "encode", env=CACHE_DIR_ENV)
    from .encoders.base import encode_corpus

    archive = encode_corpus(encoder, docs, out)
    stats = archive.last_encode_stats
    print(
        f"archive {out} [{archive.encoder_id}] dim {archive.dim}: "
        f"encoded {len(stats.encoded)}, skipped {len(stats.skipped)}, "
        f"repaired {len(stats.repaired)}"
    )
    return 0


def cmd_train_lsp(args) -> int:
    from .lsp.dataset import build_shift_dataset, positive_rate, write_shift_pairs_jsonl
    from .lsp.models import (
        PAIR_SCHEDULE,
        SIAMESE_SCHEDULE,
        eval_shift,
        train_pair_shift,
        train_siamese_shift,
    )

    docs = _load_corpus(args.infile)
    split = _load_split(args.split)
    train_pairs = build_shift_dataset(select_docs(docs, split.train), level=args.level)
    val_pairs = build_shift_dataset(select_docs(docs, split.val), level=args.level)
    base = SIAMESE_SCHEDULE if args.model == "siamese" else PAIR_SCHEDULE
    updates = {
        k: v
        for k, v in {
            "epochs": args.epochs,
            "batch_size": args.batch_size,
            "lr": args.lr,
            "max_len": args.max_len,
            "seed": args.seed,
            "pos_weight": args.pos_weight,
        }.items()
        if v is not None
    }
    schedule = replace(base, **updates)
    out = _out_dir(args, "train-lsp")

    if not args.encoder:
        raise ConfigError(f"--model {args.model} requires --encoder")
    if args.model == "siamese":
        encoder = build_encoder(args.encoder)
        hidden = tuple(_positive_int(h, args.hidden_dims) for h in args.hidden_dims.split(","))
        model = train_siamese_shift(encoder, train_pairs, schedule, hidden_dims=hidden)
        config = {"model": "siamese", "hidden_dims": list(hidden), "encoder": args.encoder}
    else:
        if not args.encoder.startswith("transformer:"):
            raise ConfigError(
                "--model pair fine-tunes a transformer; use --encoder transformer:DIR"
            )
        encoder = build_encoder(args.encoder)
        model = train_pair_shift(encoder, train_pairs, schedule)
        config = {"model": "pair", "encoder": args.encoder}
    config["schedule"] = {
        "epochs": schedule.epochs,
        "batch_size": schedule.batch_size,
        "lr": schedule.lr,
        "max_len": schedule.max_len,
        "seed": schedule.seed,
        "pos_weight": schedule.pos_weight,
    }

    model_dir = out / "model"
    model.save(model_dir)
    if args.dump_pairs:
        write_shift_pairs_jsonl(train_pairs, out / "train_pairs.jsonl")
        write_shift_pairs_jsonl(val_pairs, out / "val_pairs.jsonl")
    line = (
        f"trained {args.model} shift model on {len(train_pairs)} pairs "
        f"(positive rate {positive_rate(train_pairs):.4f}) -> {model_dir}"
    )
    if val_pairs:
        report = eval_shift(model, val_pairs)
        report.save_json(out / "val_report.json")
        line += f"; val macro F1 {report.macro_f1:.4f} over {len(val_pairs)} pairs"
    RunManifest.for_run(
        "train-lsp", config, {"corpus": docs}, split=split, extra={"model_id": model.model_id}
    ).save(out / "manifest.json")
    print(line)
    return 0


def cmd_shift_embed(args) -> int:
    from .encoders.archive import EmbeddingArchive
    from .lsp.embed import cache_shift_embeddings
    from .lsp.models import PairShiftModel, SiameseShiftModel

    docs = _load_corpus(args.infile)
    cfg = _read_json(Path(args.model) / "config.json", "shift model config")
    kind = cfg.get("type") if isinstance(cfg, dict) else None
    if kind == "siamese":
        if not args.encoder:
            raise ConfigError("a siamese shift model needs --encoder to reload")
        model = SiameseShiftModel.load(args.model, build_encoder(args.encoder))
    elif kind == "pair":
        model = PairShiftModel.load(args.model)
    else:
        raise DataError(f"{args.model}: unknown shift model type {kind!r}")
    sentence_archive = (
        EmbeddingArchive.open(args.sentence_archive) if args.sentence_archive else None
    )
    out = _out_dir(args, "shift-embed", env=CACHE_DIR_ENV)
    archive = cache_shift_embeddings(model, docs, out, sentence_archive=sentence_archive)
    stats = archive.last_encode_stats
    print(
        f"shift cache {out} [{archive.encoder_id}] dim {archive.dim}: "
        f"encoded {len(stats.encoded)}, skipped {len(stats.skipped)}, "
        f"repaired {len(stats.repaired)}"
    )
    return 0


# --- labeler training and evaluation ----------------------------------------


def _run_one_seed(docs, split, feature_source, shift_source, config, out_dir,
                  early_stop: int | None) -> dict:
    from .labelers.training import evaluate_labeler, train_sequence_labeler

    result = train_sequence_labeler(
        config, feature_source, docs, split,
        shift_source=shift_source, out_dir=out_dir, early_stop_patience=early_stop,
    )
    row = {
        "seed": config.seed,
        "val_macro_f1": result.val_macro_f1,
        "best_epoch": result.best_epoch,
        "checkpoint": str(out_dir),
        "test_macro_f1": None,
    }
    if split.test:
        test_report = evaluate_labeler(
            result.model, feature_source, select_docs(docs, split.test), shift_source=shift_source
        )
        test_report.save_json(Path(out_dir) / "test_report.json")
        row["test_macro_f1"] = test_report.macro_f1
    return row


def _train_seed_job(payload: dict) -> dict:
    """Worker for --jobs: rebuilds inputs from paths/specs (picklable payload)."""
    from .labelers.config import SequenceModelConfig

    docs = _load_corpus(payload["corpus"])
    split = _load_split(payload["split"])
    feature_source = build_feature_source(payload["features"])
    shift_source = (
        build_feature_source(payload["shift_features"]) if payload["shift_features"] else None
    )
    config = SequenceModelConfig.from_dict(payload["config"])
    return _run_one_seed(
        docs, split, feature_source, shift_source, config,
        payload["out_dir"], payload["early_stop"],
    )


def _summarize_runs(rows: list[dict]) -> dict:
    val_mean, val_stdev = _mean_stdev([r["val_macro_f1"] for r in rows])
    summary = {
        "val_macro_f1_mean": val_mean,
        "val_macro_f1_stdev": val_stdev,
        "test_macro_f1_mean": None,
        "test_macro_f1_stdev": None,
    }
    tests = [r["test_macro_f1"] for r in rows if r["test_macro_f1"] is not None]
    if tests:
        test_mean, test_stdev = _mean_stdev(tests)
        summary["test_macro_f1_mean"] = test_mean
        summary["test_macro_f1_stdev"] = test_stdev
    return summary


def cmd_train(args) -> int:
    docs = _load_corpus(args.infile)
    split = _load_split(args.split)
    seeds = _parse_seeds(args.seeds)
    feature_source = build_feature_source(args.features)
    if args.variant == "mtl" and not args.shift_features:
        raise ConfigError("--variant mtl requires --shift-features")
    if args.variant != "mtl" and args.shift_features:
        raise ConfigError("--shift-features applies to --variant mtl only")
    shift_source = build_feature_source(args.shift_features) if args.shift_features else None
    out = _out_dir(args, "train")

    configs = [
        _labeler_config(
            args, feature_source.dim, shift_source.dim if shift_source else None, seed
        )
        for seed in seeds
    ]
    seed_dirs = [out / f"seed_{seed:02d}" for seed in seeds]

    if args.jobs > 1 and len(seeds) > 1:
        from concurrent.futures import ProcessPoolExecutor

        payloads = [
            {
                "corpus": str(args.infile),
                "split": str(args.split),
                "features": args.features,
                "shift_features": args.shift_features,
                "config": cfg.to_dict(),
                "out_dir": str(d),
                "early_stop": args.early_stop,
            }
            for cfg, d in zip(configs, seed_dirs)
        ]
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_train_seed_job, payloads))
    else:
        rows = [
            _run_one_seed(docs, split, feature_source, shift_source, cfg, d, args.early_stop)
            for cfg, d in zip(configs, seed_dirs)
        ]

    summary = {
        "format": "rrseg-train-summary-v1",
        "variant": args.variant,
        "seeds": seeds,
        "config": configs[0].to_dict(),
        "features": args.features,
        "shift_features": args.shift_features,
        "runs": rows,
        **_summarize_runs(rows),
    }
    _write_json(out / "summary.json", summary)
    RunManifest.for_run(
        "train",
        configs[0],
        {"corpus": docs},
        split=split,
        extra={"seeds": seeds, "features": args.features, "shift_features": args.shift_features},
    ).save(out / "manifest.json")
    line = (
        f"{args.variant}: val macro F1 {summary['val_macro_f1_mean']:.4f} "
        f"± {summary['val_macro_f1_stdev']:.4f} over {len(seeds)} seed(s)"
    )
    if summary["test_macro_f1_mean"] is not None:
        line += (
            f"; test {summary['test_macro_f1_mean']:.4f} ± {summary['test_macro_f1_stdev']:.4f}"
        )
    print(line + f" -> {out}")
    return 0


def cmd_sweep_lambda(args) -> int:
    from .labelers.training import sweep_lambda

    docs = _load_corpus(args.infile)
    split = _load_split(args.split)
    feature_source = build_feature_source(args.features)
    shift_source = build_feature_source(args.shift_features)
    grid = _parse_grid(args.grid)
    args.variant = "mtl"
    args.lambda_shift = grid[0]
    base = _labeler_config(args, feature_source.dim, shift_source.dim, args.seed)
    out = _out_dir(args, "sweep-lambda")
    sweep = sweep_lambda(
        base, feature_source, shift_source, docs, split,
        grid=grid, early_stop_patience=args.early_stop,
    )
    payload = {"format": "rrseg-sweep-v1", "grid": grid, **sweep.to_dict()}
    _write_json(out / "sweep.json", payload)
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["lambda", "val_macro_f1", "best_epoch"])
        for row in sweep.rows:
            w.writerow([row["lambda"], row["val_macro_f1"], row["best_epoch"]])
    if args.render:
        _render_sweep(sweep.rows, out / "sweep.png")
    RunManifest.for_run(
        "sweep-lambda", base, {"corpus": docs}, split=split, extra={"grid": grid}
    ).save(out / "manifest.json")
    best = max(sweep.rows, key=lambda r: r["val_macro_f1"])
    print(
        f"swept {len(grid)} lambdas: best {sweep.best_lambda} "
        f"(val macro F1 {best['val_macro_f1']:.4f}) -> {out}"
    )
    return 0


def _render_sweep(rows: list[dict], path: Path) -> None:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise ConfigError(
            "matplotlib is not installed; omit --render or install rrseg[plots]"
        ) from None
    xs = [r["lambda"] for r in rows]
    ys = [r["val_macro_f1"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(xs, ys, marker="o")
    ax.set_xlabel("lambda")
    ax.set_ylabel("val macro F1")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def cmd_evaluate(args) -> int:
    from .labelers.checkpoint import load_checkpoint
    from .labelers.training import (
        evaluate_labeler,
        predict_labels,
        write_predictions_jsonl,
    )
    from .metrics import confusion_matrix

    docs = _load_corpus(args.infile)
    split = _load_split(args.split) if args.split else None
    part = _part_docs(docs, split, args.part)
    if not part:
        raise DataError(f"no documents in part {args.part!r}")
    ckpt = load_checkpoint(args.checkpoint)
    feature_source = build_feature_source(args.features)
    if feature_source.source_id != ckpt.feature_source_id:
        raise ConfigError(
            f"feature source {feature_source.source_id!r} does not match checkpoint's "
            f"{ckpt.feature_source_id!r}"
        )
    shift_source = None
    if args.shift_features:
        shift_source = build_feature_source(args.shift_features)
        if ckpt.shift_source_id is not None and shift_source.source_id != ckpt.shift_source_id:
            raise ConfigError(
                f"shift source {shift_source.source_id!r} does not match checkpoint's "
                f"{ckpt.shift_source_id!r}"
            )
    out = _out_dir(args, "evaluate")
    report = evaluate_labeler(ckpt.model, feature_source, part, shift_source=shift_source)
    report.metadata.update(
        {"checkpoint": str(args.checkpoint), "part": args.part, "n_docs": len(part)}
    )
    report.save_json(out / "report.json")
    report.save_csv(out / "report.csv")
    preds = None
    if args.predictions or args.confusion:
        preds = predict_labels(ckpt.model, feature_source, part, shift_source=shift_source)
    if args.predictions:
        write_predictions_jsonl(args.predictions, preds)
    if args.confusion:
        ref = [m.value for doc in part for m in doc.gold_main_labels()]
        hyp = [c for doc in part for c in preds[doc.doc_id]]
        confusion_matrix(ref, hyp, ckpt.model.config.label_set).save_csv(out / "confusion.csv")
    print(
        f"macro F1 {report.macro_f1:.4f} over {len(part)} docs (part {args.part}) -> {out}"
    )
    return 0


def cmd_distill(args) -> int:
    from .distill import DistillConfig, self_train, verify_chain
    from .labelers.checkpoint import load_checkpoint

    labeled = _load_corpus(args.infile)
    pool = _load_corpus(args.pool)
    split = _load_split(args.split)
    teacher = load_checkpoint(args.teacher)
    feature_source = build_feature_source(args.features)
    if feature_source.source_id != teacher.feature_source_id:
        raise ConfigError(
            f"feature source {feature_source.source_id!r} does not match teacher's "
            f"{teacher.feature_source_id!r}"
        )
    shift_source = build_feature_source(args.shift_features) if args.shift_features else None
    student = teacher.config
    if args.epochs is not None:
        student = replace(student, epochs=args.epochs)
    cfg = DistillConfig(
        student=student,
        alpha_u=args.alpha,
        iterations=args.iterations,
        unlabeled_per_iteration=args.per_iteration,
        warm_start=args.warm_start,
        early_stop_patience=args.early_stop,
        sample_seed=args.sample_seed,
    )
    out = _out_dir(args, "distill")
    result = self_train(
        teacher, labeled, pool, cfg, feature_source, split,
        shift_source=shift_source, out_dir=out,
    )
    verify_chain(result.log_path)
    RunManifest.for_run(
        "distill", cfg, {"labeled": labeled, "pool": pool}, split=split,
        extra={"teacher": str(args.teacher), "features": args.features},
    ).save(out / "manifest.json")
    path = " -> ".join(
        f"iter {r['iteration']}: {r['val_macro_f1']:.4f}" for r in result.records
    )
    print(
        f"teacher val macro F1 {result.teacher_val_f1:.4f}; {path}; "
        f"chain verified -> {out}"
    )
    return 0


# --- experiment subcommands ---------------------------------------------------


def _parse_corpus_args(items: Sequence[str]) -> dict[str, list[DocumentRecord]]:
    corpora: dict[str, list[DocumentRecord]] = {}
    for item in items:
        key, sep, rest = item.partition("=")
        if not sep or not key or not rest:
            raise ConfigError(f"--corpus expects KEY=PATH[:MAPPING], got {item!r}")
        if key in corpora:
            raise ConfigError(f"duplicate corpus key {key!r}")
        docs: list[DocumentRecord] = []
        seen: set[str] = set()
        for file_spec in rest.split(","):
            path, _, mapping = file_spec.partition(":")
            if not path:
                raise ConfigError(f"--corpus {item!r}: empty path")
            if mapping:
                part = read_mapped_corpus_jsonl(path, load_label_mapping(mapping))
            else:
                try:
                    part = _load_corpus(path)
                except DataError as exc:
                    raise DataError(
                        f"{exc}; if corpus {key!r} uses an external label scheme, "
                        f"supply {key}={path}:MAPPING.json"
                    ) from None
            for d in part:
                if d.doc_id in seen:
                    raise DataError(f"corpus {key!r}: duplicate doc_id {d.doc_id!r}")
                seen.add(d.doc_id)
            docs.extend(part)
        if not docs:
            raise DataError(f"corpus {key!r} is empty")
        corpora[key] = docs
    return corpora


def _parse_pairs(text: str) -> list[tuple[str, str]]:
    pairs = []
    for chunk in text.split(","):
        a, sep, b = chunk.partition(":")
        if not sep or not a or not b:
            raise ConfigError(f"--pairs expects TRAIN:TEST[,TRAIN:TEST...], got {text!r}")
        pairs.append((a, b))
    return pairs


def cmd_transfer(args) -> int:
    from .experiments.transfer import run_transfer

    corpora = _parse_corpus_args(args.corpus)
    pairs = _parse_pairs(args.pairs)
    feature_source = build_feature_source(args.features)
    shift_source = build_feature_source(args.shift_features) if args.shift_features else None
    if args.variant == "mtl" and shift_source is None:
        raise ConfigError("--variant mtl requires --shift-features")
    config = _labeler_config(
        args, feature_source.dim, shift_source.dim if shift_source else None, args.seed
    )
    out = _out_dir(args, "transfer")
    runs = run_transfer(
        config, feature_source, corpora, pairs,
        split_seed=args.split_seed, shift_source=shift_source, out_dir=out,
        train_kwargs={"early_stop_patience": args.early_stop},
    )
    RunManifest.for_run(
        "transfer", config, corpora,
        extra={"pairs": [list(p) for p in pairs], "split_seed": args.split_seed},
    ).save(out / "manifest.json")
    for run in runs:
        delta = "" if run.delta_g is None else f", drop {run.delta_g:.2f}%"
        print(
            f"{run.train_domain} -> {run.test_domain}: macro F1 {run.macro_f1:.4f}{delta} "
            f"({run.n_train_docs} train docs, {run.n_test_docs} test docs)"
        )
    print(f"wrote {len(runs)} runs -> {out}")
    return 0


def cmd_extract_rr(args) -> int:
    from .experiments.judgment import extract_rr_for_judgment, last_k_tokens

    docs = _load_corpus(args.infile)
    outcomes = None
    if args.outcomes:
        raw = _read_json(args.outcomes, "outcomes")
        if not isinstance(raw, dict):
            raise DataError(f"{args.outcomes}: outcomes must map doc_id to 0/1")
        outcomes = {k: int(v) for k, v in raw.items()}

    if args.mode == "last-k":
        tokenizer = None
        if args.tokenizer:
            try:
                from transformers import AutoTokenizer
            except ImportError:
                raise ConfigError("--tokenizer needs the transformers package") from None
            tokenizer = AutoTokenizer.from_pretrained(args.tokenizer)
        inputs = [
            last_k_tokens(
                d, args.k, tokenizer=tokenizer,
                outcome=None if outcomes is None else outcomes.get(d.doc_id),
            )
            for d in docs
        ]
        excluded: list[str] = []
    else:
        if args.mode == "predicted":
            from .labelers.checkpoint import load_checkpoint
            from .labelers.training import predict_from_checkpoint

            if not args.checkpoint or not args.features:
                raise ConfigError("--mode predicted requires --checkpoint and --features")
            ckpt = load_checkpoint(args.checkpoint)
            shift_source = (
                build_feature_source(args.shift_features) if args.shift_features else None
            )
            source = predict_from_checkpoint(
                ckpt, build_feature_source(args.features), docs, shift_source=shift_source
            )
        else:
            source = "gold"
        labels = frozenset(parse_main_label(c).value for c in args.labels.split(",") if c)
        if not labels:
            raise ConfigError("--labels is empty")
        extraction = extract_rr_for_judgment(
            docs, source=source, labels=labels, outcomes=outcomes
        )
        inputs = extraction.inputs
        excluded = list(extraction.excluded_doc_ids)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as f:
        for item in inputs:
            f.write(json.dumps({
                "doc_id": item.doc_id,
                "mode": item.mode,
                "text": item.text,
                "gold_outcome": item.gold_outcome,
            }, sort_keys=True) + "\n")
    if excluded:
        _write_json(out.with_suffix(out.suffix + ".excluded.json"), excluded)
    print(f"wrote {len(inputs)} inputs ({len(excluded)} docs excluded) to {out}")
    return 0


def cmd_judge(args) -> int:
    from .experiments.judgment import ExternalProcessClassifier, JudgmentInput, judgment_eval

    inputs = []
    try:
        with open(args.inputs, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{args.inputs}:{lineno}: invalid JSON: {exc}") from None
                try:
                    inputs.append(JudgmentInput(
                        doc_id=row["doc_id"], mode=row["mode"], text=row["text"],
                        gold_outcome=row.get("gold_outcome"),
                    ))
                except KeyError as exc:
                    raise DataError(f"{args.inputs}:{lineno}: missing field {exc}") from None
    except FileNotFoundError:
        raise DataError(f"inputs file not found: {args.inputs}") from None
    command = shlex.split(args.classifier)
    if not command:
        raise ConfigError("--classifier is empty")
    with closing(ExternalProcessClassifier(command)) as clf:
        result = judgment_eval(clf, inputs)
    payload = {
        "format": "rrseg-judgment-v1",
        "status": result.status,
        "reason": result.reason,
        "macro_f1": None if result.report is None else result.report.macro_f1,
        "report": None if result.report is None else result.report.to_dict(),
        "predictions": result.predictions,
    }
    _write_json(args.out, payload)
    if result.status == "ok":
        print(
            f"judgment macro F1 {result.report.macro_f1:.4f} over {len(inputs)} inputs "
            f"-> {args.out}"
        )
    else:
        print(f"judgment evaluation skipped ({result.reason}) -> {args.out}")
    return 0


# --- report -------------------------------------------------------------------


def _report_tables(root: Path) -> tuple[dict[str, list[list]], int]:
    """Collect stored result rows from a runs tree; no recomputation."""
    tables: dict[str, list[list]] = {
        "checkpoints": [], "train_summaries": [], "sweeps": [],
        "distill": [], "transfer": [], "evals": [], "per_label": [],
    }
    skipped = 0
    for path in sorted(root.rglob("*.json")):
        rel = str(path.relative_to(root))
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError, UnicodeDecodeError):
            skipped += 1
            continue
        if path.name == "transfer_runs.json" and isinstance(obj, list):
            for row in obj:
                if isinstance(row, dict):
                    tables["transfer"].append([
                        rel, row.get("train_domain"), row.get("test_domain"),
                        row.get("variant"), row.get("macro_f1"), row.get("delta_g"),
                    ])
            continue
        if not isinstance(obj, dict):
            continue
        fmt = obj.get("format")
        if path.name == "config.json" and fmt == "rrseg-checkpoint-v1":
            cfg = obj.get("config", {})
            tables["checkpoints"].append([
                rel, cfg.get("variant"), cfg.get("seed"), cfg.get("lambda_shift"),
                obj.get("val_macro_f1"), obj.get("best_epoch"),
            ])
        elif fmt == "rrseg-train-summary-v1":
            tables["train_summaries"].append([
                rel, obj.get("variant"), len(obj.get("seeds", [])),
                obj.get("val_macro_f1_mean"), obj.get("val_macro_f1_stdev"),
                obj.get("test_macro_f1_mean"), obj.get("test_macro_f1_stdev"),
            ])
        elif fmt == "rrseg-sweep-v1":
            for row in obj.get("rows", []):
                tables["sweeps"].append([
                    rel, row.get("lambda"), row.get("val_macro_f1"), obj.get("best_lambda"),
                ])
        elif fmt == "rrseg-distill-log-v1":
            for row in obj.get("records", []):
                tables["distill"].append([
                    rel, row.get("iteration"), row.get("n_labeled"), row.get("n_pseudo"),
                    row.get("alpha_u"), row.get("val_macro_f1"),
                ])
        elif "per_label_f1" in obj and "macro_f1" in obj:
            tables["evals"].append([rel, obj["macro_f1"], len(obj["per_label_f1"])])
            support = obj.get("support", {})
            for label, f1 in sorted(obj["per_label_f1"].items()):
                tables["per_label"].append([rel, label, f1, support.get(label)])
    return tables, skipped


_REPORT_HEADERS = {
    "checkpoints": ["path", "variant", "seed", "lambda", "val_macro_f1", "best_epoch"],
    "train_summaries": ["path", "variant", "n_seeds", "val_mean", "val_stdev",
                        "test_mean", "test_stdev"],
    "sweeps": ["path", "lambda", "val_macro_f1", "best_lambda"],
    "distill": ["path", "iteration", "n_labeled", "n_pseudo", "alpha_u", "val_macro_f1"],
    "transfer": ["path", "train_domain", "test_domain", "variant", "macro_f1", "delta_g"],
    "evals": ["path", "macro_f1", "n_labels"],
    "per_label": ["path", "label", "f1", "support"],
}


def cmd_report(args) -> int:
    root = args.runs or os.environ.get(RUNS_DIR_ENV)
    if not root:
        raise ConfigError(f"--runs is required (or set ${RUNS_DIR_ENV})")
    runs_root = Path(root)
    if not runs_root.is_dir():
        raise DataError(f"runs directory not found: {runs_root}")
    out = _out_dir(args, "report")
    tables, skipped = _report_tables(runs_root)
    written = []
    for name, rows in tables.items():
        if not rows:
            continue
        with open(out / f"{name}.csv", "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(_REPORT_HEADERS[name])
            w.writerows(rows)
        written.append(f"{name}.csv ({len(rows)} rows)")
    if written:
        print(f"report -> {out}: " + ", ".join(written))
    else:
        print(f"no result files found under {runs_root}")
    if skipped:
        print(f"skipped {skipped} unreadable JSON files")
    return 0


# --- parser -----------------------------------------------------------------


def _add_labeler_flags(sub: argparse.ArgumentParser, *, variant: bool = True) -> None:
    if variant:
        sub.add_argument("--variant", required=True, choices=list(VARIANT_CHOICES),
                         help="model family to train")
    sub.add_argument("--features", required=True, help="feature-source spec")
    sub.add_argument("--shift-features", default=None,
                     help="shift feature-source spec (mtl stream)")
    sub.add_argument("--epochs", type=int, default=300)
    sub.add_argument("--batch-docs", type=int, default=40, help="documents per batch")
    sub.add_argument("--lr", type=float, default=None, help="override the variant default")
    sub.add_argument("--hidden", type=int, default=None, help="BiLSTM hidden size")
    sub.add_argument("--shift-hidden", type=int, default=None, help="shift BiLSTM hidden size")
    sub.add_argument("--loss-normalization", choices=["token_mean", "doc_sum"],
                     default="token_mean")
    sub.add_argument("--boundary-shift", choices=["zeros", "learned"], default="zeros",
                     help="document-boundary shift rows")
    sub.add_argument("--shift-embedding-dim", type=int, default=None,
                     help="width of one shift vector (learned boundary)")
    sub.add_argument("--early-stop", type=int, default=None,
                     help="stop after this many epochs without val improvement")


def build_parser() -> _Parser:
    parser = _Parser(prog="rrseg", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"rrseg {__version__}")
    subs = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        sub = subs.add_parser(name, help=help_text, description=help_text)
        sub.set_defaults(func=func)
        sub.add_argument("--config", default=None,
                         help="JSON file supplying defaults for this subcommand's flags")
        return sub

    s = add("ingest", cmd_ingest, "Build a corpus JSONL from raw text or existing JSONL.")
    s.add_argument("--raw", action="append", default=None, metavar="TXT",
                   help="raw judgment text file (repeatable); doc_id = filename stem")
    s.add_argument("--domain", choices=sorted(KNOWN_DOMAINS), default="IT",
                   help="domain for --raw documents")
    s.add_argument("--jsonl", default=None, help="existing corpus JSONL to validate/normalize")
    s.add_argument("--mapping", default=None,
                   help="label mapping JSON for externally labeled --jsonl corpora")
    s.add_argument("--rules", default=None, help="preprocessing rules JSON (default: built-in)")
    s.add_argument("--splitter", choices=["regex", "nltk"], default="regex")
    s.add_argument("--out", required=True)

    s = add("import", cmd_import, "Merge per-annotator WebAnno TSV exports of one document.")
    s.add_argument("--doc-id", required=True)
    s.add_argument("--domain", required=True, choices=sorted(KNOWN_DOMAINS))
    s.add_argument("--annotator", action="append", required=True, metavar="NAME=TSV",
                   help="annotator export (repeatable)")
    s.add_argument("--out", required=True)
    s.add_argument("--append", action="store_true", help="append to an existing corpus file")

    s = add("adjudicate", cmd_adjudicate, "Assign gold labels by majority vote.")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--overrides", default=None,
                   help="JSON {doc_id: {sentence_index: role}} resolving ties")
    s.add_argument("--allow-unresolved", action="store_true",
                   help="write docs even when ties remain")
    s.add_argument("--out", required=True)

    s = add("reduce", cmd_reduce, "Map fine gold labels onto the 7 main labels.")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--out", required=True)

    s = add("split", cmd_split, "Cut a document-level train/val/test split.")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--val-ratio", type=float, default=1 / 6)
    s.add_argument("--test-ratio", type=float, default=1 / 6)
    s.add_argument("--by-domain", action="store_true", help="split each domain separately")
    s.add_argument("--out", required=True)

    s = add("stats", cmd_stats, "Label distribution and label-shift rates of a gold corpus.")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--level", choices=["fine", "main"], default="fine")
    s.add_argument("--json", action="store_true", help="machine-readable output")

    s = add("encode", cmd_encode, "Materialize sentence embeddings into an archive.")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--encoder", required=True, help="encoder spec")
    s.add_argument("--out", default=None, help="archive directory")

    s = add("train-lsp", cmd_train_lsp, "Train a label-shift classifier on adjacent pairs.")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--split", required=True)
    s.add_argument("--model", choices=["siamese", "pair"], required=True)
    s.add_argument("--encoder", default=None,
                   help="encoder spec (siamese: any; pair: transformer:DIR)")
    s.add_argument("--level", choices=["main", "fine"], default="main",
                   help="gold level defining a shift")
    s.add_argument("--hidden-dims", default="512,128", help="siamese head widths")
    s.add_argument("--epochs", type=int, default=None)
    s.add_argument("--batch-size", type=int, default=None)
    s.add_argument("--lr", type=float, default=None)
    s.add_argument("--max-len", type=int, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--pos-weight", type=float, default=None)
    s.add_argument("--dump-pairs", action="store_true", help="also write the pair datasets")
    s.add_argument("--out", default=None)

    s = add("shift-embed", cmd_shift_embed, "Cache shift embeddings for every document.")
    s.add_argument("--model", required=True, help="trained shift model directory")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--encoder", default=None, help="encoder spec (required for siamese models)")
    s.add_argument("--sentence-archive", default=None,
                   help="sentence embedding archive to reuse for siamese features")
    s.add_argument("--out", default=None, help="cache directory")

    s = add("train", cmd_train, "Train sequence labelers (optionally over several seeds).")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--split", required=True)
    _add_labeler_flags(s)
    s.add_argument("--lambda", dest="lambda_shift", type=float, default=None,
                   help="shift-loss weight (mtl)")
    s.add_argument("--seeds", default="0", help="comma-separated seeds")
    s.add_argument("--jobs", type=int, default=1, help="parallel seed workers")
    s.add_argument("--out", default=None)

    s = add("sweep-lambda", cmd_sweep_lambda, "Train mtl across a lambda grid.")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--split", required=True)
    _add_labeler_flags(s, variant=False)
    s.add_argument("--grid", default="0.1:0.9:0.1", help="START:STOP:STEP or comma list")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--render", action="store_true", help="also draw sweep.png")
    s.add_argument("--out", default=None)
    _mark_required(s, "shift_features")

    s = add("evaluate", cmd_evaluate, "Evaluate a checkpoint against gold main labels.")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--shift-features", default=None)
    s.add_argument("--split", default=None)
    s.add_argument("--part", choices=["train", "val", "test", "all"], default="all")
    s.add_argument("--predictions", default=None, help="also write predicted labels JSONL")
    s.add_argument("--confusion", action="store_true", help="also write confusion.csv")
    s.add_argument("--out", default=None)

    s = add("distill", cmd_distill, "Iterative self-training from a teacher checkpoint.")
    s.add_argument("--teacher", required=True, help="teacher checkpoint directory")
    s.add_argument("--in", dest="infile", required=True, help="labeled corpus JSONL")
    s.add_argument("--pool", required=True, help="unlabeled corpus JSONL")
    s.add_argument("--split", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--shift-features", default=None)
    s.add_argument("--alpha", type=float, default=0.3, help="pseudo-label loss weight")
    s.add_argument("--iterations", type=int, default=2)
    s.add_argument("--per-iteration", type=int, default=48,
                   help="unlabeled docs consumed per iteration")
    s.add_argument("--warm-start", action="store_true",
                   help="initialize each student from its teacher")
    s.add_argument("--epochs", type=int, default=None, help="override student epochs")
    s.add_argument("--early-stop", type=int, default=None)
    s.add_argument("--sample-seed", type=int, default=0)
    s.add_argument("--out", default=None)

    s = add("transfer", cmd_transfer, "Cross-domain training/evaluation grid.")
    s.add_argument("--corpus", action="append", required=True, metavar="KEY=PATH[:MAPPING]",
                   help="domain corpus (repeatable; comma-join several files)")
    s.add_argument("--pairs", required=True, help="TRAIN:TEST[,TRAIN:TEST...]")
    _add_labeler_flags(s)
    s.add_argument("--lambda", dest="lambda_shift", type=float, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--split-seed", type=int, default=0)
    s.add_argument("--out", default=None)

    s = add("extract-rr", cmd_extract_rr, "Build judgment-prediction inputs from a corpus.")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--mode", choices=["gold", "predicted", "last-k"], default="gold")
    s.add_argument("--labels", default="ROD,RPC", help="roles whose sentences are kept")
    s.add_argument("--checkpoint", default=None, help="labeler checkpoint (predicted mode)")
    s.add_argument("--features", default=None)
    s.add_argument("--shift-features", default=None)
    s.add_argument("--outcomes", default=None, help="JSON {doc_id: 0/1} gold outcomes")
    s.add_argument("--k", type=int, default=512, help="token count for last-k mode")
    s.add_argument("--tokenizer", default=None, help="HF tokenizer directory for last-k mode")
    s.add_argument("--out", required=True)

    s = add("judge", cmd_judge, "Score judgment inputs with an external classifier process.")
    s.add_argument("--inputs", required=True)
    s.add_argument("--classifier", required=True,
                   help="command reading {\"text\":...} lines and answering "
                        "{\"label\":0|1,\"score\":...}")
    s.add_argument("--out", required=True)

    s = add("report", cmd_report, "Aggregate stored run results into CSV tables.")
    s.add_argument("--runs", default=None, help="runs root directory")
    s.add_argument("--out", default=None)

    _defer_required(parser)
    return parser


def _mark_required(sub: argparse.ArgumentParser, dest: str) -> None:
    for action in sub._actions:
        if action.dest == dest:
            action.required = True
            return
    raise AssertionError(dest)


def _defer_required(parser: _Parser) -> None:
    """Demote argparse-level required flags to post-config-merge checks.

    A required option may come from the --config file, so argparse itself
    cannot enforce presence; the registry is checked after the merge.
    """
    registry: dict[str, list[tuple[str, str]]] = {}
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for name, sub in action.choices.items():
                entries = []
                for a in sub._actions:
                    if a.required and a.option_strings:
                        a.required = False
                        entries.append((a.dest, a.option_strings[0]))
                registry[name] = entries
    parser._rrseg_required = registry  # type: ignore[attr-defined]


def cli_dispatch(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            parser.print_help()
            return 2
        sub = _subparser_for(parser, args.command)
        _apply_config_file(args, sub, argv)
        for dest, option in parser._rrseg_required.get(args.command, ()):
            if getattr(args, dest, None) in (None, []):
                raise ConfigError(f"missing required option {option} (flag or config file)")
        return args.func(args)
    except SystemExit as exc:  # argparse --help/--version
        return exc.code if isinstance(exc.code, int) else 0
    except RRSegError as exc:
        code = _exit_code(exc)
        print(json.dumps({"error": type(exc).__name__, "exit": code, "message": str(exc)}),
              file=sys.stderr)
        return code
    except OSError as exc:
        print(json.dumps({"error": "OSError", "exit": 3, "message": str(exc)}), file=sys.stderr)
        return 3


def _subparser_for(parser: _Parser, command: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise ConfigError(f"unknown subcommand {command!r}")


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
