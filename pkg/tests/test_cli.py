"""Command-line surface: parsing helpers, exit codes, config files, and a
small end-to-end run driven entirely through cli_dispatch."""
import json

import pytest

from rrseg.cli import VARIANT_CHOICES, _parse_grid, _parse_seeds, cli_dispatch
from rrseg.corpus.io import write_corpus_jsonl
from rrseg.errors import ConfigError
from rrseg.labelers.config import VARIANTS
from rrseg.synthetic import generate_block_corpus


def test_variant_choices_mirror_model_catalog():
    # cli keeps a literal copy so parser construction stays torch-free
    assert VARIANT_CHOICES == VARIANTS


def test_parse_seeds():
    assert _parse_seeds("0,1,2") == [0, 1, 2]
    assert _parse_seeds("7") == [7]
    with pytest.raises(ConfigError):
        _parse_seeds("1,1")
    with pytest.raises(ConfigError):
        _parse_seeds("1,x")
    with pytest.raises(ConfigError):
        _parse_seeds("")


def test_parse_grid():
    assert _parse_grid("0.1:0.5:0.2") == pytest.approx([0.1, 0.3, 0.5])
    assert _parse_grid("0:1:0.25") == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])
    assert _parse_grid("0.2,0.7") == [0.2, 0.7]
    with pytest.raises(ConfigError):
        _parse_grid("1:0:0.1")
    with pytest.raises(ConfigError):
        _parse_grid("0.1:0.9")
    with pytest.raises(ConfigError):
        _parse_grid("0.1:0.9:0")


def _diag(capsys):
    err = capsys.readouterr().err.strip()
    assert err and "\n" not in err, f"diagnostic must be one line, got {err!r}"
    return json.loads(err)


def test_exit_codes(tmp_path, capsys):
    assert cli_dispatch(["--version"]) == 0
    capsys.readouterr()

    assert cli_dispatch([]) == 2  # no subcommand: help, config error code
    capsys.readouterr()

    rc = cli_dispatch(["split", "--no-such-flag"])
    assert rc == 2
    diag = _diag(capsys)
    assert diag["exit"] == 2 and diag["error"] == "ConfigError"

    rc = cli_dispatch(["split", "--in", str(tmp_path / "missing.jsonl"),
                       "--seed", "1", "--out", str(tmp_path / "s.json")])
    assert rc == 3
    diag = _diag(capsys)
    assert diag["exit"] == 3
    assert "message" in diag


def test_required_flag_can_come_from_config(tmp_path, capsys):
    corpus = generate_block_corpus(6, seed=13)
    corpus_path = tmp_path / "c.jsonl"
    write_corpus_jsonl(corpus, corpus_path)

    # --seed omitted on the command line entirely
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"seed": 3, "out": str(tmp_path / "ignored.json")}))
    out = tmp_path / "split.json"
    rc = cli_dispatch(["split", "--config", str(cfg_path),
                       "--in", str(corpus_path), "--out", str(out)])
    assert rc == 0, capsys.readouterr().err
    capsys.readouterr()
    # CLI value wins over the config file
    assert out.exists()
    assert not (tmp_path / "ignored.json").exists()

    # still an error when neither CLI nor config supplies a required flag
    cfg_path.write_text(json.dumps({}))
    rc = cli_dispatch(["split", "--config", str(cfg_path),
                       "--in", str(corpus_path), "--out", str(out)])
    assert rc == 2
    diag = _diag(capsys)
    assert "--seed" in diag["message"]


def test_config_file_rejects_unknown_keys(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"seeed": 3}))
    rc = cli_dispatch(["split", "--config", str(cfg_path),
                       "--in", "x.jsonl", "--out", "y.json"])
    assert rc == 2
    assert "seeed" in _diag(capsys)["message"]

    cfg_path.write_text(json.dumps({"seed": "not-an-int"}))
    rc = cli_dispatch(["split", "--config", str(cfg_path),
                       "--in", "x.jsonl", "--out", "y.json"])
    assert rc == 2
    assert "seed" in _diag(capsys)["message"]


def test_end_to_end(tmp_path, capsys):
    corpus = generate_block_corpus(10, seed=17)
    corpus_path = tmp_path / "corpus.jsonl"
    write_corpus_jsonl(corpus, corpus_path)
    split_path = tmp_path / "split.json"
    run_dir = tmp_path / "runs" / "crf"

    assert cli_dispatch(["split", "--in", str(corpus_path), "--seed", "3",
                         "--out", str(split_path)]) == 0

    rc = cli_dispatch([
        "train", "--in", str(corpus_path), "--split", str(split_path),
        "--variant", "crf", "--features", "hashing:16",
        "--epochs", "3", "--batch-docs", "4", "--seeds", "0",
        "--out", str(run_dir),
    ])
    assert rc == 0, capsys.readouterr().err
    out_text = capsys.readouterr().out
    assert "val macro F1" in out_text
    summary = json.loads((run_dir / "summary.json").read_text())
    assert summary["format"] == "rrseg-train-summary-v1"
    assert summary["seeds"] == [0]
    ckpt_dir = run_dir / "seed_00"
    assert (ckpt_dir / "weights.pt").exists()

    eval_dir = tmp_path / "runs" / "eval"
    rc = cli_dispatch([
        "evaluate", "--checkpoint", str(ckpt_dir),
        "--in", str(corpus_path), "--features", "hashing:16",
        "--split", str(split_path), "--part", "val",
        "--out", str(eval_dir),
    ])
    assert rc == 0, capsys.readouterr().err
    capsys.readouterr()
    report = json.loads((eval_dir / "report.json").read_text())
    assert 0.0 <= report["macro_f1"] <= 1.0

    # feature-source mismatch is a config error
    rc = cli_dispatch([
        "evaluate", "--checkpoint", str(ckpt_dir),
        "--in", str(corpus_path), "--features", "hashing:32",
        "--split", str(split_path), "--part", "val",
        "--out", str(tmp_path / "runs" / "bad"),
    ])
    assert rc == 2
    capsys.readouterr()

    report_dir = tmp_path / "runs" / "report"
    rc = cli_dispatch(["report", "--runs", str(tmp_path / "runs"),
                       "--out", str(report_dir)])
    assert rc == 0
    capsys.readouterr()
    assert (report_dir / "train_summaries.csv").exists()
    assert (report_dir / "checkpoints.csv").exists()
    assert (report_dir / "evals.csv").exists()
    per_label = (report_dir / "per_label.csv").read_text().splitlines()
    assert per_label[0] == "path,label,f1,support"
    assert len(per_label) > 1


def test_stats_json(tmp_path, capsys):
    corpus = generate_block_corpus(5, seed=19)
    corpus_path = tmp_path / "corpus.jsonl"
    write_corpus_jsonl(corpus, corpus_path)
    rc = cli_dispatch(["stats", "--in", str(corpus_path), "--level", "main", "--json"])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["docs"] == 5
    assert "ALL" in payload["label_distribution"]
    shift = payload["shift"]
    assert shift["micro_shift_rate"] == pytest.approx(1.0 - shift["micro_same_rate"])
    assert shift["shift_pairs"] <= shift["total_pairs"]
