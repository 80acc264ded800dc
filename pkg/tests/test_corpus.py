import json

import pytest

from conftest import make_doc
from rrseg.corpus.adjudication import adjudicate, majority_primary, reduce_corpus
from rrseg.corpus.io import (
    import_webanno,
    load_label_mapping,
    read_corpus_jsonl,
    read_mapped_corpus_jsonl,
    write_corpus_jsonl,
)
from rrseg.corpus.preprocess import (
    RegexSentenceSplitter,
    apply_rules,
    default_rules,
    ingest_raw,
)
from rrseg.corpus.records import (
    AnnotationCell,
    CorpusSplit,
    DocumentRecord,
    SentenceRecord,
    select_docs,
)
from rrseg.corpus.splitting import split_corpus
from rrseg.corpus.stats import label_distribution, shift_statistic
from rrseg.errors import (
    AdjudicationError,
    AnnotationImportError,
    DataError,
)
from rrseg.labels import RhetoricalRole, parse_role


# --- records ---


def test_document_requires_contiguous_indices():
    s0 = SentenceRecord(index=0, text="a.")
    s2 = SentenceRecord(index=2, text="b.")
    with pytest.raises(DataError, match="contiguous"):
        DocumentRecord(doc_id="d", domain="IT", sentences=(s0, s2))


def test_document_rejects_unknown_domain():
    with pytest.raises(DataError, match="domain"):
        DocumentRecord(doc_id="d", domain="XX")


def test_tertiary_requires_secondary():
    with pytest.raises(DataError, match="tertiary"):
        AnnotationCell("a1", RhetoricalRole.FAC, None, RhetoricalRole.STA)


def test_gold_accessors_error_on_missing():
    doc = make_doc("d", ["FAC", "STA"])
    assert [r.value for r in doc.gold_roles()] == ["FAC", "STA"]
    bare = DocumentRecord(
        doc_id="d2", domain="IT",
        sentences=(SentenceRecord(index=0, text="x."),),
    )
    with pytest.raises(DataError, match="gold"):
        bare.gold_roles()
    with pytest.raises(DataError, match="gold"):
        bare.gold_main_labels()


def test_split_disjointness_enforced():
    with pytest.raises(DataError, match="disjoint"):
        CorpusSplit(train=("a", "b"), val=("b",), test=())


# --- jsonl io ---


def test_corpus_jsonl_roundtrip(tmp_path):
    docs = [make_doc("d1", ["FAC", "ISS", "ARG-P"]), make_doc("d2", ["STA"], domain="CL")]
    path = tmp_path / "c.jsonl"
    write_corpus_jsonl(docs, path)
    back = read_corpus_jsonl(path)
    assert back == docs


def test_corpus_jsonl_duplicate_doc_id(tmp_path):
    path = tmp_path / "c.jsonl"
    rows = [json.loads(line) for line in open_lines(tmp_path, [make_doc("d1", ["FAC"])])]
    with open(path, "w") as f:
        for _ in range(2):
            f.write(json.dumps(rows[0]) + "\n")
    with pytest.raises(AnnotationImportError, match="duplicate"):
        read_corpus_jsonl(path)


def open_lines(tmp_path, docs):
    p = tmp_path / "tmp_once.jsonl"
    write_corpus_jsonl(docs, p)
    return p.read_text().splitlines()


def test_mapped_corpus_read(tmp_path):
    raw = [
        {"doc_id": "x1", "domain": "G",
         "sentences": [{"text": "One.", "gold": "Facts"},
                       {"text": "Two.", "gold": "Junk"},
                       {"text": "Three.", "gold": "Ruling"}]},
    ]
    src = tmp_path / "ext.jsonl"
    src.write_text("\n".join(json.dumps(r) for r in raw) + "\n")
    mapping_path = tmp_path / "map.json"
    mapping_path.write_text(json.dumps({"Facts": "FAC", "Junk": "DROP", "Ruling": "RPC"}))
    docs = read_mapped_corpus_jsonl(src, load_label_mapping(mapping_path))
    assert len(docs) == 1
    assert [s.gold_main.value for s in docs[0].sentences] == ["FAC", "RPC"]
    assert all(s.gold is None for s in docs[0].sentences)


# --- webanno import ---

TSV_TEMPLATE = """#FORMAT=WebAnno TSV 3.3
#T_SP=custom.Role|primary|secondary|tertiary

#Text=The appellant filed the suit.
1-1\t0-3\tThe\t{l1}\t_\t_
1-2\t4-13\tappellant\t{l1}\t_\t_

#Text=The appeal is allowed.
2-1\t0-3\tThe\t{l2}[1]\t_\t_
2-2\t4-10\tappeal\t{l2}[1]\t_\t_
"""


def test_import_webanno_merges_annotators():
    sources = {
        "a1": TSV_TEMPLATE.format(l1="FAC", l2="RPC"),
        "a2": TSV_TEMPLATE.format(l1="FAC", l2="RPC"),
        "a3": TSV_TEMPLATE.format(l1="ISS", l2="RPC"),
    }
    doc = import_webanno("doc9", "IT", sources)
    assert len(doc.sentences) == 2
    cells = doc.sentences[0].annotations
    assert sorted(c.annotator_id for c in cells) == ["a1", "a2", "a3"]
    assert [c.primary.value for c in sorted(cells, key=lambda c: c.annotator_id)] == [
        "FAC", "FAC", "ISS",
    ]


def test_import_webanno_text_mismatch():
    sources = {
        "a1": TSV_TEMPLATE.format(l1="FAC", l2="RPC"),
        "a2": TSV_TEMPLATE.format(l1="FAC", l2="RPC").replace("appeal is", "claim is"),
    }
    with pytest.raises(AnnotationImportError, match="text differs"):
        import_webanno("doc9", "IT", sources)


def test_import_webanno_requires_format_header():
    with pytest.raises(AnnotationImportError, match="FORMAT"):
        import_webanno("d", "IT", {"a1": "#Text=Hi there.\n1-1\t0-2\tHi\tFAC\t_\t_\n"})


# --- adjudication ---


def annotated_doc(vote_rows):
    """vote_rows: per sentence, list of (annotator, code) votes."""
    sentences = []
    for i, votes in enumerate(vote_rows):
        cells = tuple(
            AnnotationCell(annotator_id=a, primary=parse_role(c)) for a, c in votes
        )
        sentences.append(SentenceRecord(index=i, text=f"s{i}.", annotations=cells))
    return DocumentRecord(doc_id="dj", domain="IT", sentences=tuple(sentences))


def test_majority_primary_rules():
    r = [parse_role(c) for c in ("FAC", "FAC", "ISS")]
    assert majority_primary("d", 0, r) is RhetoricalRole.FAC
    tied = [parse_role(c) for c in ("FAC", "ISS", "STA")]
    assert majority_primary("d", 0, tied) is None


def test_adjudicate_majority_and_tie():
    doc = annotated_doc([
        [("a1", "FAC"), ("a2", "FAC"), ("a3", "ISS")],
        [("a1", "FAC"), ("a2", "ISS"), ("a3", "STA")],
    ])
    adjudicated, unresolved = adjudicate(doc, None)
    assert adjudicated.sentences[0].gold is RhetoricalRole.FAC
    assert adjudicated.sentences[1].gold is None
    assert unresolved == [1]


def test_adjudicate_override_resolves_tie():
    doc = annotated_doc([
        [("a1", "FAC"), ("a2", "ISS"), ("a3", "STA")],
    ])
    adjudicated, unresolved = adjudicate(doc, {0: RhetoricalRole.ISS})
    assert adjudicated.sentences[0].gold is RhetoricalRole.ISS
    assert unresolved == []


def test_adjudicate_override_on_clear_majority_rejected():
    doc = annotated_doc([
        [("a1", "FAC"), ("a2", "FAC"), ("a3", "ISS")],
    ])
    with pytest.raises(AdjudicationError):
        adjudicate(doc, {0: RhetoricalRole.STA})


def test_adjudicate_override_out_of_range():
    doc = annotated_doc([[("a1", "FAC"), ("a2", "ISS"), ("a3", "STA")]])
    with pytest.raises(AdjudicationError):
        adjudicate(doc, {5: RhetoricalRole.FAC})


# --- reduction ---


def test_reduce_corpus_maps_and_drops():
    docs = [
        make_doc("k1", ["ISS", "ARG-R", "PRE-O", "NON"]),
        make_doc("k2", ["NON", "DIS"]),
    ]
    reduced, emptied = reduce_corpus(docs)
    assert emptied == ["k2"]
    assert len(reduced) == 1
    assert [s.gold_main.value for s in reduced[0].sentences] == ["FAC", "ARG", "PRE"]
    # indices are re-made contiguous after the drop
    assert [s.index for s in reduced[0].sentences] == [0, 1, 2]


# --- splitting ---


def test_split_corpus_partitions_and_is_deterministic():
    docs = [make_doc(f"d{i}", ["FAC", "STA"]) for i in range(12)]
    s1 = split_corpus(docs, seed=5)
    s2 = split_corpus(docs, seed=5)
    assert s1 == s2
    assert s1.all_doc_ids == {d.doc_id for d in docs}
    assert len(s1.val) == 2 and len(s1.test) == 2 and len(s1.train) == 8
    assert split_corpus(docs, seed=6) != s1


def test_split_corpus_by_domain():
    docs = [make_doc(f"i{i}", ["FAC"], domain="IT") for i in range(6)]
    docs += [make_doc(f"c{i}", ["FAC"], domain="CL") for i in range(6)]
    split = split_corpus(docs, seed=0, by_domain=True)
    for part in (split.train, split.val, split.test):
        domains = {d[0] for d in part}
        assert domains <= {"i", "c"}
    assert sum(1 for d in split.test if d.startswith("i")) == 1
    assert sum(1 for d in split.test if d.startswith("c")) == 1


def test_select_docs_preserves_requested_order():
    docs = [make_doc(f"d{i}", ["FAC"]) for i in range(4)]
    picked = select_docs(docs, ["d2", "d0"])
    assert [d.doc_id for d in picked] == ["d2", "d0"]
    with pytest.raises(DataError):
        select_docs(docs, ["nope"])


# --- stats ---


def test_label_distribution_zero_filled_by_domain():
    docs = [make_doc("d1", ["FAC", "FAC", "RPC"]),
            make_doc("d2", ["STA"], domain="CL")]
    dist = label_distribution(docs, level="main")
    assert dist["ALL"]["FAC"] == 2
    assert dist["IT"]["RPC"] == 1
    assert dist["CL"]["FAC"] == 0
    assert set(dist) == {"ALL", "IT", "CL"}


def test_shift_statistic_complement_exact():
    docs = [make_doc("d1", ["FAC", "FAC", "RPC", "RPC"]),
            make_doc("d2", ["STA", "RLC"])]
    stat = shift_statistic(docs)
    assert stat.total_pairs == 4
    assert stat.shift_pairs == 2
    assert stat.micro_shift_rate + stat.micro_same_rate == 1.0


def test_shift_statistic_no_pairs_errors():
    with pytest.raises(DataError):
        shift_statistic([make_doc("one", ["FAC"])])


# --- preprocessing ---


def test_default_rules_strip_noise():
    raw = "<b>Para 1.</b>&nbsp;The court   held so.\nVersus\nThe appeal fails."
    cleaned = apply_rules(raw, default_rules())
    assert "<b>" not in cleaned and "&nbsp;" not in cleaned
    assert "   " not in cleaned
    assert "Versus" not in cleaned


def test_regex_splitter_keeps_legal_abbreviations():
    spans = RegexSentenceSplitter().split(
        "The Hon. court examined s. 34 of the Act. The appeal is allowed."
    )
    assert len(spans) == 2


def test_ingest_raw_builds_unlabeled_doc():
    doc = ingest_raw(
        "The appellant filed a suit. The court dismissed it.",
        default_rules(), RegexSentenceSplitter(), doc_id="r1", domain="CL",
    )
    assert doc.doc_id == "r1"
    assert len(doc.sentences) == 2
    assert all(s.gold is None for s in doc.sentences)
