import json

import pytest

from sciglobe.io import CorpusReader, fixed_journal_filter, ingest, schema_check, write_corpus
from sciglobe.model import CorpusFilter

from conftest import make_pub


def rec(i, doc_type="article", year=2005, journal="J1", addresses=None):
    return {
        "id": f"P{i}",
        "year": year,
        "doc_type": doc_type,
        "journal_id": journal,
        "subject_categories": ["C1"],
        "author_count": 2,
        "addresses": addresses if addresses is not None else [
            {"city": "Leiden", "region": None, "country": "Netherlands", "is_reprint": False},
            {"city": "Delft", "region": None, "country": "Netherlands", "is_reprint": False},
        ],
    }


def write_lines(path, records):
    path.write_text("".join((r if isinstance(r, str) else json.dumps(r)) + "\n" for r in records))
    return path


def test_ingest_filters_doc_type(tmp_path):
    recs = [rec(i, doc_type="editorial" if i < 2 else "article") for i in range(10)]
    reader = ingest(write_lines(tmp_path / "c.jsonl", recs))
    pubs = list(reader)
    assert len(pubs) == 8
    assert reader.report.admitted == 8 and reader.report.rejected_type == 2 and reader.report.total == 10


def test_ingest_empty_file(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text("")
    reader = ingest(path)
    assert list(reader) == []
    assert reader.report.as_dict() == dict.fromkeys(reader.report.as_dict(), 0)


def test_ingest_skips_malformed(tmp_path):
    recs = [rec(i) for i in range(100)]
    recs[37] = '{"id": "broken", "year": '
    reader = ingest(write_lines(tmp_path / "c.jsonl", recs))
    assert len(list(reader)) == 99
    assert reader.report.malformed == 1 and reader.report.total == 100


@pytest.mark.parametrize("bad", [
    {"id": "x", "year": "soon", "doc_type": "article", "addresses": []},
    {"id": "x", "year": 2000, "doc_type": "article", "addresses": [{"city": "a", "country": ""}]},
    {"id": "x", "year": 2000, "doc_type": "article"},
    ["not", "an", "object"],
])
def test_malformed_variants(tmp_path, bad):
    reader = ingest(write_lines(tmp_path / "c.jsonl", [bad, rec(1)]))
    assert len(list(reader)) == 1 and reader.report.malformed == 1


def test_rejection_tallies(tmp_path):
    reprint_only = [{"city": "A", "country": "X", "is_reprint": True}]
    recs = [rec(0, year=1975), rec(1, addresses=[]), rec(2, year=2001, addresses=reprint_only),
            rec(3, year=1996, addresses=reprint_only), rec(4)]
    reader = ingest(write_lines(tmp_path / "c.jsonl", recs))
    assert [p.id for p in reader] == ["P3", "P4"]
    r = reader.report
    assert (r.rejected_year, r.rejected_no_address) == (1, 2)


def test_ingest_deterministic(tmp_path):
    recs = [rec(i, doc_type=("letter" if i % 3 == 0 else "article")) for i in range(30)]
    path = write_lines(tmp_path / "c.jsonl", recs)
    r1, r2 = ingest(path), ingest(path)
    assert list(r1) == list(r2) and r1.report == r2.report


def test_unreadable_file_fatal(tmp_path):
    with pytest.raises(FileNotFoundError):
        ingest(tmp_path / "nope.jsonl")


def journals_corpus():
    pubs = []
    for y in range(2000, 2010):
        pubs.append(make_pub([("a", None, "x")], pid=f"A{y}", year=y, journal="stable"))
    for y in range(2004, 2010):
        pubs.append(make_pub([("a", None, "x")], pid=f"B{y}", year=y, journal="newcomer"))
    return pubs


def test_fixed_journal_filter():
    out = fixed_journal_filter(journals_corpus(), (2000, 2009))
    assert {p.journal_id for p in out} == {"stable"} and len(out) == 10


def test_fixed_journal_single_year_window():
    out = fixed_journal_filter(journals_corpus(), (2005, 2005))
    assert {p.journal_id for p in out} == {"stable", "newcomer"}


def test_fixed_journal_filter_subset_and_idempotent():
    pubs = journals_corpus()
    once = fixed_journal_filter(pubs, (2000, 2009))
    assert all(p in pubs for p in once)
    assert fixed_journal_filter(once, (2000, 2009)) == once


def test_reader_fixed_journal_window(tmp_path):
    path = tmp_path / "c.jsonl"
    write_corpus(path, journals_corpus())
    reader = CorpusReader(path, CorpusFilter(1980, 2009, fixed_journal_window=(2000, 2009)))
    assert {p.journal_id for p in reader} == {"stable"}
    assert reader.report.rejected_journal == 6 and reader.report.admitted == 10


def test_write_read_round_trip(tmp_path):
    pubs = [make_pub([("New York", "NY", "USA"), ("Leiden", None, "Netherlands", True)], year=1990)]
    path = tmp_path / "c.jsonl"
    write_corpus(path, pubs)
    back = list(ingest(path))
    assert [a.key for a in back[0].addresses] == [a.key for a in pubs[0].addresses]


def test_schema_check(tmp_path):
    recs = [rec(0), '{"id": 1', {"id": "x", "year": 2000, "doc_type": "article",
                                 "addresses": [{"city": "a", "country": ""}]}]
    n, errors = schema_check(write_lines(tmp_path / "c.jsonl", recs))
    assert n == 3
    assert [line for line, _ in errors] == [2, 3]
