"""Corpus files: streaming ingestion with filtering and accounting.

A corpus is a JSON Lines file, one publication per line::

    {"id": "P1", "year": 2005, "doc_type": "article", "journal_id": "J1",
     "subject_categories": ["AA"], "author_count": 3,
     "addresses": [{"city": "Leiden", "region": null,
                    "country": "Netherlands", "is_reprint": false}]}
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

import jsonschema

from .model import (
    DEFAULT_REGION_COUNTRIES,
    CorpusFilter,
    Publication,
    apply_reprint_rule,
    rejection_reason,
)

__all__ = [
    "CorpusFilter",
    "CorpusReader",
    "IngestReport",
    "RECORD_SCHEMA",
    "apply_reprint_rule",
    "fixed_journal_filter",
    "ingest",
    "permanent_journals",
    "schema_check",
    "write_corpus",
]

log = logging.getLogger(__name__)

RECORD_SCHEMA = {
    "type": "object",
    "required": ["id", "year", "doc_type", "addresses"],
    "properties": {
        "id": {"type": ["string", "integer"]},
        "year": {"type": "integer"},
        "doc_type": {"type": "string"},
        "journal_id": {"type": ["string", "integer"]},
        "subject_categories": {"type": "array", "items": {"type": "string"}},
        "author_count": {"type": "integer", "minimum": 1},
        "addresses": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["country"],
                "properties": {
                    "city": {"type": ["string", "null"]},
                    "region": {"type": ["string", "null"]},
                    "country": {"type": "string", "minLength": 1},
                    "is_reprint": {"type": "boolean"},
                },
            },
        },
    },
}


@dataclass
class IngestReport:
    total: int = 0
    admitted: int = 0
    rejected_type: int = 0
    rejected_year: int = 0
    rejected_no_address: int = 0
    rejected_journal: int = 0
    malformed: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


class CorpusReader:
    """Iterate over the admitted publications of a corpus file.

    Every pass re-reads the file and rebuilds ``report``. With a fixed
    journal window, a first pass collects the journals that publish in every
    year of the window.
    """

    def __init__(self, path: Union[str, Path], flt: CorpusFilter = CorpusFilter(),
                 region_countries=DEFAULT_REGION_COUNTRIES):
        self.path = Path(path)
        if not self.path.is_file():
            raise FileNotFoundError(f"corpus file not found: {self.path}")
        self.filter = flt
        self.region_countries = region_countries
        self.report = IngestReport()
        self._journals: Optional[set] = None

    def _admitted(self, report: IngestReport) -> Iterator[Publication]:
        flt = self.filter
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                report.total += 1
                try:
                    p = Publication.from_record(json.loads(line), self.region_countries)
                except (ValueError, KeyError, TypeError, AttributeError):
                    report.malformed += 1
                    continue
                p = apply_reprint_rule(p, flt.reprint_cutoff_year)
                reason = rejection_reason(p, flt)
                if reason is None:
                    yield p
                elif reason == "type":
                    report.rejected_type += 1
                elif reason == "year":
                    report.rejected_year += 1
                else:
                    report.rejected_no_address += 1

    def __iter__(self) -> Iterator[Publication]:
        window = self.filter.fixed_journal_window
        if window is not None and self._journals is None:
            self._journals = permanent_journals(self._admitted(IngestReport()), window)
        self.report = report = IngestReport()
        for p in self._admitted(report):
            if self._journals is not None and p.journal_id not in self._journals:
                report.rejected_journal += 1
                continue
            report.admitted += 1
            yield p


def ingest(path, flt: CorpusFilter = CorpusFilter(), region_countries=DEFAULT_REGION_COUNTRIES) -> CorpusReader:
    """Open a corpus for streaming; iterate the result, then read its ``report``."""
    return CorpusReader(path, flt, region_countries)


def permanent_journals(corpus: Iterable[Publication], window: tuple[int, int]) -> set:
    """Journals with at least one publication in every year of ``window``."""
    y0, y1 = window
    years = defaultdict(set)
    for p in corpus:
        if y0 <= p.year <= y1:
            years[p.journal_id].add(p.year)
    need = y1 - y0 + 1
    return {j for j, ys in years.items() if len(ys) == need}


def fixed_journal_filter(corpus: Iterable[Publication], window: tuple[int, int]) -> list[Publication]:
    pubs = list(corpus)
    keep = permanent_journals(pubs, window)
    return [p for p in pubs if p.journal_id in keep]


def write_corpus(path, pubs: Iterable[Publication]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for p in pubs:
            fh.write(json.dumps(p.to_record(), separators=(",", ":")))
            fh.write("\n")
            n += 1
    return n


def schema_check(path, max_errors: int = 20) -> tuple[int, list[tuple[int, str]]]:
    """Validate every line of a corpus file; returns (lines checked, errors)."""
    validator = jsonschema.Draft7Validator(RECORD_SCHEMA)
    errors = []
    n = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            n += 1
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                errors.append((lineno, f"invalid JSON: {exc.msg}"))
                continue
            err = jsonschema.exceptions.best_match(validator.iter_errors(rec))
            if err is not None:
                where = "/".join(str(x) for x in err.absolute_path) or "<record>"
                errors.append((lineno, f"{where}: {err.message}"))
            if len(errors) >= max_errors:
                break
    return n, errors
