"""Publication and address records, address canonicalisation, admission rules."""

from __future__ import annotations

import re
import unicodedata
from functools import lru_cache
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from .geo import GeoPoint

KEY_SEP = "|"

# Normalised country tokens whose addresses keep the state/province.
DEFAULT_REGION_COUNTRIES = frozenset(
    {"usa", "us", "united states", "united states of america", "canada"}
)

DOC_TYPES = ("article", "review", "other")

_WS = re.compile(r"\s+")


def normalize_token(text: Optional[str]) -> str:
    """Trim, case-fold, strip diacritics and collapse whitespace.

    The key separator is not allowed inside a token and is replaced by a space.
    """
    if not text:
        return ""
    if text.isascii():
        return _WS.sub(" ", text.lower().replace(KEY_SEP, " ")).strip()
    decomposed = unicodedata.normalize("NFKD", text)
    stripped = "".join(c for c in decomposed if not unicodedata.combining(c))
    stripped = stripped.casefold().replace(KEY_SEP, " ")
    return _WS.sub(" ", stripped).strip()


def make_key(city: str, region: str, country: str) -> str:
    return f"{city}{KEY_SEP}{region}{KEY_SEP}{country}"


def split_key(key: str) -> tuple[str, str, str]:
    city, region, country = key.split(KEY_SEP)
    return city, region, country


@dataclass(frozen=True, slots=True)
class Address:
    """One affiliation address reduced to (city, region, country).

    ``key`` is derived from the three normalised tokens. An empty ``city``
    means the address cannot be geocoded.
    """

    city: str
    region: str
    country: str
    is_reprint: bool = False
    raw: str = ""
    coords: Optional[GeoPoint] = None
    key: str = field(init=False, compare=False)

    def __post_init__(self):
        if not self.country:
            raise ValueError("address has no country")
        object.__setattr__(self, "key", make_key(self.city, self.region, self.country))

    @property
    def geocodable(self) -> bool:
        return bool(self.city)


def normalize_address(
    raw_city: Optional[str],
    raw_region: Optional[str],
    raw_country: Optional[str],
    region_countries: Iterable[str] = DEFAULT_REGION_COUNTRIES,
    is_reprint: bool = False,
) -> Address:
    """Canonicalise raw address parts into an :class:`Address`.

    Raises ValueError when the country is empty after normalisation.
    """
    if not isinstance(region_countries, frozenset):
        region_countries = frozenset(region_countries)
    return _normalize_cached(raw_city, raw_region, raw_country, region_countries, bool(is_reprint))


# Keyed on the raw strings, so the cache grows with the number of distinct
# raw addresses rather than with the corpus.
@lru_cache(maxsize=1 << 20)
def _normalize_cached(raw_city, raw_region, raw_country, region_countries, is_reprint) -> Address:
    country = normalize_token(raw_country)
    if not country:
        raise ValueError("empty country")
    city = normalize_token(raw_city)
    region = normalize_token(raw_region) if country in region_countries else ""
    raw = ", ".join(p for p in (raw_city, raw_region, raw_country) if p)
    return Address(city, region, country, is_reprint=is_reprint, raw=raw)


@lru_cache(maxsize=256)
def normalize_doc_type(value: Optional[str]) -> str:
    token = normalize_token(value)
    return token if token in DOC_TYPES else "other"


@dataclass(slots=True)
class Publication:
    id: str
    year: int
    doc_type: str
    journal_id: str
    subject_categories: tuple[str, ...]
    author_count: int
    addresses: tuple[Address, ...]

    def __post_init__(self):
        if self.author_count < 1:
            raise ValueError(f"publication {self.id}: author_count must be positive")

    @classmethod
    def from_record(cls, rec: dict, region_countries=DEFAULT_REGION_COUNTRIES) -> "Publication":
        """Build from one decoded corpus record (see the record format in the README)."""
        addresses = tuple(
            normalize_address(
                a.get("city"),
                a.get("region"),
                a.get("country"),
                region_countries,
                is_reprint=bool(a.get("is_reprint", False)),
            )
            for a in rec["addresses"]
        )
        return cls(
            id=str(rec["id"]),
            year=int(rec["year"]),
            doc_type=normalize_doc_type(rec.get("doc_type")),
            journal_id=str(rec.get("journal_id", "")),
            subject_categories=tuple(str(c) for c in rec.get("subject_categories", ())),
            author_count=int(rec.get("author_count", 1)),
            addresses=addresses,
        )

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "year": self.year,
            "doc_type": self.doc_type,
            "journal_id": self.journal_id,
            "subject_categories": list(self.subject_categories),
            "author_count": self.author_count,
            "addresses": [
                {
                    "city": a.city,
                    "region": a.region or None,
                    "country": a.country,
                    "is_reprint": a.is_reprint,
                }
                for a in self.addresses
            ],
        }


@dataclass(frozen=True)
class CorpusFilter:
    """Selection criteria applied while reading a corpus."""

    year_min: int = 1980
    year_max: int = 2009
    doc_types: frozenset = frozenset({"article", "review"})
    reprint_cutoff_year: int = 1997
    fixed_journal_window: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if self.year_min > self.year_max:
            raise ValueError("year_min must not exceed year_max")
        if self.fixed_journal_window is not None:
            y0, y1 = self.fixed_journal_window
            if y0 > y1:
                raise ValueError("fixed journal window start must not exceed its end")


def apply_reprint_rule(p: Publication, cutoff: int = 1997) -> Publication:
    """Drop reprint addresses from publications that appeared after ``cutoff``."""
    if p.year <= cutoff or not any(a.is_reprint for a in p.addresses):
        return p
    return replace(p, addresses=tuple(a for a in p.addresses if not a.is_reprint))


def rejection_reason(p: Publication, flt: CorpusFilter) -> Optional[str]:
    """Return why ``p`` fails ``flt`` ('type', 'year', 'no_address'), or None."""
    if p.doc_type not in flt.doc_types:
        return "type"
    if not flt.year_min <= p.year <= flt.year_max:
        return "year"
    if not p.addresses:
        return "no_address"
    return None


def admit_publication(p: Publication, flt: CorpusFilter) -> bool:
    return rejection_reason(apply_reprint_rule(p, flt.reprint_cutoff_year), flt) is None
