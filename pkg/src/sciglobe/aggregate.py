"""Fractional counting, per-cell aggregation, growth statistics and dispersion."""

from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .geo import GeoPoint, haversine_to_many
from .indicators import IndicatorAccumulator, IndicatorSummary, gcd
from .model import Publication
from .validation import check_coordinates, check_counts, check_publications

ALL = "ALL"
UNCLASSIFIED = "unclassified"
BROAD_FIELDS = ("ET", "MLA", "NCM", "SHA")
DIMENSIONS = ("all", "country", "field", "broad_field")
FRACTIONAL_MODES = ("proportional", "equal-country")


@dataclass
class FieldScheme:
    """Subject category to field, and field to broad field."""

    category_field: dict[str, str] = field(default_factory=dict)
    field_broad: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for f, b in self.field_broad.items():
            if b not in BROAD_FIELDS:
                raise ValueError(f"field {f!r}: unknown broad field {b!r}")
        orphan = set(self.category_field.values()) - set(self.field_broad)
        if orphan:
            raise ValueError(f"fields without a broad field: {sorted(orphan)}")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "FieldScheme":
        """Read a TSV with columns category_code, field_code, broad_field_code."""
        cat, broad = {}, {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh, delimiter="\t")
            need = {"category_code", "field_code", "broad_field_code"}
            if not need <= set(reader.fieldnames or ()):
                raise ValueError(f"{path}: expected columns {sorted(need)}")
            for lineno, row in enumerate(reader, start=2):
                c, f, b = row["category_code"], row["field_code"], row["broad_field_code"]
                if cat.get(c, f) != f:
                    raise ValueError(f"{path}:{lineno}: category {c!r} mapped to two fields")
                if broad.get(f, b) != b:
                    raise ValueError(f"{path}:{lineno}: field {f!r} in two broad fields")
                cat[c] = f
                broad[f] = b
        return cls(cat, broad)

    def save(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(["category_code", "field_code", "broad_field_code"])
            for c in sorted(self.category_field):
                f = self.category_field[c]
                w.writerow([c, f, self.field_broad[f]])

    def unmapped(self, categories: Iterable[str]) -> set[str]:
        return {c for c in categories if c not in self.category_field}

    def field_of(self, category: str) -> str:
        return self.category_field.get(category, UNCLASSIFIED)

    def broad_of(self, category: str) -> str:
        f = self.category_field.get(category)
        return UNCLASSIFIED if f is None else self.field_broad[f]


@dataclass(frozen=True)
class FractionalAssignment:
    pub_id: str
    shares: tuple[tuple[str, float], ...]


def _shares(units: list[str]) -> tuple[tuple[str, float], ...]:
    if len(units) == 1:
        return ((units[0], 1.0),)
    counts = Counter(units)
    n = len(units)
    return tuple((u, c / n) for u, c in sorted(counts.items()))


def fractionalize(
    p: Publication,
    dimension: str,
    scheme: Optional[FieldScheme] = None,
    mode: str = "proportional",
) -> FractionalAssignment:
    """Split one publication's unit weight over the cells of ``dimension``.

    Countries get weight proportional to their share of the address list
    (``mode='equal-country'`` splits equally over distinct countries).
    Fields split equally over subject categories and then accumulate per
    field; categories the scheme does not know go to ``'unclassified'``.
    """
    if dimension == "all":
        return FractionalAssignment(p.id, ((ALL, 1.0),))
    if dimension == "country":
        countries = [a.country for a in p.addresses]
        if not countries:
            raise ValueError(f"publication {p.id} has no addresses")
        if mode == "equal-country":
            countries = sorted(set(countries))
        elif mode != "proportional":
            raise ValueError(f"unknown fractional mode {mode!r}")
        return FractionalAssignment(p.id, _shares(countries))
    if dimension in ("field", "broad_field"):
        if scheme is None:
            raise ValueError(f"dimension {dimension!r} needs a field scheme")
        cats = p.subject_categories
        if not cats:
            return FractionalAssignment(p.id, ((UNCLASSIFIED, 1.0),))
        lookup = scheme.field_of if dimension == "field" else scheme.broad_of
        return FractionalAssignment(p.id, _shares([lookup(c) for c in cats]))
    raise ValueError(f"unknown dimension {dimension!r}")


_ALL_SHARES = ((ALL, 1.0),)


_FIELD_MEMO_SIZE = 1 << 14


class CellAggregator:
    """Streaming accumulation of indicator sums per (dimension, unit, year).

    Memory grows with the number of cells, never with the number of
    publications. Two aggregators over disjoint shards can be merged.
    """

    def __init__(self, partitions=("all", "country"), scheme: Optional[FieldScheme] = None,
                 mode: str = "proportional", coords: Optional[Mapping[str, GeoPoint]] = None):
        for d in partitions:
            if d not in DIMENSIONS:
                raise ValueError(f"unknown dimension {d!r}")
        if mode not in FRACTIONAL_MODES:
            raise ValueError(f"unknown fractional mode {mode!r}")
        self.partitions = tuple(partitions)
        self.scheme = scheme
        self.mode = mode
        self.coords = coords
        self.cells: dict[tuple[str, str, int], IndicatorAccumulator] = defaultdict(IndicatorAccumulator)
        self.n_pubs = 0
        self.n_gcd_defined = 0
        self.n_biased = 0
        self.unmapped_categories: Counter = Counter()
        self._field_shares: dict = {}

    def add(self, p: Publication) -> None:
        g = gcd(p, self.coords)
        addrs = p.addresses
        countries = {a.country for a in addrs}
        intl = len(countries) > 1
        copub = intl or len({a.key for a in addrs}) > 1
        value = g.value_km
        authors = p.author_count
        year = p.year
        self.n_pubs += 1
        if value is not None:
            self.n_gcd_defined += 1
            if g.dropped_addresses:
                self.n_biased += 1
        if self.scheme is not None:
            for c in p.subject_categories:
                if c not in self.scheme.category_field:
                    self.unmapped_categories[c] += 1
        cells = self.cells
        for dim in self.partitions:
            if dim == "all":
                shares = _ALL_SHARES
            elif dim == "country":
                if intl:
                    shares = fractionalize(p, dim, None, self.mode).shares
                else:
                    shares = ((addrs[0].country, 1.0),)
            else:
                # Category tuples repeat heavily; memoise their split, but keep
                # the memo bounded so memory does not grow with corpus size.
                ck = (dim, p.subject_categories)
                shares = self._field_shares.get(ck)
                if shares is None:
                    shares = fractionalize(p, dim, self.scheme, self.mode).shares
                    if len(self._field_shares) >= _FIELD_MEMO_SIZE:
                        self._field_shares.clear()
                    self._field_shares[ck] = shares
            for unit, w in shares:
                cells[dim, unit, year].add(value, copub, intl, authors, w)

    def update(self, corpus: Iterable[Publication]) -> "CellAggregator":
        for p in corpus:
            self.add(p)
        return self

    def merge(self, other: "CellAggregator") -> "CellAggregator":
        for k, acc in other.cells.items():
            self.cells[k].merge(acc)
        self.n_pubs += other.n_pubs
        self.n_gcd_defined += other.n_gcd_defined
        self.n_biased += other.n_biased
        self.unmapped_categories.update(other.unmapped_categories)
        return self

    def years(self) -> list[int]:
        return sorted({y for _, _, y in self.cells})

    def units(self, dimension: str) -> list[str]:
        return sorted({u for d, u, _ in self.cells if d == dimension})

    def summaries(self, dimension: str) -> dict[tuple[str, int], IndicatorSummary]:
        """Per (unit, year) summaries for one dimension."""
        return {
            (u, y): acc.summary()
            for (d, u, y), acc in sorted(self.cells.items())
            if d == dimension
        }

    def window(self, dimension: str, y0: int, y1: int) -> dict[str, IndicatorSummary]:
        """Per-unit summaries pooled over the years ``y0..y1`` inclusive."""
        pooled: dict[str, IndicatorAccumulator] = {}
        for (d, u, y), acc in sorted(self.cells.items()):
            if d == dimension and y0 <= y <= y1:
                pooled.setdefault(u, IndicatorAccumulator()).merge(acc)
        return {u: acc.summary() for u, acc in sorted(pooled.items())}

    def trend(self, dimension: str = "all", unit: str = ALL) -> list["TrendPoint"]:
        return [
            TrendPoint(y, acc.summary())
            for (d, u, y), acc in sorted(self.cells.items())
            if d == dimension and u == unit
        ]


def aggregate_cells(
    corpus: Iterable[Publication],
    partitions=("all", "country"),
    scheme: Optional[FieldScheme] = None,
    coords: Optional[Mapping[str, GeoPoint]] = None,
    mode: str = "proportional",
) -> dict[tuple[str, str, int], IndicatorSummary]:
    agg = CellAggregator(partitions, scheme, mode, coords).update(corpus)
    return {k: acc.summary() for k, acc in sorted(agg.cells.items())}


# -- growth ------------------------------------------------------------------


@dataclass(frozen=True)
class TrendPoint:
    year: int
    summary: IndicatorSummary


def _series_values(series, metric: Optional[str]) -> dict[int, float]:
    if isinstance(series, Mapping):
        return {int(y): v for y, v in series.items()}
    out = {}
    prev = None
    for tp in series:
        if prev is not None and tp.year <= prev:
            raise ValueError("trend years must be strictly increasing")
        prev = tp.year
        out[tp.year] = getattr(tp.summary, metric or "mgcd_km")
    return out


def _endpoints(series, metric, y0, y1) -> tuple[float, float]:
    if not y0 < y1:
        raise ValueError(f"need y0 < y1, got {y0}, {y1}")
    values = _series_values(series, metric)
    missing = [y for y in (y0, y1) if values.get(y) is None]
    if missing:
        raise KeyError(f"no value for year(s) {missing}")
    return values[y0], values[y1]


def annual_growth(series, metric: Optional[str] = "mgcd_km", y0: int = 0, y1: int = 0) -> float:
    """Mean absolute change per year between ``y0`` and ``y1``.

    ``series`` is a list of :class:`TrendPoint` or a mapping year -> value.
    """
    v0, v1 = _endpoints(series, metric, y0, y1)
    return (v1 - v0) / (y1 - y0)


def annual_growth_rate(series, metric: Optional[str] = "mgcd_km", y0: int = 0, y1: int = 0) -> float:
    """Compound annual growth rate between ``y0`` and ``y1``, in percent."""
    v0, v1 = _endpoints(series, metric, y0, y1)
    if v0 <= 0:
        raise ValueError(f"growth rate needs a positive base value, got {v0}")
    return 100.0 * ((v1 / v0) ** (1.0 / (y1 - y0)) - 1.0)


# -- dispersion --------------------------------------------------------------

_BLOCK = 256


def _dispersion_numerator(lats, lons, counts, threads: int) -> float:
    # Fixed-size row blocks summed in block order: the result does not
    # depend on the thread count.
    def block(start):
        stop = min(start + _BLOCK, len(lats))
        s = 0.0
        for i in range(start, stop):
            d = haversine_to_many(lats[i], lons[i], lats, lons)
            s += counts[i] * float(np.dot(counts, d))
        return s

    starts = range(0, len(lats), _BLOCK)
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(block, starts))
    else:
        parts = [block(s) for s in starts]
    return math.fsum(parts)


def dispersion(locations, counts=None, self_pairs: bool = True, threads: int = 1) -> float:
    """Occurrence-weighted mean distance between two addresses, in km.

    ``locations`` is either an (U, 2) array of unique (lat, lon) with
    ``counts`` giving occurrences, or a mapping key -> (GeoPoint, count).
    With ``self_pairs`` the i == j terms stay in the denominator, as in the
    unrestricted double sum; without them, pairs of the same location are
    dropped.
    """
    if isinstance(locations, Mapping):
        items = [v for _, v in sorted(locations.items())]
        coords = np.array([(pt.lat, pt.lon) for pt, _ in items], dtype=float).reshape(-1, 2)
        counts = np.array([n for _, n in items], dtype=float)
    else:
        coords = check_coordinates(locations) if len(locations) else np.empty((0, 2))
        counts = np.ones(len(coords)) if counts is None else check_counts(counts, len(coords))
    if len(coords) == 0 or counts.sum() <= 0:
        raise ValueError("dispersion of an empty address set")
    num = _dispersion_numerator(coords[:, 0], coords[:, 1], counts, threads)
    total = math.fsum(counts)
    den = total * total
    if not self_pairs:
        den -= math.fsum(counts * counts)
        if den <= 0:
            raise ValueError("no pairs of distinct locations")
    return num / den


class AddressOccurrences:
    """Per-year occurrence counts of address keys, for dispersion."""

    def __init__(self):
        self.by_year: dict[int, Counter] = defaultdict(Counter)

    def add(self, p: Publication) -> None:
        self.by_year[p.year].update(a.key for a in p.addresses)

    def locations(self, years: Iterable[int], coords: Mapping[str, GeoPoint]) -> dict[str, tuple[GeoPoint, int]]:
        """Resolved address keys with their pooled counts over ``years``."""
        pooled: Counter = Counter()
        for y in years:
            pooled.update(self.by_year.get(y, {}))
        return {k: (coords[k], n) for k, n in pooled.items() if k in coords}


# -- map classes -------------------------------------------------------------

MAP_CLASSES = ("white", "dark_blue", "light_blue", "green", "yellow", "red")
MIN_MAP_PUBS = 200.0


def map_class(frac_pubs: float, mgcd_km: Optional[float]) -> str:
    if frac_pubs < MIN_MAP_PUBS or mgcd_km is None:
        return "white"
    if mgcd_km < 1000.0:
        return "dark_blue"
    if mgcd_km < 2000.0:
        return "light_blue"
    if mgcd_km < 3000.0:
        return "green"
    if mgcd_km <= 4000.0:
        return "yellow"
    return "red"


def classify_country_map(stats: Mapping[str, tuple[float, Optional[float]]]) -> dict[str, str]:
    """Colour class per country from (fractional output, MGCD) over a window."""
    return {c: map_class(n, m) for c, (n, m) in sorted(stats.items())}


# -- estimators --------------------------------------------------------------


class GlobalisationIndicators(BaseEstimator):
    """Fit per-cell globalisation indicators on a publication stream.

    After ``fit``, ``aggregator_`` holds the cell sums; ``summaries_`` maps
    each dimension to its (unit, year) summaries.
    """

    def __init__(self, partitions=("all", "country"), field_scheme=None,
                 fractional="proportional", coords=None):
        self.partitions = partitions
        self.field_scheme = field_scheme
        self.fractional = fractional
        self.coords = coords

    def _new_aggregator(self) -> CellAggregator:
        scheme = self.field_scheme
        if isinstance(scheme, (str, Path)):
            scheme = FieldScheme.load(scheme)
        return CellAggregator(self.partitions, scheme, self.fractional, self.coords)

    def fit(self, X, y=None):
        self.aggregator_ = self._new_aggregator()
        return self.partial_fit(X)

    def partial_fit(self, X, y=None):
        if not hasattr(self, "aggregator_"):
            self.aggregator_ = self._new_aggregator()
        self.aggregator_.update(check_publications(X))
        self.summaries_ = {d: self.aggregator_.summaries(d) for d in self.aggregator_.partitions}
        return self

    def trend(self, dimension="all", unit=ALL):
        check_is_fitted(self, "aggregator_")
        return self.aggregator_.trend(dimension, unit)

    def window(self, dimension, y0, y1):
        check_is_fitted(self, "aggregator_")
        return self.aggregator_.window(dimension, y0, y1)


class GeographicDispersion(BaseEstimator):
    """Dispersion of address occurrences, overall and per year."""

    def __init__(self, coords=None, self_pairs=True, n_jobs=1):
        self.coords = coords
        self.self_pairs = self_pairs
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        if self.coords is None:
            raise ValueError("GeographicDispersion needs a coords mapping")
        occ = AddressOccurrences()
        for p in check_publications(X):
            occ.add(p)
        self.occurrences_ = occ
        self.dispersion_by_year_ = {}
        for yr in sorted(occ.by_year):
            locs = occ.locations([yr], self.coords)
            self.dispersion_by_year_[yr] = (
                dispersion(locs, self_pairs=self.self_pairs, threads=self.n_jobs) if locs else None
            )
        locs = occ.locations(occ.by_year, self.coords)
        self.dispersion_ = dispersion(locs, self_pairs=self.self_pairs, threads=self.n_jobs) if locs else None
        return self
