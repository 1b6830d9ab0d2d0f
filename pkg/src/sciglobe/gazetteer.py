"""Address geocoding from offline gazetteers, with two-source reconciliation.

Unique addresses are ranked by how often they occur, the most frequent ones
are looked up in every configured source, and disagreement between sources
decides whether the preferred source is trusted or the address goes to a
manual review queue. Review verdicts come back through a TSV round trip.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import random
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Protocol, Union

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .geo import GeoPoint, great_circle_distance
from .model import Publication
from .validation import check_publications

log = logging.getLogger(__name__)


class Status(str, Enum):
    RESOLVED_AUTO = "resolved_auto"
    RESOLVED_MANUAL = "resolved_manual"
    PENDING_STRICT = "pending_review_strict"
    PENDING_CURSORY = "pending_review_cursory"
    UNKNOWN = "unknown"

    @property
    def resolved(self) -> bool:
        return self in (Status.RESOLVED_AUTO, Status.RESOLVED_MANUAL)

    @property
    def pending(self) -> bool:
        return self in (Status.PENDING_STRICT, Status.PENDING_CURSORY)


@dataclass(frozen=True)
class ReconcilePolicy:
    strict_distance_km: float = 50.0
    strict_min_occurrences: int = 200
    cursory_distance_km: float = 100.0
    preferred_source: Optional[str] = None
    top_k_addresses: int = 11000

    def __post_init__(self):
        if self.strict_distance_km <= 0 or self.cursory_distance_km <= 0:
            raise ValueError("distance thresholds must be positive")
        if self.strict_min_occurrences <= 0 or self.top_k_addresses <= 0:
            raise ValueError("strict_min_occurrences and top_k_addresses must be positive")
        if self.strict_distance_km >= self.cursory_distance_km:
            raise ValueError("strict_distance_km must be below cursory_distance_km")


@dataclass
class GeocodeEntry:
    key: str
    occurrences: int = 0
    candidates: dict[str, GeoPoint] = field(default_factory=dict)
    resolved: Optional[GeoPoint] = None
    status: Status = Status.UNKNOWN
    reviewed: bool = False

    def __post_init__(self):
        self.status = Status(self.status)
        if self.status.resolved and self.resolved is None:
            raise ValueError(f"{self.key}: resolved status without coordinates")
        if not self.status.resolved and self.resolved is not None:
            raise ValueError(f"{self.key}: coordinates on an unresolved entry")

    def disagreement_km(self) -> Optional[float]:
        """Largest distance between any two source candidates, None if fewer than two."""
        pts = list(self.candidates.values())
        if len(pts) < 2:
            return None
        return max(great_circle_distance(a, b) for a, b in itertools.combinations(pts, 2))


# -- geocoder sources -------------------------------------------------------


class GeocoderClient(Protocol):
    name: str

    def lookup(self, key: str) -> Optional[GeoPoint]: ...


@dataclass
class GazetteerClient:
    """Offline source: an in-memory table of address key to coordinates."""

    name: str
    table: dict[str, GeoPoint] = field(default_factory=dict)

    def lookup(self, key: str) -> Optional[GeoPoint]:
        return self.table.get(key)


def load_gazetteer(paths: Union[str, Path, Iterable[Union[str, Path]]]) -> dict[str, GazetteerClient]:
    """Read gazetteer TSV files (columns key, lat, lon, source).

    Returns one client per source, in order of first appearance.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    clients: dict[str, GazetteerClient] = {}
    for path in paths:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh, delimiter="\t")
            missing = {"key", "lat", "lon", "source"} - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"{path}: missing gazetteer columns {sorted(missing)}")
            for lineno, row in enumerate(reader, start=2):
                try:
                    pt = GeoPoint(float(row["lat"]), float(row["lon"]))
                except (TypeError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad coordinates: {exc}") from None
                src = row["source"]
                clients.setdefault(src, GazetteerClient(src)).table[row["key"]] = pt
    return clients


def write_gazetteer(path: Union[str, Path], clients: Iterable[GazetteerClient]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["key", "lat", "lon", "source"])
        for client in clients:
            for key in sorted(client.table):
                pt = client.table[key]
                w.writerow([key, repr(pt.lat), repr(pt.lon), client.name])


# -- ranking and reconciliation ----------------------------------------------


def count_addresses(corpus: Iterable[Publication]) -> Counter:
    """Occurrences of each address key over all address lists."""
    counts: Counter = Counter()
    for p in corpus:
        counts.update(a.key for a in p.addresses)
    return counts


def rank_addresses_by_occurrence(corpus: Union[Iterable[Publication], Mapping[str, int]]) -> list[tuple[str, int]]:
    """Address keys by descending occurrence count, ties broken by key."""
    counts = corpus if isinstance(corpus, Mapping) else count_addresses(corpus)
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


def reconcile(entry: GeocodeEntry, policy: ReconcilePolicy) -> GeocodeEntry:
    cands = entry.candidates
    if not cands:
        return replace(entry, resolved=None, status=Status.UNKNOWN)
    pref = policy.preferred_source
    chosen = cands[pref] if pref in cands else next(iter(cands.values()))
    d = entry.disagreement_km()
    if d is not None:
        occ = entry.occurrences
        if d > policy.strict_distance_km and occ > policy.strict_min_occurrences:
            return replace(entry, resolved=None, status=Status.PENDING_STRICT)
        if d > policy.cursory_distance_km and occ <= policy.strict_min_occurrences:
            return replace(entry, resolved=None, status=Status.PENDING_CURSORY)
    return replace(entry, resolved=chosen, status=Status.RESOLVED_AUTO)


def geocode_ranked(
    ranked: Iterable[tuple[str, int]],
    clients: Mapping[str, GeocoderClient],
    policy: ReconcilePolicy,
) -> list[GeocodeEntry]:
    """Look up and reconcile the top-k ranked keys; the rest stay unknown.

    Keys with an empty city component are never looked up.
    """
    out = []
    for rank, (key, occ) in enumerate(ranked):
        entry = GeocodeEntry(key, occ)
        if rank < policy.top_k_addresses and not key.startswith("|"):
            for name, client in clients.items():
                pt = client.lookup(key)
                if pt is not None:
                    entry.candidates[name] = pt
            entry = reconcile(entry, policy)
        out.append(entry)
    return out


class ReviewError(ValueError):
    pass


@dataclass(frozen=True)
class Verdict:
    """A reviewer decision: confirm a source, supply a point, or give up."""

    source: Optional[str] = None
    point: Optional[GeoPoint] = None
    unknown: bool = False

    @classmethod
    def parse(cls, text: str, sources: Iterable[str] = ()) -> "Verdict":
        text = text.strip()
        if text.lower() == "unknown":
            return cls(unknown=True)
        if text in set(sources):
            return cls(source=text)
        parts = text.replace(";", ",").split(",")
        if len(parts) == 2:
            try:
                return cls(point=GeoPoint(float(parts[0]), float(parts[1])))
            except ValueError:
                pass
        raise ReviewError(f"unrecognised verdict {text!r}")


def apply_review(entry: GeocodeEntry, verdict: Verdict) -> GeocodeEntry:
    if not entry.status.pending:
        raise ReviewError(f"{entry.key}: verdict on non-pending entry ({entry.status.value})")
    if verdict.unknown:
        return replace(entry, resolved=None, status=Status.UNKNOWN, reviewed=True)
    if verdict.point is not None:
        pt = verdict.point
    elif verdict.source is not None:
        if verdict.source not in entry.candidates:
            raise ReviewError(f"{entry.key}: source {verdict.source!r} has no candidate")
        pt = entry.candidates[verdict.source]
    else:
        raise ReviewError(f"{entry.key}: empty verdict")
    return replace(entry, resolved=pt, status=Status.RESOLVED_MANUAL, reviewed=True)


def resolved_coordinates(entries: Iterable[GeocodeEntry]) -> dict[str, GeoPoint]:
    """Key to coordinates for resolved entries only; pending and unknown are left out."""
    return {e.key: e.resolved for e in entries if e.status.resolved}


def coverage(entries: Iterable[GeocodeEntry]) -> float:
    """Occurrence-weighted share (0-100) of addresses that have coordinates."""
    total = hit = 0
    for e in entries:
        total += e.occurrences
        if e.status.resolved:
            hit += e.occurrences
    return 100.0 * hit / total if total else 0.0


def merge_with_cache(fresh: Iterable[GeocodeEntry], cached: Mapping[str, GeocodeEntry]) -> list[GeocodeEntry]:
    """Carry reviewed decisions over from a previous run.

    A reviewed entry survives when its source candidates are unchanged; its
    occurrence count is refreshed.
    """
    out = []
    for e in fresh:
        old = cached.get(e.key)
        if old is not None and old.reviewed and old.candidates == e.candidates:
            e = replace(old, occurrences=e.occurrences)
        out.append(e)
    return out


# -- audit --------------------------------------------------------------------


def audit_sample(entries: Iterable[GeocodeEntry], n: int, seed: int) -> list[tuple[str, GeoPoint]]:
    """Seeded uniform sample, without replacement, of resolved entries."""
    population = sorted((e.key, e.resolved) for e in entries if e.status.resolved)
    if n < 0 or n > len(population):
        raise ValueError(f"sample size {n} outside [0, {len(population)}]")
    return random.Random(seed).sample(population, n)


@dataclass
class AuditReport:
    compared: int
    threshold_km: float
    mismatches: list[tuple[str, float]]
    missing: list[str]

    @property
    def mismatch_count(self) -> int:
        return len(self.mismatches)


def audit_compare(
    resolved: Mapping[str, GeoPoint],
    verified: Iterable[tuple[str, GeoPoint]],
    threshold_km: float = 50.0,
) -> AuditReport:
    """Count verified coordinates lying more than ``threshold_km`` from the resolved ones."""
    mismatches, missing = [], []
    compared = 0
    for key, pt in verified:
        got = resolved.get(key)
        if got is None:
            missing.append(key)
            continue
        compared += 1
        d = great_circle_distance(got, pt)
        if d > threshold_km:
            mismatches.append((key, d))
    return AuditReport(compared, threshold_km, mismatches, missing)


def write_audit_sample(path, sample: Iterable[tuple[str, GeoPoint]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["key", "lat", "lon", "verified_lat", "verified_lon"])
        for key, pt in sample:
            w.writerow([key, repr(pt.lat), repr(pt.lon), "", ""])


def read_verified(path) -> list[tuple[str, GeoPoint]]:
    """Rows of a completed audit sample; rows left blank are skipped."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh, delimiter="\t"):
            lat, lon = row.get("verified_lat", ""), row.get("verified_lon", "")
            if lat.strip() and lon.strip():
                out.append((row["key"], GeoPoint(float(lat), float(lon))))
    return out


# -- cache and review queue files ------------------------------------------


def _pt(pt: Optional[GeoPoint]):
    return None if pt is None else [pt.lat, pt.lon]


def entry_to_record(e: GeocodeEntry) -> dict:
    return {
        "key": e.key,
        "occurrences": e.occurrences,
        "candidates": {k: _pt(v) for k, v in e.candidates.items()},
        "resolved": _pt(e.resolved),
        "status": e.status.value,
        "reviewed": e.reviewed,
    }


def entry_from_record(rec: dict) -> GeocodeEntry:
    res = rec.get("resolved")
    return GeocodeEntry(
        key=rec["key"],
        occurrences=int(rec["occurrences"]),
        candidates={k: GeoPoint(*v) for k, v in (rec.get("candidates") or {}).items()},
        resolved=None if res is None else GeoPoint(*res),
        status=Status(rec["status"]),
        reviewed=bool(rec.get("reviewed", False)),
    )


def write_cache(path, entries: Iterable[GeocodeEntry]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(json.dumps(entry_to_record(e), sort_keys=True))
            fh.write("\n")


def read_cache(path) -> dict[str, GeocodeEntry]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                e = entry_from_record(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad cache record: {exc}") from None
            out[e.key] = e
    return out


def write_review_queue(path, entries: Iterable[GeocodeEntry], sources: list[str]) -> int:
    """Export pending entries as TSV with an empty verdict column; returns row count."""
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        header = ["key", "occurrences", "status"]
        for s in sources:
            header += [f"{s}_lat", f"{s}_lon"]
        w.writerow(header + ["disagreement_km", "verdict"])
        for e in entries:
            if not e.status.pending:
                continue
            row = [e.key, e.occurrences, e.status.value]
            for s in sources:
                pt = e.candidates.get(s)
                row += ["", ""] if pt is None else [repr(pt.lat), repr(pt.lon)]
            d = e.disagreement_km()
            w.writerow(row + ["" if d is None else f"{d:.3f}", ""])
            n += 1
    return n


def read_review_verdicts(path, sources: Iterable[str]) -> dict[str, Verdict]:
    """Verdicts filled in by a reviewer; rows with an empty verdict are ignored."""
    sources = list(sources)
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh, delimiter="\t"):
            text = (row.get("verdict") or "").strip()
            if text:
                out[row["key"]] = Verdict.parse(text, sources)
    return out


def apply_verdicts(entries: Mapping[str, GeocodeEntry], verdicts: Mapping[str, Verdict]) -> dict[str, GeocodeEntry]:
    out = dict(entries)
    for key, verdict in verdicts.items():
        if key not in out:
            raise ReviewError(f"verdict for unknown key {key!r}")
        out[key] = apply_review(out[key], verdict)
    return out


# -- estimator ---------------------------------------------------------------


class GazetteerGeocoder(BaseEstimator):
    """Learn address coordinates for a corpus from one or more gazetteer sources.

    ``fit`` counts address occurrences, geocodes the ``top_k_addresses`` most
    frequent keys and reconciles the sources. ``transform`` returns the
    publications with resolved coordinates attached to their addresses.
    """

    def __init__(
        self,
        sources=None,
        strict_distance_km=50.0,
        strict_min_occurrences=200,
        cursory_distance_km=100.0,
        preferred_source=None,
        top_k_addresses=11000,
    ):
        self.sources = sources
        self.strict_distance_km = strict_distance_km
        self.strict_min_occurrences = strict_min_occurrences
        self.cursory_distance_km = cursory_distance_km
        self.preferred_source = preferred_source
        self.top_k_addresses = top_k_addresses

    def _clients(self) -> dict[str, GeocoderClient]:
        if self.sources is None:
            raise ValueError("no geocoder sources configured")
        if isinstance(self.sources, (str, Path)):
            return load_gazetteer(self.sources)
        if isinstance(self.sources, Mapping):
            return dict(self.sources)
        return {c.name: c for c in self.sources}

    def policy(self) -> ReconcilePolicy:
        clients = self._clients()
        pref = self.preferred_source if self.preferred_source is not None else next(iter(clients), None)
        return ReconcilePolicy(
            strict_distance_km=self.strict_distance_km,
            strict_min_occurrences=self.strict_min_occurrences,
            cursory_distance_km=self.cursory_distance_km,
            preferred_source=pref,
            top_k_addresses=self.top_k_addresses,
        )

    def fit(self, X, y=None):
        clients = self._clients()
        policy = self.policy()
        counts = count_addresses(check_publications(X))
        entries = geocode_ranked(rank_addresses_by_occurrence(counts), clients, policy)
        self.entries_ = {e.key: e for e in entries}
        self.coords_ = resolved_coordinates(entries)
        self.coverage_ = coverage(entries)
        self.source_names_ = list(clients)
        return self

    def transform(self, X):
        check_is_fitted(self, "coords_")
        coords = self.coords_
        out = []
        for p in check_publications(X):
            addrs = tuple(replace(a, coords=coords.get(a.key)) for a in p.addresses)
            out.append(replace(p, addresses=addrs))
        return out

    def fit_transform(self, X, y=None):
        X = list(check_publications(X))
        return self.fit(X).transform(X)

    def apply_verdicts(self, verdicts: Mapping[str, Verdict]):
        check_is_fitted(self, "entries_")
        self.entries_ = apply_verdicts(self.entries_, verdicts)
        self.coords_ = resolved_coordinates(self.entries_.values())
        self.coverage_ = coverage(self.entries_.values())
        return self

    def status_counts(self) -> Counter:
        check_is_fitted(self, "entries_")
        return Counter(e.status.value for e in self.entries_.values())
