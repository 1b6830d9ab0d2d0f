"""Collaboration distance of a publication and the indicators built on it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .geo import GeoPoint, _haversine
from .model import Publication
from .validation import check_publications

MLDC_KM = 200.0
LDC_KM = 1000.0
VLDC_KM = 5000.0


@dataclass(frozen=True, slots=True)
class GcdResult:
    value_km: Optional[float]
    geocoded_addresses: int
    dropped_addresses: int

    @property
    def defined(self) -> bool:
        return self.value_km is not None

    @property
    def downward_biased(self) -> bool:
        return self.dropped_addresses > 0 and self.geocoded_addresses >= 1


def _max_pairwise(points) -> float:
    pts = list(points)
    best = 0.0
    for i in range(1, len(pts)):
        lat1, lon1 = pts[i]
        for j in range(i):
            lat2, lon2 = pts[j]
            d = _haversine(lat1, lon1, lat2, lon2)
            if d > best:
                best = d
    return best


def gcd(p: Publication, coords: Optional[Mapping[str, GeoPoint]] = None) -> GcdResult:
    """Largest distance between two addresses of ``p`` with known coordinates.

    Coordinates come from ``coords`` (keyed by address key) when given,
    otherwise from the addresses themselves. One known address gives 0 km;
    none gives an undefined value.
    """
    known = 0
    points = set()
    for a in p.addresses:
        pt = coords.get(a.key) if coords is not None else a.coords
        if pt is not None:
            known += 1
            points.add((pt.lat, pt.lon))
    dropped = len(p.addresses) - known
    if known == 0:
        return GcdResult(None, 0, dropped)
    return GcdResult(_max_pairwise(points), known, dropped)


def threshold_flags(g: GcdResult) -> Optional[tuple[bool, bool, bool]]:
    """(>200 km, >1000 km, >5000 km), or None when the GCD is undefined."""
    v = g.value_km
    if v is None:
        return None
    return v > MLDC_KM, v > LDC_KM, v > VLDC_KM


def copub_flags(p: Publication) -> tuple[bool, bool]:
    """(co-publication, international co-publication) from the address text."""
    keys = {a.key for a in p.addresses}
    countries = {a.country for a in p.addresses}
    return len(keys) > 1, len(countries) > 1


@dataclass(frozen=True)
class IndicatorSummary:
    """Indicators for one aggregation cell.

    Distance indicators (``mgcd_km`` and ``pct_*ldc``) are taken over
    publications with a defined GCD and are None when that set has zero
    weight; ``frac_pubs_gcd`` is that set's weight.
    """

    frac_pubs: float
    frac_pubs_gcd: float
    mgcd_km: Optional[float]
    pct_mldc: Optional[float]
    pct_ldc: Optional[float]
    pct_vldc: Optional[float]
    pct_copub: Optional[float]
    pct_intl_copub: Optional[float]
    mean_authors: Optional[float]


class IndicatorAccumulator:
    """Weighted partial sums behind an :class:`IndicatorSummary`.

    Accumulators merge associatively, so shards can be summed independently.
    """

    __slots__ = ("w_all", "w_gcd", "s_gcd", "s_mldc", "s_ldc", "s_vldc", "s_copub", "s_intl", "s_authors")

    def __init__(self):
        self.w_all = self.w_gcd = self.s_gcd = 0.0
        self.s_mldc = self.s_ldc = self.s_vldc = 0.0
        self.s_copub = self.s_intl = self.s_authors = 0.0

    def add(self, gcd_km: Optional[float], copub: bool, intl: bool, authors: int, weight: float = 1.0):
        self.w_all += weight
        if copub:
            self.s_copub += weight
        if intl:
            self.s_intl += weight
        self.s_authors += weight * authors
        if gcd_km is not None:
            self.w_gcd += weight
            self.s_gcd += weight * gcd_km
            if gcd_km > MLDC_KM:
                self.s_mldc += weight
                if gcd_km > LDC_KM:
                    self.s_ldc += weight
                    if gcd_km > VLDC_KM:
                        self.s_vldc += weight

    def merge(self, other: "IndicatorAccumulator") -> "IndicatorAccumulator":
        for name in self.__slots__:
            setattr(self, name, getattr(self, name) + getattr(other, name))
        return self

    def copy(self) -> "IndicatorAccumulator":
        return IndicatorAccumulator().merge(self)

    def summary(self) -> IndicatorSummary:
        # Ratio first, then scale: a full share is exactly 100 and nesting
        # of the sums carries over to the percentages.
        wa, wg = self.w_all, self.w_gcd
        dist = wg > 0.0
        base = wa > 0.0
        return IndicatorSummary(
            frac_pubs=wa,
            frac_pubs_gcd=wg,
            mgcd_km=self.s_gcd / wg if dist else None,
            pct_mldc=100.0 * (self.s_mldc / wg) if dist else None,
            pct_ldc=100.0 * (self.s_ldc / wg) if dist else None,
            pct_vldc=100.0 * (self.s_vldc / wg) if dist else None,
            pct_copub=100.0 * (self.s_copub / wa) if base else None,
            pct_intl_copub=100.0 * (self.s_intl / wa) if base else None,
            mean_authors=self.s_authors / wa if base else None,
        )


def summarize(items: Iterable[tuple[Publication, GcdResult, float]]) -> IndicatorSummary:
    acc = IndicatorAccumulator()
    for p, g, w in items:
        if w < 0:
            raise ValueError("negative weight")
        copub, intl = copub_flags(p)
        acc.add(g.value_km, copub, intl, p.author_count, w)
    return acc.summary()


class CollaborationDistance(BaseEstimator, TransformerMixin):
    """Per-publication GCD as a transformer.

    ``transform`` returns an (n, 4) array: GCD in km (NaN when undefined)
    followed by the three distance-class flags as 0/1 (NaN when undefined).
    """

    def __init__(self, coords=None):
        self.coords = coords

    def fit(self, X=None, y=None):
        return self

    def __sklearn_is_fitted__(self):
        # Stateless: the coordinates are a constructor parameter.
        return True

    def transform(self, X):
        rows = []
        for p in check_publications(X):
            g = gcd(p, self.coords)
            flags = threshold_flags(g)
            if flags is None:
                rows.append((np.nan, np.nan, np.nan, np.nan))
            else:
                rows.append((g.value_km, *map(float, flags)))
        return np.array(rows, dtype=float).reshape(-1, 4)

    def get_feature_names_out(self, input_features=None):
        return np.array(["gcd_km", "mldc", "ldc", "vldc"], dtype=object)
