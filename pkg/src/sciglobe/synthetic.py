"""Seeded synthetic corpora with known geography, for tests and benchmarks."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .aggregate import BROAD_FIELDS, FieldScheme
from .gazetteer import GazetteerClient, write_gazetteer
from .geo import GeoPoint
from .model import make_key, normalize_token

SOURCES = ("alpha", "beta")


@dataclass
class Site:
    city: str
    region: str
    country: str
    lat: float
    lon: float

    @property
    def key(self) -> str:
        return make_key(normalize_token(self.city), normalize_token(self.region), normalize_token(self.country))


def _offset(lat, lon, dist_km, bearing):
    # Destination point on the sphere.
    R = 6371.0
    phi1, lam1 = math.radians(lat), math.radians(lon)
    delta = dist_km / R
    phi2 = math.asin(math.sin(phi1) * math.cos(delta) + math.cos(phi1) * math.sin(delta) * math.cos(bearing))
    lam2 = lam1 + math.atan2(math.sin(bearing) * math.sin(delta) * math.cos(phi1),
                             math.cos(delta) - math.sin(phi1) * math.sin(phi2))
    lon2 = (math.degrees(lam2) + 540.0) % 360.0 - 180.0
    return max(-90.0, min(90.0, math.degrees(phi2))), lon2


def make_sites(rng: np.random.Generator, n_sites: int, n_countries: int) -> list[Site]:
    """Sites clustered around country centres spread uniformly over the sphere."""
    centres = [
        (math.degrees(math.asin(rng.uniform(-0.95, 0.95))), rng.uniform(-180.0, 180.0))
        for _ in range(n_countries)
    ]
    sites = []
    for i in range(n_sites):
        c = i % n_countries
        lat, lon = _offset(*centres[c], rng.uniform(0.0, 800.0), rng.uniform(0.0, 2 * math.pi))
        # Country 0 stands in for a region-significant country.
        country = "USA" if c == 0 else f"Country{c:03d}"
        region = f"S{i % 7}" if c == 0 else ""
        sites.append(Site(f"City{i:05d}", region, country, round(lat, 6), round(lon, 6)))
    return sites


def make_field_scheme(n_categories: int = 70, n_fields: int = 35) -> FieldScheme:
    cat = {f"C{i:03d}": f"F{i % n_fields:02d}" for i in range(n_categories)}
    broad = {f"F{j:02d}": BROAD_FIELDS[j % len(BROAD_FIELDS)] for j in range(n_fields)}
    return FieldScheme(cat, broad)


def make_gazetteer(rng, sites, conflict_rate=0.02, missing_rate=0.02, unknown_rate=0.01):
    """Two sources: ``alpha`` is exact, ``beta`` is jittered, sometimes wrong or absent."""
    alpha, beta = GazetteerClient("alpha"), GazetteerClient("beta")
    for s in sites:
        u = rng.random()
        if u < unknown_rate:
            continue
        alpha.table[s.key] = GeoPoint(s.lat, s.lon)
        if u < unknown_rate + missing_rate:
            continue
        if u < unknown_rate + missing_rate + conflict_rate:
            dist = rng.uniform(150.0, 2000.0)
        else:
            dist = rng.uniform(0.0, 5.0)
        lat, lon = _offset(s.lat, s.lon, dist, rng.uniform(0.0, 2 * math.pi))
        beta.table[s.key] = GeoPoint(round(lat, 6), round(lon, 6))
    return [alpha, beta]


def generate_records(rng, sites, n_pubs, year_min=1980, year_max=2009, n_categories=70, n_journals=200):
    """Yield corpus records; the chance of a distant partner grows with the year."""
    n_sites = len(sites)
    by_country: dict[str, list[int]] = {}
    for i, s in enumerate(sites):
        by_country.setdefault(s.country, []).append(i)
    # Zipf-like site popularity so address frequencies are skewed.
    pop = 1.0 / np.arange(1, n_sites + 1) ** 0.8
    pop /= pop.sum()
    span = max(1, year_max - year_min)
    batch = 4096
    doc_types = ("article", "article", "article", "review", "editorial", "letter")
    for start in range(0, n_pubs, batch):
        m = min(batch, n_pubs - start)
        years = rng.integers(year_min, year_max + 1, m)
        homes = rng.choice(n_sites, m, p=pop)
        n_addr = 1 + rng.poisson(1.3, m)
        u = rng.random((m, 8))
        partners = rng.choice(n_sites, (m, 8), p=pop)
        dtypes = rng.integers(0, len(doc_types), m)
        journals = rng.integers(0, n_journals, m)
        n_cat = 1 + rng.integers(0, 3, m)
        cats = rng.integers(0, n_categories, (m, 3))
        authors = rng.integers(0, 6, m)
        for r in range(m):
            year = int(years[r])
            t = (year - year_min) / span
            home = int(homes[r])
            k = min(int(n_addr[r]), 8)
            idx = [home]
            local = by_country[sites[home].country]
            for a in range(1, k):
                x = u[r, a]
                if x < 0.35:
                    idx.append(home)
                elif x < 0.75 - 0.3 * t:
                    idx.append(local[int(partners[r, a]) % len(local)])
                else:
                    idx.append(int(partners[r, a]))
            addrs = []
            for i in idx:
                s = sites[i]
                addrs.append({"city": s.city, "region": s.region or None, "country": s.country,
                              "is_reprint": False})
            if u[r, 0] < 0.1:
                s = sites[home]
                addrs.append({"city": s.city, "region": s.region or None, "country": s.country,
                              "is_reprint": True})
            yield {
                "id": f"P{start + r:08d}",
                "year": year,
                "doc_type": doc_types[int(dtypes[r])],
                "journal_id": f"J{int(journals[r]):04d}",
                "subject_categories": [f"C{int(c):03d}" for c in cats[r, : int(n_cat[r])]],
                "author_count": k + int(authors[r]),
                "addresses": addrs,
            }


def gen_synthetic(out_dir, n_pubs=10000, n_sites=500, n_countries=40, seed=0,
                  year_min=1980, year_max=2009) -> dict[str, Path]:
    """Write corpus.jsonl, gazetteer.tsv and fields.tsv into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    sites = make_sites(rng, n_sites, n_countries)
    paths = {
        "corpus": out / "corpus.jsonl",
        "gazetteer": out / "gazetteer.tsv",
        "fields": out / "fields.tsv",
    }
    write_gazetteer(paths["gazetteer"], make_gazetteer(rng, sites))
    make_field_scheme().save(paths["fields"])
    dumps = json.JSONEncoder(separators=(",", ":")).encode
    with open(paths["corpus"], "w", encoding="utf-8") as fh:
        for rec in generate_records(rng, sites, n_pubs, year_min, year_max):
            fh.write(dumps(rec))
            fh.write("\n")
    return paths
