import math

import numpy as np
import pytest

from sciglobe.geo import GeoPoint
from sciglobe.model import Publication, normalize_address
from sciglobe.synthetic import gen_synthetic


def make_pub(addresses, pid="P1", year=2005, doc_type="article", journal="J1",
             categories=("C1",), authors=None):
    """Publication from (city, region, country[, is_reprint]) tuples."""
    addrs = []
    for a in addresses:
        city, region, country, *rest = a
        addrs.append(normalize_address(city, region, country, is_reprint=bool(rest and rest[0])))
    return Publication(
        id=pid,
        year=year,
        doc_type=doc_type,
        journal_id=journal,
        subject_categories=tuple(categories),
        author_count=authors if authors is not None else max(1, len(addrs)),
        addresses=tuple(addrs),
    )


def random_points(rng: np.random.Generator, n: int) -> list[GeoPoint]:
    lats = np.degrees(np.arcsin(rng.uniform(-1.0, 1.0, n)))
    lons = rng.uniform(-180.0, 180.0, n)
    return [GeoPoint(float(a), float(b)) for a, b in zip(lats, lons)]


def random_corpus(seed: int, n_pubs: int = 300, n_sites: int = 40, n_countries: int = 6,
                  unresolved: float = 0.0, years=(2000, 2003)):
    """Publications plus a coords mapping over a random site set."""
    rng = np.random.default_rng(seed)
    pts = random_points(rng, n_sites)
    sites = [(f"city{i}", None, f"country{i % n_countries}") for i in range(n_sites)]
    keys = [normalize_address(*s).key for s in sites]
    coords = {k: p for k, p in zip(keys, pts) if rng.random() >= unresolved}
    pubs = []
    for i in range(n_pubs):
        k = int(rng.integers(1, 6))
        idx = rng.integers(0, n_sites, k)
        cats = [f"C{int(c)}" for c in rng.integers(0, 6, int(rng.integers(1, 4)))]
        pubs.append(make_pub([sites[j] for j in idx], pid=f"P{i}",
                             year=int(rng.integers(years[0], years[1] + 1)),
                             categories=cats, authors=int(rng.integers(1, 9))))
    return pubs, coords


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synthetic")
    gen_synthetic(out, n_pubs=5000, n_sites=200, n_countries=15, seed=7)
    return out


def rel_close(a, b, rel=1e-9):
    return math.isclose(a, b, rel_tol=rel, abs_tol=rel)


# Acceptance results collected by tests/test_acceptance.py, printed at the end.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
