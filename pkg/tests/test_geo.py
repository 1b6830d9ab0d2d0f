import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sciglobe.geo import EARTH_RADIUS_KM, GeoPoint, great_circle_distance, haversine_to_many

lats = st.floats(-90.0, 90.0, allow_nan=False)
lons = st.floats(-180.0, 180.0, allow_nan=False)
points = st.builds(GeoPoint, lats, lons)

# Reference value from a 40-digit chord-length evaluation (mpmath), not haversine.
LEIDEN_NEW_YORK_KM = 5845.506388490103


def test_identity():
    assert great_circle_distance(GeoPoint(0, 0), GeoPoint(0, 0)) == 0.0


def test_antipodal():
    d = great_circle_distance(GeoPoint(0, 0), GeoPoint(0, 180))
    assert d == pytest.approx(20015.087, abs=1e-3)
    assert d == pytest.approx(math.pi * EARTH_RADIUS_KM, abs=1e-9)


def test_one_equatorial_degree():
    assert great_circle_distance(GeoPoint(0, 0), GeoPoint(0, 1)) == pytest.approx(111.195, abs=1e-3)


def test_leiden_new_york_against_reference():
    d = great_circle_distance(GeoPoint(52.16, 4.49), GeoPoint(40.71, -74.01))
    assert d == pytest.approx(LEIDEN_NEW_YORK_KM, abs=1e-6)


@pytest.mark.parametrize("lat,lon", [(91, 0), (-90.5, 0), (0, 180.01), (0, -181), (float("nan"), 0), (0, float("inf"))])
def test_rejects_invalid(lat, lon):
    with pytest.raises(ValueError):
        GeoPoint(lat, lon)


@given(points, points)
def test_symmetric_and_bounded(a, b):
    d = great_circle_distance(a, b)
    assert d == great_circle_distance(b, a)
    assert 0.0 <= d <= math.pi * EARTH_RADIUS_KM + 1e-6


@given(points)
def test_self_distance_zero(a):
    assert great_circle_distance(a, a) == 0.0


@given(lats)
def test_longitude_wrap(lat):
    assert great_circle_distance(GeoPoint(lat, -180.0), GeoPoint(lat, 180.0)) == 0.0


@settings(max_examples=300)
@given(points, points, points)
def test_triangle_inequality(a, b, c):
    assert great_circle_distance(a, c) <= great_circle_distance(a, b) + great_circle_distance(b, c) + 1e-6


def test_vectorised_matches_scalar():
    rng = np.random.default_rng(3)
    la = np.degrees(np.arcsin(rng.uniform(-1, 1, 200)))
    lo = rng.uniform(-180, 180, 200)
    got = haversine_to_many(la[0], lo[0], la, lo)
    want = [great_circle_distance(GeoPoint(la[0], lo[0]), GeoPoint(a, b)) for a, b in zip(la, lo)]
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-9)
