"""Great-circle distance on a spherical Earth."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_KM = 6371.0
MAX_DISTANCE_KM = math.pi * EARTH_RADIUS_KM


@dataclass(frozen=True, slots=True)
class GeoPoint:
    """A latitude/longitude pair in degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        lat, lon = float(self.lat), float(self.lon)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise ValueError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= lat <= 90.0:
            raise ValueError(f"latitude {lat} outside [-90, 90]")
        if not -180.0 <= lon <= 180.0:
            raise ValueError(f"longitude {lon} outside [-180, 180]")
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", lon)


def _haversine(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    # |dlon| is computed symmetrically and folded into [0, 180] so that
    # d(a, b) == d(b, a) bit for bit and the antimeridian wraps to zero.
    dlon = abs(lon2 - lon1)
    if dlon > 180.0:
        dlon = 360.0 - dlon
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    s_lat = math.sin(abs(phi2 - phi1) * 0.5)
    s_lon = math.sin(math.radians(dlon) * 0.5)
    h = s_lat * s_lat + math.cos(phi1) * math.cos(phi2) * s_lon * s_lon
    if h > 1.0:
        h = 1.0
    return 2.0 * EARTH_RADIUS_KM * math.asin(math.sqrt(h))


def great_circle_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Haversine distance in kilometres between two points."""
    return _haversine(a.lat, a.lon, b.lat, b.lon)


def haversine_to_many(lat: float, lon: float, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    """Vectorised distance from one point to arrays of points, in km."""
    dlon = np.abs(lons - lon)
    dlon = np.where(dlon > 180.0, 360.0 - dlon, dlon)
    phi1 = np.radians(lat)
    phi2 = np.radians(lats)
    s_lat = np.sin(np.abs(phi2 - phi1) * 0.5)
    s_lon = np.sin(np.radians(dlon) * 0.5)
    h = s_lat * s_lat + np.cos(phi1) * np.cos(phi2) * s_lon * s_lon
    np.minimum(h, 1.0, out=h)
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(h))
