"""Input checking shared by the estimators."""

from __future__ import annotations

from typing import Iterable, Iterator

import numpy as np

from .model import DEFAULT_REGION_COUNTRIES, Publication


def check_publications(X, region_countries=DEFAULT_REGION_COUNTRIES) -> Iterator[Publication]:
    """Yield :class:`Publication` objects from publications or raw record dicts.

    Lazily converts, so arbitrarily long streams can be passed.
    """
    if isinstance(X, (Publication, dict, str, bytes)):
        raise TypeError("expected an iterable of publications, got a single item")
    for item in X:
        if isinstance(item, Publication):
            yield item
        elif isinstance(item, dict):
            yield Publication.from_record(item, region_countries)
        else:
            raise TypeError(f"cannot interpret {type(item).__name__} as a publication")


def check_coordinates(X) -> np.ndarray:
    """Return ``X`` as an (n, 2) float array of (lat, lon) degrees, validated."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected shape (n, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("coordinates contain NaN or inf")
    if np.any(np.abs(arr[:, 0]) > 90.0) or np.any(np.abs(arr[:, 1]) > 180.0):
        raise ValueError("coordinates out of range")
    return arr


def check_counts(counts, n: int) -> np.ndarray:
    arr = np.asarray(counts, dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"expected {n} counts, got shape {arr.shape}")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError("counts must be finite and non-negative")
    return arr


def check_weights(weights: Iterable[float]) -> list[float]:
    out = [float(w) for w in weights]
    if any(not (w >= 0.0) for w in out):
        raise ValueError("weights must be non-negative")
    return out
