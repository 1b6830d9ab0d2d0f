"""Distance-based indicators of scientific globalisation from publication addresses."""

from .aggregate import (
    CellAggregator,
    FieldScheme,
    GeographicDispersion,
    GlobalisationIndicators,
    annual_growth,
    annual_growth_rate,
    classify_country_map,
    dispersion,
    fractionalize,
)
from .gazetteer import GazetteerGeocoder, ReconcilePolicy, reconcile
from .geo import EARTH_RADIUS_KM, GeoPoint, great_circle_distance
from .indicators import CollaborationDistance, IndicatorSummary, gcd, summarize
from .io import CorpusFilter, ingest
from .model import Address, Publication, normalize_address

__version__ = "0.1.0"
