"""Riemannian geometry of fixed-rank SPSD matrices and parallel-transport
domain adaptation."""

from .errors import NumericalError, SpsdGeoError, ValidationError
from .spd import MeanConfig
from .spsd import CanonicalSet, SpsdMetricConfig, SpsdPoint, SpsdTangent

__version__ = "0.1.0"
