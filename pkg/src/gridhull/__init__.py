"""Feasible sets of zonal power exchanges in aggregated DC networks.

Computes the image of generator and line constraints under a bus-to-region
aggregation (exactly or by inner/outer approximation), NTC bounds and their
safety, and the non-convex set of strongly feasible reduced states.
"""

from .errors import (
    DisconnectedNetworkError,
    GridhullError,
    InputError,
    NtcDataError,
    ParseError,
    ResourceError,
    SolverError,
    StructuralError,
    UnboundedError,
)
from .netmodel import Bus, Line, NetworkModel
from .polytope import Polyhedron, PolyUnion
from .project import AggregationMap, ApproxSet

__version__ = "0.1.0"

__all__ = [
    "AggregationMap",
    "ApproxSet",
    "Bus",
    "DisconnectedNetworkError",
    "GridhullError",
    "InputError",
    "Line",
    "NetworkModel",
    "NtcDataError",
    "ParseError",
    "PolyUnion",
    "Polyhedron",
    "ResourceError",
    "SolverError",
    "StructuralError",
    "UnboundedError",
]
