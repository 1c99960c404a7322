"""Guaranteed cost structured control for LQ cooperative differential games."""
from .errors import (
    AllShortfall,
    MarginShortfall,
    NotHurwitz,
    NotStabilizing,
    Rejection,
    Shortfall,
    ValidationError,
)
from .model import (
    DirectedGraph,
    GameDefinition,
    GcscProblem,
    Mode,
    StructuredGain,
    WeightVector,
)

__version__ = "0.1.0"
