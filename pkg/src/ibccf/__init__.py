"""Correlation-filter tracking with a center filter and four boundary filters.

The center filter localizes the target; four 1-D filters then move each
box edge independently, so the box can change aspect ratio. All five are
trained jointly, with a penalty that keeps each boundary filter nearly
orthogonal to the center filter over the cells they share.
"""

from .errors import (DataError, GenerationError, IBCCFError, InitializationError, NumericalFailure,
                     ParameterError, TrackingFailure, UsageError)
from .geometry import SIDES, BoundaryBox, CenterBox, Side
from .synthetic import Sequence, SynthSpec, aspect_sequence, synth_sequence
from .tracker import TrackerConfig, init, step

__version__ = "0.1.0"

__all__ = [
    "BoundaryBox", "CenterBox", "DataError", "GenerationError", "IBCCFError", "InitializationError",
    "NumericalFailure", "ParameterError", "SIDES", "Sequence", "Side", "SynthSpec", "TrackerConfig",
    "TrackingFailure", "UsageError", "__version__", "aspect_sequence", "init", "step", "synth_sequence",
]
