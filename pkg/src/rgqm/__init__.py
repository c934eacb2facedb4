"""Discrete mode-by-mode renormalization group flows for one-dimensional quantum mechanics."""

__version__ = "0.1.0"

from .core import FlowParams, FreqConvention, ModeVector  # noqa: E402
from .errors import (ConfigError, ConvexityError, NegativeGapError, NonConvergence,  # noqa: E402
                     QuadratureNonConvergence, RGQMError)
from .models import AnharmonicSpec, SpectrumResult  # noqa: E402

__all__ = ["FlowParams", "FreqConvention", "ModeVector", "AnharmonicSpec", "SpectrumResult",
           "RGQMError", "ConfigError", "ConvexityError", "NonConvergence",
           "QuadratureNonConvergence", "NegativeGapError", "__version__"]
