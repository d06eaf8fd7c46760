"""Interference alignment vs. TDMA and SU-MIMO in dense MIMO networks.

Closed-form effective sum-rates under training-based CSI and path loss,
a matrix-level Monte Carlo path to cross-check them, and a sweep harness.
"""

from .errors import AlignmentError, ConfigError, InfeasibleError, NumericalError

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "ConfigError",
    "InfeasibleError",
    "NumericalError",
    "__version__",
]
