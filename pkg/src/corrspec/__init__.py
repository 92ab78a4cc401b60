"""Spectra of financial correlation matrices under cluster factor models.

Simulation of factor models, exact block spectra, the noise-dressed
density of a degenerate true spectrum, Marchenko-Pastur fitting,
goodness-of-fit tests and threshold-based cluster filtering.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BranchSelectionError,
    ConvergenceError,
    CorrspecError,
    NumericalError,
    ValidationError,
)
