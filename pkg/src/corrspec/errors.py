"""Exception hierarchy.

Validation problems (bad inputs, broken preconditions) derive from
:class:`ValidationError`; failures of a numerical procedure on valid input
derive from :class:`NumericalError`. The CLI maps the two families onto
distinct exit codes.
"""

from __future__ import annotations


class CorrspecError(Exception):
    """Base class for all package errors."""


class ValidationError(CorrspecError, ValueError):
    """Input violates a documented precondition."""


class DomainError(ValidationError):
    """Argument outside the mathematical domain of an operation."""


class DegenerateSeriesError(ValidationError):
    """A series has zero variance and cannot be standardized."""


class ContractViolation(ValidationError):
    """Structural contract broken, e.g. a non-symmetric matrix."""


class ParseError(ValidationError):
    """Malformed input file."""


class NumericalError(CorrspecError, ArithmeticError):
    """A numerical procedure failed on otherwise valid input."""


class SingularityError(NumericalError):
    """Evaluation hit a pole."""


class ConvergenceError(NumericalError):
    """An iterative method did not converge."""


class BranchSelectionError(NumericalError):
    """No polynomial root satisfies the admissibility conditions."""

    def __init__(self, message: str, *, z: complex | None = None, roots=None):
        super().__init__(message)
        self.z = z
        self.roots = roots
