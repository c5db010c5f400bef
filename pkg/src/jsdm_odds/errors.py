"""Semantic exception hierarchy.

Public functions raise these instead of bare ValueError so callers can
distinguish bad mathematical inputs from structural misuse (shape or mode
mismatches) and from I/O problems.
"""


class JsdmError(Exception):
    """Base error for this package."""


class DomainError(JsdmError, ValueError):
    """Input outside the mathematical domain of an operation."""


class StructuralError(JsdmError, ValueError):
    """Shapes, indices, modes or required inputs do not line up."""


class IngestError(JsdmError, ValueError):
    """Malformed input file; message carries file/row/column context."""


class NumericalError(JsdmError, FloatingPointError):
    """Numerical failure that survived retries (e.g. Cholesky with jitter)."""
