"""Exception hierarchy shared by every module."""

from __future__ import annotations


class PgradError(Exception):
    """Base class for all library errors."""


class InvalidParams(PgradError, ValueError):
    """Dimension or exponents violate N >= 2, p > 1, q > p - 1."""


class RegimeError(PgradError, ValueError):
    """A quantity was requested outside the exponent regime where it exists."""


class DomainError(PgradError, ValueError):
    """An argument lies outside the domain of a formula or a profile."""


class NumericalError(PgradError, ArithmeticError):
    """Base class for failures of a numerical kernel."""


class NonConvergence(NumericalError):
    """Adaptive refinement exhausted its budget before meeting the tolerance."""


class NonFinite(NumericalError):
    """A kernel produced or received a non-finite value."""


class StepUnderflow(NumericalError):
    """The ODE step size fell below the floor; usually signals a blow-up."""

    def __init__(self, message: str, last_r: float | None = None, partial=None):
        super().__init__(message)
        self.last_r = last_r
        self.partial = partial


class DegenerateGradient(NumericalError):
    """|u'| fell below the degeneracy floor so the operator is ill-posed there."""


class NoBracket(NumericalError):
    """Root finding was given an interval without a sign change."""


class Divergent(NumericalError):
    """A limit that was expected to exist does not settle."""


class InsufficientSamples(PgradError, ValueError):
    """Too few samples in the requested window."""


class SignChange(PgradError, ValueError):
    """Data that must keep one sign changes sign in the window."""


class ConflictingFits(PgradError):
    """Two mutually exclusive asymptotic fits both succeeded."""
