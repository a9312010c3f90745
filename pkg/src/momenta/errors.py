"""Exception hierarchy shared by all momenta modules."""


class MomentaError(Exception):
    """Base class for all library errors."""


class DomainError(MomentaError, ValueError):
    """An argument is outside the documented domain of an operation."""


class MissingData(DomainError):
    """A table-backed family is shorter than the requested order."""


class BracketError(DomainError):
    """A root bracket does not actually bracket a sign change."""


class NoConvergence(MomentaError, RuntimeError):
    """An iterative computation did not certify its tolerance.

    The best value computed so far and its error estimate are attached so
    callers may still inspect them.
    """

    def __init__(self, message, value=None, error=None):
        super().__init__(message)
        self.value = value
        self.error = error


class FitUnstable(MomentaError, RuntimeError):
    """A least-squares fit has residuals above the configured bound."""


class SymmetryViolation(MomentaError, RuntimeError):
    """A matrix that must be symmetric by construction is not."""


class SingularMatrix(MomentaError, RuntimeError):
    """Gaussian elimination met a vanishing pivot."""
