"""Exception hierarchy used across the package."""


class FaceredError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(FaceredError, ValueError):
    """Operands live over different algebra specs or incompatible shapes."""


class InvalidFaceError(FaceredError, ValueError):
    """A face descriptor does not satisfy the idempotent invariants."""


class SingularElementError(FaceredError, ArithmeticError):
    """An inverse was requested for an element with (near-)zero eigenvalues."""


class DomainError(FaceredError, ValueError):
    """An argument violates the stated precondition of an operation."""


class NotInDualError(FaceredError, ValueError):
    """A candidate reducing direction is not in the dual of the current face."""


class InfeasibleAffineError(FaceredError, ValueError):
    """The linear system A x = b is inconsistent."""


class InfeasibleProblemError(FaceredError, ValueError):
    """The conic feasibility problem appears to have no solution."""


class CertificateUnavailableError(FaceredError, RuntimeError):
    """A reduction chain did not reach a constraint qualification."""


class ParseError(FaceredError, ValueError):
    """A problem file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
