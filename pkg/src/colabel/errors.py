"""Exception hierarchy shared across the package.

Everything a caller can recover from derives from :class:`DomainError`;
the CLI maps these to exit code 1 and the HTTP layer to 4xx responses.
"""


class DomainError(Exception):
    """Base class for recoverable domain failures."""

    code = "domain-error"

    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.details = details or {}


class InvalidClassError(DomainError):
    code = "invalid-class"


class ValidationError(DomainError):
    code = "validation-failure"


class InsufficientDataError(DomainError):
    code = "insufficient-data"


class DegenerateDistributionError(DomainError):
    code = "degenerate-distribution"


class NoAnnotationsError(DomainError):
    code = "no-annotations"


class InfeasibleError(DomainError):
    code = "infeasible"


class CoverageError(DomainError):
    code = "coverage-error"


class ConfigurationError(DomainError):
    code = "configuration-error"


class StoreError(DomainError):
    code = "store-error"


class CorruptLogError(StoreError):
    code = "corrupt-log"


class UnknownEntityError(StoreError):
    code = "unknown-entity"


class RoundClosedError(StoreError):
    code = "round-closed"


class ConflictError(StoreError):
    code = "conflict"


class AuthError(StoreError):
    code = "auth-error"
