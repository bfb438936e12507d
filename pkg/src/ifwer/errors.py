"""Exception types shared across the package."""


class IfwerError(Exception):
    """Base class for all package-specific errors."""


class DomainError(IfwerError, ValueError):
    """An input value lies outside the domain of an operation."""


class ConfigError(IfwerError, ValueError):
    """A configuration is invalid or infeasible for the requested level."""


class StateError(IfwerError, RuntimeError):
    """An operation was attempted in a session state that forbids it."""


class QuarantineError(IfwerError, RuntimeError):
    """A hidden bit or quarantined p-value was read before it was released."""


class JournalError(IfwerError, ValueError):
    """A journal does not match its inputs or has been tampered with."""


class FitError(IfwerError, RuntimeError):
    """Model fitting failed, e.g. on a degenerate design matrix."""
