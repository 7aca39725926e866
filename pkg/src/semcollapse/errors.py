"""Exception types shared across the package."""


class SemCollapseError(Exception):
    """Base class for all package errors."""


class InputError(SemCollapseError, ValueError):
    """Malformed input: wrong shape, non-finite values, mismatched manifolds."""


class DomainError(SemCollapseError, ValueError):
    """A well-formed input that falls outside an operation's valid domain."""


class UndefinedLogError(DomainError):
    """Logarithm map requested for a pair outside the injectivity radius."""


class DegenerateFitError(SemCollapseError, ValueError):
    pass


class BackendError(SemCollapseError, RuntimeError):
    """Token-model backend failed (transport or protocol)."""
