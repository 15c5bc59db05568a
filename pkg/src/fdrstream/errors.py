"""Exception hierarchy shared by every module."""


class FdrStreamError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FdrStreamError, ValueError):
    """A parameter or combination of parameters is invalid."""


class DegenerateDataError(FdrStreamError, ValueError):
    """Input data cannot support the requested estimate (e.g. zero variance)."""


class StateError(FdrStreamError, RuntimeError):
    """An object was used before it reached a usable state."""


class UsageError(FdrStreamError, ValueError):
    """A call violated its preconditions."""


class DomainError(FdrStreamError, ValueError):
    """A formula was evaluated outside its domain."""
