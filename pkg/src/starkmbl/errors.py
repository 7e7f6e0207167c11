"""Exception types shared across the package."""


class StarkMBLError(Exception):
    """Base class for all package errors."""


class ParameterError(StarkMBLError, ValueError):
    """Invalid physical or numerical parameter."""


class ResourceError(StarkMBLError, RuntimeError):
    """Problem size exceeds what the chosen solver is allowed to handle."""


class NotFoundError(StarkMBLError, KeyError):
    """Requested configuration is not part of the basis."""


class ConfigError(ParameterError):
    """Malformed sweep configuration; the message names the offending field."""
