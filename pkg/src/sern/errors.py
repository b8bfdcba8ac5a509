"""Exception types shared across the package.

The CLI maps these onto exit codes: ParameterError -> 2,
ResourceError -> 3, OSError -> 4.
"""


class SernError(Exception):
    """Base class for package errors."""


class ParameterError(SernError, ValueError):
    """Invalid argument or configuration value."""


class IntegrityError(SernError, RuntimeError):
    """Internal consistency check failed (corrupt store, bad file)."""


class ResourceError(SernError, RuntimeError):
    """A size or allocation limit was exceeded."""
