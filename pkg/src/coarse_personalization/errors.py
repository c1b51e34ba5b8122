"""Exception hierarchy. The CLI maps these onto exit codes."""


class CoarseError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(CoarseError, ValueError):
    """Invalid solver, experiment or generator settings (CLI exit code 2)."""


class DataError(CoarseError, ValueError):
    """Malformed or inconsistent input data (CLI exit code 3)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DomainError(CoarseError, ValueError):
    """A treatment level or dimension index outside the treatment space."""


class StructuralError(CoarseError, ValueError):
    """A policy that does not fit the population it is evaluated on."""


class EnumerationCapError(ConfigurationError):
    """Brute-force enumeration refused because it is too large."""

    def __init__(self, count, cap):
        super().__init__(
            f"enumeration of {count:,} candidates exceeds the cap of {cap:,}")
        self.count = count
        self.cap = cap
