"""Exception types shared across the package."""


class FuzzyMobError(Exception):
    """Base class for every error raised by fuzzymob."""


class DomainError(FuzzyMobError, ValueError):
    """An argument lies outside the domain of a function."""


class NoActivationError(FuzzyMobError):
    """Every rule weight is zero, so the defuzzified value is undefined."""


class ConfigError(FuzzyMobError, ValueError):
    """Invalid configuration, map, or table data.

    ``key`` names the offending entity (a config key path, a vertex id, a site
    name, a table row) when one is known.
    """

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class ConnectivityError(ConfigError):
    """The path graph is not connected."""


class DanglingAnchorError(ConfigError):
    """A site references a vertex that is not in the graph."""


class MalformedFileError(ConfigError):
    """A data file could not be parsed."""


class RangeError(ConfigError):
    """A value in a data file is outside its allowed range."""


class DuplicateKeyError(ConfigError):
    """A data file defines the same key twice."""


class UnknownKeyError(ConfigError):
    """A data file or config references an unknown name."""


class IncompleteTableError(ConfigError):
    """A priority or rule table does not cover every required cell."""


class NoPathError(FuzzyMobError):
    """No path connects the requested vertices."""


class OutputError(FuzzyMobError, OSError):
    """An output file could not be written."""
