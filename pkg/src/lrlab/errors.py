"""Exception types shared across the package."""


class LrlabError(Exception):
    """Base class for lrlab errors."""


class ConfigError(LrlabError):
    """Invalid experiment configuration; carries the offending field path."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


class ResourceCapError(LrlabError):
    """A resource guard was exceeded (e.g. the dense-matrix dimension cap)."""


class PropagatorAccuracyError(LrlabError):
    """The propagator engine could not reach the requested tolerance."""
