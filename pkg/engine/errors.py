"""
NucleiGrind — Exception hierarchy.
"""


class NucleiGridError(ValueError):
    """Base class for every domain error raised by the engine."""


class DimensionMismatch(NucleiGridError):
    """Array shapes or channel counts are incompatible."""


class UnknownInstance(NucleiGridError):
    """An instance id is not present in the label map."""


class MissingScale(NucleiGridError):
    """A configured decoder block has no prediction or target."""


class TooSmallInstance(NucleiGridError):
    """No instance is large enough for interior finite differences."""


class FormatError(NucleiGridError):
    """A PGM / SEF1 / JSON artifact is malformed."""


class InfeasiblePacking(NucleiGridError):
    """The fixture generator could not place an instance."""


class ConfigError(NucleiGridError):
    """A configuration value violates its invariant."""
