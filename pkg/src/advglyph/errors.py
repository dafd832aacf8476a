"""Exception types shared across the package.

Every error raised deliberately by this library derives from AdvGlyphError so
callers can catch package failures without swallowing programming errors such
as TypeError or IndexError, which are left as built-ins.
"""


class AdvGlyphError(Exception):
    """Base class for all package-specific errors."""


class EmptyInputError(AdvGlyphError, ValueError):
    """A pipeline entry point received empty or whitespace-only text."""


class SubstitutionError(AdvGlyphError, ValueError):
    """A character substitution was requested for a character with no
    replacement entry, or with an out-of-range variant index."""


class DataError(AdvGlyphError, ValueError):
    """A dataset file is malformed. The message carries the line number."""


class TrainingError(AdvGlyphError, RuntimeError):
    """Training could not proceed (degenerate labels, diverging loss)."""


class SolverError(AdvGlyphError, RuntimeError):
    """A surrogate regression system was singular or otherwise unsolvable."""


class AlignmentError(AdvGlyphError, ValueError):
    """Two interpretation maps that must share a token grid do not."""


class InvalidInputError(AdvGlyphError, ValueError):
    """An attack was started from an input the model already misclassifies."""


class SizeError(AdvGlyphError, ValueError):
    """An exact (exponential-cost) routine was asked to exceed its size cap."""


class ModelFormatError(AdvGlyphError, ValueError):
    """A model artifact is not in the expected binary format."""


class ConfigError(AdvGlyphError, ValueError):
    """A configuration document or run setup is invalid."""


class EmptyReportError(AdvGlyphError, RuntimeError):
    """An evaluation had no correctly-classified inputs to attack."""
