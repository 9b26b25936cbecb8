"""Exception types raised across the package.

Every error derives from :class:`HybridcastError` so callers (the CLI in
particular) can catch the whole family at once.
"""


class HybridcastError(Exception):
    """Base class for all package errors."""


class ConfigError(HybridcastError, ValueError):
    """A configuration document or argument is malformed."""


class ConfigInvalid(ConfigError):
    """A model configuration violates its invariants."""


# --- data pipeline ---------------------------------------------------------

class MissingColumn(HybridcastError, ValueError):
    pass


class EmptyFile(HybridcastError, ValueError):
    pass


class DuplicateTimestamp(HybridcastError, ValueError):
    pass


class AllMissingColumn(HybridcastError, ValueError):
    pass


class EmptyRange(HybridcastError, ValueError):
    pass


class UnknownColumn(HybridcastError, KeyError):
    pass


class FrameTooShort(HybridcastError, ValueError):
    pass


class DegenerateSplit(HybridcastError, ValueError):
    pass


class SchemaMismatch(HybridcastError, ValueError):
    pass


# --- models ----------------------------------------------------------------

class DimensionMismatch(HybridcastError, ValueError):
    pass


class SampleBudgetExceedsData(HybridcastError, ValueError):
    pass


class CacheMismatch(HybridcastError, ValueError):
    pass


class TooFewSamples(HybridcastError, ValueError):
    pass


class EmptyOof(HybridcastError, ValueError):
    pass


# --- metrics ---------------------------------------------------------------

class LengthMismatch(HybridcastError, ValueError):
    pass


class EmptyInput(HybridcastError, ValueError):
    pass


class ZeroVariance(HybridcastError, ValueError):
    pass
