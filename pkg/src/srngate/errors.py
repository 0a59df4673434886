"""Exception types shared across the library."""


class SrnError(Exception):
    """Base class for all srngate errors."""


class DimensionError(SrnError):
    """Operands have incompatible shapes."""


class NumericalError(SrnError):
    """A computation produced non-finite values."""


class FormatError(SrnError):
    """A model or dataset file could not be parsed."""


class ConfigError(SrnError):
    """A configuration value violates its documented constraints."""
