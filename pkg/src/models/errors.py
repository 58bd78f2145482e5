"""Domain exceptions."""


class LocalizationError(Exception):
    """Base class for all errors raised by the localization suite."""


class InvalidDimensionError(LocalizationError, ValueError):
    """Map construction parameters are out of range."""


class OriginOccupiedError(LocalizationError, ValueError):
    """A ray was cast from inside an occupied (or off-map) cell."""


class ShapeMismatchError(LocalizationError, ValueError):
    """Paired arrays (bearings/ranges, poses/weights) differ in length."""


class ZeroWeightError(LocalizationError, ValueError):
    """Normalization was asked for a set whose weights are all zero."""


class EmptyRegionError(LocalizationError, ValueError):
    """No grid passed the threshold: the observation matched nowhere."""


class DegenerateSpeciesError(LocalizationError, ValueError):
    """A species is too small for the requested statistic."""


class NonPositiveInputError(LocalizationError, ValueError):
    """An input that must be strictly positive was not."""


class FilterDivergedError(LocalizationError):
    """Every species went extinct."""


class UnreachableGoalError(LocalizationError):
    """The log generator found no collision-free path to the goal."""


class ConfigError(LocalizationError, ValueError):
    """A config file is malformed or names unknown settings."""


class MapFormatError(LocalizationError, ValueError):
    """A map or log file does not follow the expected text format."""


class UnknownParameterError(LocalizationError, ValueError):
    """A sweep named a setting that cannot be swept."""
