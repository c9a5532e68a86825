"""Exception hierarchy shared by all selora modules."""


class SeLoRAError(Exception):
    """Base class for every error raised by this package."""

    category = "runtime"


class InvalidDimensionError(SeLoRAError, ValueError):
    category = "config"


class InvalidRankError(InvalidDimensionError):
    category = "config"


class DegenerateSparsityError(SeLoRAError, ValueError):
    """The sparse ratio leaves no learnable coordinate."""

    category = "config"


class InitDegenerateError(SeLoRAError, ArithmeticError):
    category = "numeric"


class NormalizationDegenerateError(SeLoRAError, ArithmeticError):
    """A DoRA column norm vanished."""

    category = "numeric"


class AFUndefinedError(SeLoRAError, ArithmeticError):
    category = "numeric"


class NumericalError(SeLoRAError, ArithmeticError):
    """Non-finite values appeared during training."""

    category = "numeric"


class ConfigError(SeLoRAError, ValueError):
    category = "config"


class CheckpointFormatError(SeLoRAError):
    category = "format"


class UnsupportedVersionError(CheckpointFormatError):
    pass


class CorruptionError(CheckpointFormatError):
    pass
