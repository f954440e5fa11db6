"""Exception types raised across the package."""


class LSAFNetError(Exception):
    pass


class ShapeError(LSAFNetError, ValueError):
    pass


class ConfigError(LSAFNetError, ValueError):
    pass


class ValidationError(LSAFNetError, ValueError):
    pass


class PaletteError(ValidationError):
    pass


class IngestionError(LSAFNetError, FileNotFoundError):
    pass


class ConsistencyError(ValidationError):
    pass


class NumericError(LSAFNetError, ArithmeticError):
    pass


class CheckpointError(LSAFNetError, RuntimeError):
    pass
