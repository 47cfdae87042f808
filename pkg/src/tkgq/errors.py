"""Exception types shared across the package."""


class TkgqError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(TkgqError, ValueError):
    """Quaternion batch components or operands have incompatible shapes."""


class DatasetError(TkgqError):
    """Dataset files are missing, malformed, or inconsistent."""


class CheckpointError(TkgqError):
    """Checkpoint or cache file is missing, corrupt, or version-mismatched."""


class ConfigError(TkgqError):
    """Invalid training configuration or config-file contents."""


class TrainingDivergedError(TkgqError):
    """Loss became non-finite during optimization."""
