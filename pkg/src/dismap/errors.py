"""Exception hierarchy.

The CLI maps each family onto an exit code: ConfigError -> 1,
InputError -> 2, PipelineError -> 3.
"""


class DismapError(Exception):
    """Base class for all errors raised by dismap."""

    stage: str = ""

    def __init__(self, message: str, stage: str | None = None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage


class ConfigError(DismapError, ValueError):
    """Invalid configuration value or missing required setting."""


class InputError(DismapError, ValueError):
    """Unreadable, malformed or mismatched input data."""


class RasterFormatError(InputError):
    """Header/body of a raster file is missing, garbled or inconsistent."""


class GridMismatchError(InputError):
    """Two rasters that must share a grid do not."""


class PipelineError(DismapError, RuntimeError):
    """A processing stage could not produce a result."""


class NoChangeSignalError(PipelineError):
    """The difference map carries no separable change signal."""


class UnsupportedGeometryError(PipelineError):
    """Operation requires an axis-aligned geotransform."""
