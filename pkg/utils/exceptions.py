"""
Custom exception classes for the wavelet curriculum and its command line.
"""
from typing import Optional, Sequence, Tuple


class WaveletError(Exception):
    """Base class for every error raised by this package."""

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class OddDimensionError(WaveletError, ValueError):
    """Exception raised when a single DWT level receives an odd raster."""

    def __init__(self, message: str, shape: Optional[Tuple[int, ...]] = None):
        """
        Initialize odd dimension error.

        Args:
            message: Error message
            shape: Offending raster shape if available
        """
        super().__init__(message)
        self.shape = shape


class IndivisibleDimensionError(WaveletError, ValueError):
    """Exception raised when a raster cannot be halved `levels` times."""

    def __init__(
        self,
        message: str,
        axis: Optional[str] = None,
        level: Optional[int] = None,
        size: Optional[int] = None
    ):
        """
        Initialize indivisible dimension error.

        Args:
            message: Error message
            axis: 'height' or 'width'
            level: DWT level (1-based) at which the axis became odd
            size: Axis length seen at that level
        """
        super().__init__(message)
        self.axis = axis
        self.level = level
        self.size = size


class ShapeMismatchError(WaveletError, ValueError):
    """Exception raised when rasters that must agree in shape do not."""

    def __init__(self, message: str, shapes: Sequence[Tuple[int, ...]] = ()):
        super().__init__(message)
        self.shapes = tuple(shapes)


class ModeMismatchError(WaveletError):
    """Exception raised when an operation is called on a bank in the wrong mode."""

    def __init__(self, message: str, mode: Optional[str] = None):
        super().__init__(message)
        self.mode = mode


class ConfigError(WaveletError, ValueError):
    """Exception raised for configuration file and value errors."""

    def __init__(
        self,
        message: str,
        key: Optional[str] = None,
        line: Optional[int] = None
    ):
        """
        Initialize configuration error.

        Args:
            message: Error message
            key: Configuration key that failed if available
            line: 1-based line number in the config file if available
        """
        super().__init__(message)
        self.key = key
        self.line = line


class ImageReadError(WaveletError):
    """Exception raised when an input image cannot be read."""

    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message)
        self.path = path


class DiagnosticFailure(WaveletError):
    """Raised by commands whose check ran but did not pass (exit code 1)."""
