"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes: input problems (bad files,
inconsistent dimensions, missing cases) exit 2, configuration problems
exit 3, anything else is treated as an internal invariant violation (4).
"""


class UcaError(Exception):
    """Base class for all errors raised by this package."""


class InputError(UcaError):
    """A user-supplied input (file, directory, raster, case) is unusable."""


class RasterFormatError(InputError):
    """A raster file is missing, truncated, or has a malformed header."""


class DimensionMismatchError(InputError):
    """Rasters or paired containers disagree on width/height or length."""


class ConfigError(UcaError):
    """A configuration document failed to parse or validate."""


class DegenerateClusterError(UcaError):
    """A cluster cannot be split into distinct left/right centroids."""


class PhantomSpecError(InputError):
    """A synthetic-spine description violates its own geometric constraints."""
