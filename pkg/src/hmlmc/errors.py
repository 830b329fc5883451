"""Exception taxonomy.

Configuration problems (bad input files, misaligned interfaces, invalid
dimensions) map to CLI exit code 2; numerical failures (singular systems,
insufficient samples, unfittable rates) map to exit code 3.
"""


class ConfigurationError(Exception):
    """Invalid problem, grid, or run configuration."""


class AlignmentError(ConfigurationError):
    """A breakpoint or region does not align with the grid it must resolve on."""


class DimensionError(ConfigurationError):
    """Array shape inconsistent with the grid it is indexed on."""


class NumericalError(Exception):
    """A numerical procedure failed."""


class AssemblyError(NumericalError):
    """Low-order system coefficients are unphysical (E or sigma_t out of range)."""


class SingularSystemError(NumericalError):
    """Zero pivot during tridiagonal elimination."""


class InsufficientSamplesError(NumericalError):
    """Statistics requested from fewer than two samples."""


class FitError(NumericalError):
    """Rate fit has fewer than two usable points."""
