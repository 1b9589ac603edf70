"""Exception types shared across the simulator."""


class LoranSimError(Exception):
    """Base class for all simulator errors."""


class GridParseError(LoranSimError):
    """Malformed raster text (bad header, wrong cell count, unknown token)."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ClassificationError(LoranSimError):
    """Land-cover class code has no entry in the terrain table."""


class PathError(LoranSimError):
    """Degenerate or unusable propagation path."""


class CurveRangeError(LoranSimError):
    """Distance outside the attenuation curve grid."""


class CurveDataError(LoranSimError):
    """Attenuation curve table violates its invariants."""


class NoiseLookupError(LoranSimError):
    """Noise model has no value for the requested location/season."""


class GeometryError(LoranSimError):
    """Transmitter geometry unusable (too few stations or rank deficient)."""


class InfeasibleJitterError(LoranSimError):
    """Jitter radicand negative: detrended variance below the SNR noise floor.

    Carries the deficit in m^2 so callers can report how inconsistent the
    inputs are instead of silently clamping to zero.
    """

    def __init__(self, message, deficit_m2):
        super().__init__(message)
        self.deficit_m2 = deficit_m2


class AlignmentError(LoranSimError):
    """Two measurement series share too few epochs to difference."""


class ConfigError(LoranSimError):
    """Invalid scenario or parameter configuration."""
