"""Measurement error model: SNR and transmitter jitter to range sigma.

sigma^2 = J^2 + K^2 / (N_pulses * SNR_linear), K = 337.5 m from a reference
receiver measurement. SNR enters as a linear power ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError
from .noise import SnrEstimate

RANGE_CONSTANT_M = 337.5
PULSES_PER_GRI = 8
SPEED_OF_LIGHT_M_PER_US = 299.792458
GRI_DESIGNATOR_MIN = 4000
GRI_DESIGNATOR_MAX = 9999


@dataclass(frozen=True)
class ErrorModelParams:
    range_constant_m: float = RANGE_CONSTANT_M
    pulses_per_gri: int = PULSES_PER_GRI
    integration_time_s: float = 5.0
    speed_of_light_m_per_us: float = SPEED_OF_LIGHT_M_PER_US

    def __post_init__(self):
        for name in ("range_constant_m", "pulses_per_gri", "integration_time_s", "speed_of_light_m_per_us"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")


@dataclass(frozen=True)
class MeasurementNoise:
    sigma_m: float
    sigma_us: float
    jitter_m: float
    snr_linear: float
    n_pulses: float

    def __post_init__(self):
        if self.sigma_m < 0 or self.jitter_m < 0:
            raise ValueError("sigma and jitter must be nonnegative")
        if abs(self.sigma_us * SPEED_OF_LIGHT_M_PER_US - self.sigma_m) > 1e-9 * max(self.sigma_m, 1e-300):
            raise ValueError("sigma_us inconsistent with sigma_m")


def n_pulses(
    gri_designator: int,
    integration_time_s: float = 5.0,
    pulses_per_gri: int = PULSES_PER_GRI,
) -> float:
    """Accumulated pulse count over the integration time; fractional allowed.

    The GRI designator encodes the interval in tens of microseconds
    (9930 -> 99,300 us).
    """
    if not GRI_DESIGNATOR_MIN <= gri_designator <= GRI_DESIGNATOR_MAX:
        raise ConfigError(
            f"GRI designator {gri_designator} outside "
            f"[{GRI_DESIGNATOR_MIN}, {GRI_DESIGNATOR_MAX}]"
        )
    if integration_time_s <= 0:
        raise ConfigError("integration time must be positive")
    gri_s = gri_designator / 100000.0  # designator counts tens of microseconds
    return pulses_per_gri * integration_time_s / gri_s


def measurement_sigma(
    jitter_m: float,
    snr: SnrEstimate,
    n_pulses: float,
    params: ErrorModelParams = ErrorModelParams(),
) -> MeasurementNoise:
    """Standard deviation of bias-removed TOR measurements, meter and us forms."""
    if jitter_m < 0:
        raise ValueError("jitter must be nonnegative")
    if snr.snr_linear <= 0:
        raise ValueError("linear SNR must be positive")
    if n_pulses <= 0:
        raise ValueError("pulse count must be positive")
    var_m2 = jitter_m**2 + params.range_constant_m**2 / (n_pulses * snr.snr_linear)
    sigma_m = math.sqrt(var_m2)
    return MeasurementNoise(
        sigma_m=sigma_m,
        sigma_us=sigma_m / params.speed_of_light_m_per_us,
        jitter_m=jitter_m,
        snr_linear=snr.snr_linear,
        n_pulses=n_pulses,
    )


def snr_noise_variance_m2(
    snr_linear: float, n_pulses: float, params: ErrorModelParams = ErrorModelParams()
) -> float:
    """The SNR-driven variance term K^2 / (N * SNR), in m^2."""
    if snr_linear <= 0 or n_pulses <= 0:
        raise ValueError("snr_linear and n_pulses must be positive")
    return params.range_constant_m**2 / (n_pulses * snr_linear)
