"""Synthetic TOR data shared by the jitter, CLI, and acceptance tests."""

import math

import numpy as np

from loransim.error_model import RANGE_CONSTANT_M, SPEED_OF_LIGHT_M_PER_US, n_pulses
from loransim.jitter import TORSeries

DEFAULT_BIAS_COMPONENTS = (
    # amplitude (us), period (s), phase: slow common-mode drifts >= 1 h
    (2.0, 21600.0, 0.3),
    (1.5, 7200.0, 1.1),
    (0.8, 3600.0, 2.0),
)


def eq1_sigma_us(jitter_m: float, snr_db: float, gri: int, integration_time_s: float = 5.0) -> float:
    """Per-sample TOR standard deviation implied by the measurement error model."""
    snr_lin = 10.0 ** (snr_db / 10.0)
    pulses = n_pulses(gri, integration_time_s)
    sigma_m = math.sqrt(jitter_m**2 + RANGE_CONSTANT_M**2 / (pulses * snr_lin))
    return sigma_m / SPEED_OF_LIGHT_M_PER_US


def synth_tor_pair(
    j1_m: float,
    j2_m: float,
    snr_db: float = 20.0,
    gri: int = 9930,
    duration_s: int = 86400,
    seed: int = 0,
    site: str = "SYN",
    station_ids=("9930M", "9930W"),
    bias_components=DEFAULT_BIAS_COMPONENTS,
    base_tor_us=(30000.0, 41000.0),
    snr_jitter_db: float = 0.2,
) -> tuple[TORSeries, TORSeries]:
    """Two same-chain series: shared multi-sinusoid bias, independent noise."""
    rng = np.random.default_rng(seed)
    t = np.arange(duration_s, dtype=float)
    bias = np.zeros(duration_s)
    for amp, period, phase in bias_components:
        bias += amp * np.sin(2.0 * np.pi * t / period + phase)
    out = []
    for jitter_m, station, base in zip((j1_m, j2_m), station_ids, base_tor_us):
        sigma_us = eq1_sigma_us(jitter_m, snr_db, gri)
        tor = base + bias + rng.standard_normal(duration_s) * sigma_us
        snr = snr_db + rng.standard_normal(duration_s) * snr_jitter_db
        out.append(TORSeries(station, site, gri, t, tor, snr))
    return out[0], out[1]


def tor_log_csv(series_list, t0_iso: str = "2021-06-01T00:00:00") -> str:
    """Render series as the TOR log CSV wire format."""
    t0 = np.datetime64(t0_iso)
    lines = ["utc_time_iso8601,site_id,station_id,gri,tor_us,snr_db"]
    for s in series_list:
        stamps = t0 + (s.t_s * 1e9).astype("timedelta64[ns]")
        for ts, tor, snr in zip(stamps, s.tor_us, s.snr_db):
            lines.append(f"{ts},{s.site_id},{s.station_id},{s.gri_designator},{tor:.9f},{snr:.4f}")
    return "\n".join(lines) + "\n"
