"""Atmospheric noise field strength and SNR arithmetic.

Noise is data, not code: either a constant level or loadable seasonal
rasters in dB(uV/m) within the receiver bandwidth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoiseLookupError
from .geodata import GeoPoint, load_float_raster

SEASONS = ("spring", "summer", "autumn", "winter")
DEFAULT_NOISE_DBUVM = 52.0


@dataclass
class _NoiseGrid:
    lat0: float
    lon0: float
    cell_deg: float
    values: np.ndarray  # (n_rows, n_cols), row 0 = south after construction

    @classmethod
    def from_raster(cls, source):
        header, cells = load_float_raster(source)
        if not np.all(np.isfinite(cells)):
            raise NoiseLookupError("noise raster contains non-finite values")
        # flip so row 0 is south; simplifies bilinear index arithmetic
        return cls(header["yllcorner"], header["xllcorner"], header["cellsize"], np.flipud(cells))

    def interpolate(self, lat_deg: float, lon_deg: float) -> float:
        n_rows, n_cols = self.values.shape
        if not (
            self.lat0 <= lat_deg <= self.lat0 + n_rows * self.cell_deg
            and self.lon0 <= lon_deg <= self.lon0 + n_cols * self.cell_deg
        ):
            raise NoiseLookupError(
                f"({lat_deg}, {lon_deg}) outside noise grid extent"
            )
        # bilinear between cell centers, clamped at the boundary half-cells
        fr = np.clip((lat_deg - self.lat0) / self.cell_deg - 0.5, 0, n_rows - 1)
        fc = np.clip((lon_deg - self.lon0) / self.cell_deg - 0.5, 0, n_cols - 1)
        r0, c0 = int(fr), int(fc)
        r1, c1 = min(r0 + 1, n_rows - 1), min(c0 + 1, n_cols - 1)
        wr, wc = fr - r0, fc - c0
        v = self.values
        return float(
            v[r0, c0] * (1 - wr) * (1 - wc)
            + v[r1, c0] * wr * (1 - wc)
            + v[r0, c1] * (1 - wr) * wc
            + v[r1, c1] * wr * wc
        )


@dataclass
class NoiseModel:
    """Constant noise level, or per-season rasters."""

    mode: str = "constant"
    constant_dBuVm: float = DEFAULT_NOISE_DBUVM
    grids: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("constant", "grid"):
            raise ValueError(f"unknown noise mode {self.mode!r}")
        if self.mode == "constant" and not math.isfinite(self.constant_dBuVm):
            raise ValueError("constant noise level must be finite")
        if self.mode == "grid":
            missing = [s for s in SEASONS if s not in self.grids]
            if missing:
                raise ValueError(f"grid noise model missing seasons: {missing}")

    @classmethod
    def constant(cls, level_dBuVm: float = DEFAULT_NOISE_DBUVM) -> "NoiseModel":
        return cls(mode="constant", constant_dBuVm=level_dBuVm)

    @classmethod
    def from_rasters(cls, season_sources: dict) -> "NoiseModel":
        grids = {s: _NoiseGrid.from_raster(src) for s, src in season_sources.items()}
        return cls(mode="grid", grids=grids)


def noise_at(model: NoiseModel, location: GeoPoint, season: str = "summer") -> float:
    """Noise field strength in dB(uV/m) at a location for a season."""
    if model.mode == "constant":
        return model.constant_dBuVm
    grid = model.grids.get(season)
    if grid is None:
        raise NoiseLookupError(f"no noise grid for season {season!r}")
    return grid.interpolate(location.lat_deg, location.lon_deg)


@dataclass(frozen=True)
class SnrEstimate:
    snr_db: float
    snr_linear: float
    signal_dBuVm: float
    noise_dBuVm: float

    def __post_init__(self):
        expect = 10.0 ** (self.snr_db / 10.0)
        if abs(self.snr_linear - expect) > 1e-12 * max(expect, 1e-300):
            raise ValueError("snr_linear inconsistent with snr_db")
        if abs(self.snr_db - (self.signal_dBuVm - self.noise_dBuVm)) > 1e-9:
            raise ValueError("snr_db must equal signal - noise")


def compute_snr(signal_dBuVm: float, noise_dBuVm: float) -> SnrEstimate:
    """SNR from field-strength levels; dB difference and its linear power ratio."""
    if not (math.isfinite(signal_dBuVm) and math.isfinite(noise_dBuVm)):
        raise ValueError("signal and noise levels must be finite")
    snr_db = signal_dBuVm - noise_dBuVm
    return SnrEstimate(
        snr_db=snr_db,
        snr_linear=10.0 ** (snr_db / 10.0),
        signal_dBuVm=signal_dBuVm,
        noise_dBuVm=noise_dBuVm,
    )


def snr_from_db(snr_db: float) -> SnrEstimate:
    """SnrEstimate from a bare dB value (signal pinned to the SNR, noise to 0)."""
    return compute_snr(snr_db, 0.0)
