#!/usr/bin/env python3
"""Generate the stylized Korea land-cover raster shipped with the package.

The outline is a hand-drawn approximation of the South Korean mainland plus
Jeju, rasterized at one third of the 7 km working resolution so the
classify -> downsample pipeline gets exercised end to end, and sized so the
7 km working grid carries approximately 1,600 land cells (matching the
published national conductivity-map cell count this fixture stands in
for). Class assignment follows coarse regional rules (mountains in the
east, agriculture in the west) with a seeded speckle so blocks are not
artificially uniform. A nodata band sits north of the border, mirroring
missing-survey areas.

Run from the repository root:  python scripts/generate_korea_landcover.py
"""

import math
from pathlib import Path

import numpy as np
from shapely.geometry import Point, Polygon

M_PER_DEG = 6_371_000.0 * math.pi / 180.0
PITCH_DEG = 7000.0 / 3.0 / M_PER_DEG  # one third of the 7 km target cell

LAT_MIN, LAT_MAX = 33.0, 39.0
LON_MIN, LON_MAX = 124.5, 130.5

# linear shrink about the centroid keeps the 7 km land-cell count near the
# published ~1,600 despite the meridian-pitch cell convention
_C_LAT, _C_LON = 36.35, 127.80
_S_LAT, _S_LON = 0.92, 0.64


def _shrink(lon, lat):
    return (_C_LON + (lon - _C_LON) * _S_LON, _C_LAT + (lat - _C_LAT) * _S_LAT)


MAINLAND = Polygon(
    [
        _shrink(lon, lat)
        for lon, lat in [
            # (lon, lat), counterclockwise from the northwest corner
            (126.65, 37.75),
            (126.20, 37.20),
            (126.45, 36.70),
            (126.15, 36.20),
            (126.30, 35.40),
            (126.25, 34.80),
            (126.50, 34.35),
            (127.30, 34.45),
            (127.80, 34.35),
            (128.60, 34.70),
            (129.25, 35.10),
            (129.45, 35.60),
            (129.45, 36.20),
            (129.40, 37.00),
            (129.00, 38.00),
            (128.60, 38.35),
            (127.50, 38.30),
            (126.90, 38.25),
        ]
    ]
)
_JEJU_LON, _JEJU_LAT = _shrink(126.55, 33.55)
JEJU = Polygon(
    [
        (_JEJU_LON + 0.40 * math.cos(a), _JEJU_LAT + 0.15 * math.sin(a))
        for a in np.linspace(0, 2 * math.pi, 48)
    ]
)

# class codes from the shipped terrain table
SEA, FRESH, SANDY, MARSHY, AGRI, PASTURE, ROCKY, MOUNTAIN, RESIDENTIAL, INDUSTRIAL = (
    10, 20, 30, 40, 50, 60, 70, 80, 90, 100
)
NODATA = -9999

def _spot(lat, lon, r):
    slon, slat = _shrink(lon, lat)
    return (slat, slon, r)


CITIES = [  # (lat, lon, radius_deg) residential cores
    _spot(37.55, 126.95, 0.20),  # Seoul
    _spot(35.15, 129.05, 0.13),  # Busan
    _spot(35.85, 128.60, 0.11),  # Daegu
    _spot(35.15, 126.85, 0.09),  # Gwangju
    _spot(36.35, 127.40, 0.09),  # Daejeon
]
INDUSTRY = [_spot(35.55, 129.30, 0.09), _spot(37.45, 126.65, 0.07)]  # Ulsan, Incheon
LAKES = [_spot(36.45, 127.80, 0.05), _spot(37.95, 127.75, 0.04)]


def classify(lat, lon, rng):
    for clat, clon, r in INDUSTRY:
        if (lat - clat) ** 2 + (lon - clon) ** 2 < r * r:
            return INDUSTRIAL
    for clat, clon, r in CITIES:
        if (lat - clat) ** 2 + (lon - clon) ** 2 < r * r:
            return RESIDENTIAL
    for clat, clon, r in LAKES:
        if (lat - clat) ** 2 + (lon - clon) ** 2 < r * r:
            return FRESH
    u = rng.random()
    east, north = _shrink(128.2, 35.3)
    west_plain, _ = _shrink(126.6, 35.3)
    west_belt, _ = _shrink(127.2, 35.3)
    if lon > east and lat > north:  # Taebaek range
        return MOUNTAIN if u < 0.7 else ROCKY
    if lon < west_plain and lat < north:  # southwest plains and tidal flats
        if u < 0.15:
            return MARSHY
        return AGRI if u < 0.7 else PASTURE
    if lon < west_belt:  # western agricultural belt
        if u < 0.05:
            return SANDY
        return AGRI if u < 0.6 else PASTURE
    if u < 0.25:
        return MOUNTAIN
    if u < 0.45:
        return ROCKY
    return PASTURE


def main():
    rng = np.random.default_rng(20210601)
    n_rows = round((LAT_MAX - LAT_MIN) / PITCH_DEG)
    n_cols = round((LON_MAX - LON_MIN) / PITCH_DEG)
    cells = np.full((n_rows, n_cols), SEA, dtype=int)
    land = 0
    for r in range(n_rows):
        lat = LAT_MAX - (r + 0.5) * PITCH_DEG
        for c in range(n_cols):
            lon = LON_MIN + (c + 0.5) * PITCH_DEG
            if lat > 38.20:
                cells[r, c] = NODATA  # no survey data north of the border
                continue
            p = Point(lon, lat)
            if MAINLAND.contains(p) or JEJU.contains(p):
                cells[r, c] = classify(lat, lon, rng)
                land += 1
    out = Path(__file__).resolve().parents[1] / "src" / "loransim" / "data" / "korea_landcover.grid"
    with open(out, "w") as fh:
        fh.write(f"ncols {n_cols}\n")
        fh.write(f"nrows {n_rows}\n")
        fh.write(f"xllcorner {LON_MIN}\n")
        fh.write(f"yllcorner {LAT_MIN}\n")
        fh.write(f"cellsize {PITCH_DEG:.12f}\n")
        fh.write(f"nodata_value {NODATA}\n")
        for r in range(n_rows):
            fh.write(" ".join(str(v) for v in cells[r]) + "\n")
    fine_per_7km = (land, land / 9.0)
    print(f"{n_rows}x{n_cols} cells, {land} land cells at fine pitch "
          f"(~{fine_per_7km[1]:.0f} at 7 km), wrote {out}")


if __name__ == "__main__":
    main()
