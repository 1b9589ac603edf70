"""Land cover ingestion, conductivity classification, and path profiles.

Rasters are plain-text lat/lon grids (ESRI-ASCII style header, row 0 =
north). Conductivity values are effective ground conductivity in S/m with
relative permittivity, keyed by terrain type.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import ClassificationError, GridParseError, PathError

EARTH_RADIUS_M = 6_371_000.0
M_PER_DEG = EARTH_RADIUS_M * math.pi / 180.0  # 111,194.93 m per degree of arc

# Fallbacks used when a terrain table lacks the named rows.
SEAWATER_SIGMA_EPS = (5.0, 80.0)
DEFAULT_LAND_SIGMA_EPS = (5e-3, 13.0)  # pasture land, medium hills and forest

_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


@dataclass(frozen=True)
class GeoPoint:
    """Geographic coordinate, degrees. Latitude [-90, 90], longitude [-180, 180)."""

    lat_deg: float
    lon_deg: float

    def __post_init__(self):
        if not (math.isfinite(self.lat_deg) and math.isfinite(self.lon_deg)):
            raise ValueError("coordinates must be finite")
        if not -90.0 <= self.lat_deg <= 90.0:
            raise ValueError(f"latitude {self.lat_deg} out of [-90, 90]")
        if not -180.0 <= self.lon_deg < 180.0:
            raise ValueError(f"longitude {self.lon_deg} out of [-180, 180)")


def _unit_vector(p: GeoPoint) -> np.ndarray:
    lat = math.radians(p.lat_deg)
    lon = math.radians(p.lon_deg)
    return np.array(
        [math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)]
    )


def _arc(a: GeoPoint, b: GeoPoint):
    """Unit vectors of both endpoints and the central angle between them."""
    u, v = _unit_vector(a), _unit_vector(b)
    cx = u[1] * v[2] - u[2] * v[1]
    cy = u[2] * v[0] - u[0] * v[2]
    cz = u[0] * v[1] - u[1] * v[0]
    cross = math.sqrt(cx * cx + cy * cy + cz * cz)
    dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
    # atan2 form is stable for both near-zero and near-antipodal separations
    return u, v, math.atan2(cross, dot)


def great_circle_distance_m(a: GeoPoint, b: GeoPoint) -> float:
    """Spherical great-circle distance in meters."""
    return EARTH_RADIUS_M * _arc(a, b)[2]


def azimuth_rad(origin: GeoPoint, target: GeoPoint) -> float:
    """Forward azimuth from origin to target, clockwise from north, in [0, 2*pi)."""
    lat1 = math.radians(origin.lat_deg)
    lat2 = math.radians(target.lat_deg)
    dlon = math.radians(target.lon_deg - origin.lon_deg)
    y = math.sin(dlon) * math.cos(lat2)
    x = math.cos(lat1) * math.sin(lat2) - math.sin(lat1) * math.cos(lat2) * math.cos(dlon)
    az = math.atan2(y, x)
    return az % (2.0 * math.pi)


def _slerp_latlon(u, v, omega, fractions):
    so = math.sin(omega)
    f = np.asarray(fractions)[:, None]
    pts = (np.sin((1.0 - f) * omega) * u + np.sin(f * omega) * v) / so
    z = pts[:, 2]
    np.clip(z, -1.0, 1.0, out=z)
    lats = np.degrees(np.arcsin(z))
    lons = np.degrees(np.arctan2(pts[:, 1], pts[:, 0]))
    return lats, lons


def great_circle_points(a: GeoPoint, b: GeoPoint, fractions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lat/lon (degrees) of points at the given fractions along the arc a->b.

    Spherical linear interpolation; robust across the antimeridian.
    """
    u, v, omega = _arc(a, b)
    if omega == 0.0:
        lats = np.full(len(fractions), a.lat_deg)
        lons = np.full(len(fractions), a.lon_deg)
        return lats, lons
    return _slerp_latlon(u, v, omega, fractions)


@dataclass(frozen=True)
class TerrainClass:
    class_code: int
    terrain_name: str
    conductivity_s_per_m: float
    relative_permittivity: float


class TerrainClassTable:
    """Mapping from land-cover class codes to (conductivity, permittivity)."""

    def __init__(self, entries: list[TerrainClass]):
        codes = [e.class_code for e in entries]
        if len(set(codes)) != len(codes):
            raise ValueError("duplicate class codes in terrain table")
        for e in entries:
            if not 0.0 < e.conductivity_s_per_m <= 10.0:
                raise ValueError(
                    f"class {e.class_code}: conductivity {e.conductivity_s_per_m} outside (0, 10] S/m"
                )
            if not 1.0 <= e.relative_permittivity <= 100.0:
                raise ValueError(
                    f"class {e.class_code}: permittivity {e.relative_permittivity} outside [1, 100]"
                )
        self.entries = list(entries)
        self._by_code = {e.class_code: e for e in entries}
        self._by_name = {e.terrain_name: e for e in entries}

    def __len__(self):
        return len(self.entries)

    def get(self, class_code: int) -> TerrainClass | None:
        return self._by_code.get(class_code)

    def by_name(self, terrain_name: str) -> TerrainClass | None:
        return self._by_name.get(terrain_name)

    def sigma_eps_for_name(self, terrain_name: str, fallback: tuple[float, float]) -> tuple[float, float]:
        e = self.by_name(terrain_name)
        if e is None:
            return fallback
        return (e.conductivity_s_per_m, e.relative_permittivity)


def load_terrain_table(source) -> TerrainClassTable:
    """Read a terrain class table from CSV text or a file-like object.

    Expected header: class_code,terrain_name,conductivity_s_per_m,relative_permittivity
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.DictReader(source)
    required = {"class_code", "terrain_name", "conductivity_s_per_m", "relative_permittivity"}
    if reader.fieldnames is None or not required.issubset(reader.fieldnames):
        raise GridParseError(f"terrain table header must contain {sorted(required)}")
    entries = []
    for row in reader:
        try:
            entries.append(
                TerrainClass(
                    class_code=int(row["class_code"]),
                    terrain_name=row["terrain_name"],
                    conductivity_s_per_m=float(row["conductivity_s_per_m"]),
                    relative_permittivity=float(row["relative_permittivity"]),
                )
            )
        except (TypeError, ValueError) as exc:
            raise GridParseError(f"bad terrain table row {row}: {exc}") from exc
    return TerrainClassTable(entries)


def default_terrain_table() -> TerrainClassTable:
    """The shipped ten-class terrain table."""
    text = resources.files("loransim.data").joinpath("terrain_classes.csv").read_text()
    return load_terrain_table(text)


@dataclass
class _RasterFrame:
    """Shared raster geometry: lower-left origin, square cells in degrees."""

    origin: GeoPoint
    cell_size_deg: float
    n_cols: int
    n_rows: int

    @property
    def lat_max(self) -> float:
        return self.origin.lat_deg + self.n_rows * self.cell_size_deg

    @property
    def lon_max(self) -> float:
        return self.origin.lon_deg + self.n_cols * self.cell_size_deg

    @property
    def cell_size_m(self) -> float:
        # cell pitch measured along a meridian
        return self.cell_size_deg * M_PER_DEG

    def contains(self, lat_deg, lon_deg) -> bool:
        return (
            self.origin.lat_deg <= lat_deg <= self.lat_max
            and self.origin.lon_deg <= lon_deg <= self.lon_max
        )

    def rowcol(self, lat_deg, lon_deg):
        """Row/col of the containing cell (row 0 = north). Clamped at edges."""
        col = int((lon_deg - self.origin.lon_deg) / self.cell_size_deg)
        row_s = int((lat_deg - self.origin.lat_deg) / self.cell_size_deg)  # from south
        col = min(max(col, 0), self.n_cols - 1)
        row_s = min(max(row_s, 0), self.n_rows - 1)
        return self.n_rows - 1 - row_s, col


@dataclass
class LandCoverGrid:
    origin: GeoPoint
    cell_size_deg: float
    n_cols: int
    n_rows: int
    cells: np.ndarray  # (n_rows, n_cols) int class codes, row 0 = north
    nodata_code: int

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.int64).reshape(self.n_rows, self.n_cols)

    @property
    def frame(self) -> _RasterFrame:
        return _RasterFrame(self.origin, self.cell_size_deg, self.n_cols, self.n_rows)


@dataclass
class ConductivityGrid:
    """Raster of (conductivity S/m, relative permittivity) pairs."""

    origin: GeoPoint
    cell_size_deg: float
    n_cols: int
    n_rows: int
    sigma: np.ndarray  # (n_rows, n_cols), row 0 = north
    eps: np.ndarray

    def __post_init__(self):
        self.sigma = np.asarray(self.sigma, dtype=float).reshape(self.n_rows, self.n_cols)
        self.eps = np.asarray(self.eps, dtype=float).reshape(self.n_rows, self.n_cols)
        if not np.all(np.isfinite(self.sigma)) or np.any(self.sigma <= 0):
            raise ValueError("all cell conductivities must be positive and finite")

    @property
    def frame(self) -> _RasterFrame:
        return _RasterFrame(self.origin, self.cell_size_deg, self.n_cols, self.n_rows)

    def sigma_eps_at(self, lat_deg, lon_deg, outside=SEAWATER_SIGMA_EPS):
        """(sigma, eps) of the containing cell; `outside` policy off-grid."""
        f = self.frame
        if not f.contains(lat_deg, lon_deg):
            return outside
        r, c = f.rowcol(lat_deg, lon_deg)
        return (float(self.sigma[r, c]), float(self.eps[r, c]))

    def sigma_eps_at_many(self, lats_deg, lons_deg, outside=SEAWATER_SIGMA_EPS):
        """Vectorized cell lookup; off-grid points take the `outside` pair."""
        f = self.frame
        lats = np.asarray(lats_deg)
        lons = np.asarray(lons_deg)
        col = ((lons - self.origin.lon_deg) / self.cell_size_deg).astype(int)
        row_s = ((lats - self.origin.lat_deg) / self.cell_size_deg).astype(int)
        inside = (
            (lats >= self.origin.lat_deg)
            & (lats <= f.lat_max)
            & (lons >= self.origin.lon_deg)
            & (lons <= f.lon_max)
        )
        np.minimum(col, self.n_cols - 1, out=col)
        np.maximum(col, 0, out=col)
        np.minimum(row_s, self.n_rows - 1, out=row_s)
        np.maximum(row_s, 0, out=row_s)
        row = self.n_rows - 1 - row_s
        sigma = np.where(inside, self.sigma[row, col], outside[0])
        eps = np.where(inside, self.eps[row, col], outside[1])
        return sigma, eps


@dataclass(frozen=True)
class PathSegment:
    length_m: float
    conductivity_s_per_m: float
    relative_permittivity: float


@dataclass
class PathProfile:
    """Ordered homogeneous segments along a great-circle path."""

    segments: list[PathSegment]
    total_length_m: float

    def __post_init__(self):
        if not self.segments:
            raise PathError("path profile needs at least one segment")
        s = sum(seg.length_m for seg in self.segments)
        if abs(s - self.total_length_m) > 1e-6 * max(self.total_length_m, 1.0):
            raise PathError(
                f"segment lengths sum to {s}, expected {self.total_length_m}"
            )
        merged = _merge_segments(self.segments)
        self.segments = merged

    def reversed(self) -> "PathProfile":
        return PathProfile(list(reversed(self.segments)), self.total_length_m)


def _merge_segments(segments):
    merged: list[PathSegment] = []
    for seg in segments:
        if seg.length_m < 0:
            raise PathError("segment length must be nonnegative")
        if merged and (
            merged[-1].conductivity_s_per_m == seg.conductivity_s_per_m
            and merged[-1].relative_permittivity == seg.relative_permittivity
        ):
            prev = merged.pop()
            seg = PathSegment(
                prev.length_m + seg.length_m,
                seg.conductivity_s_per_m,
                seg.relative_permittivity,
            )
        merged.append(seg)
    return merged


def _parse_raster_header(lines):
    header = {}
    idx = 0
    for idx, (line_no, line) in enumerate(lines):
        parts = line.split()
        if len(parts) != 2:
            break
        key = parts[0].lower()
        if key not in _HEADER_KEYS:
            break
        try:
            header[key] = float(parts[1]) if key not in ("ncols", "nrows", "nodata_value") else int(parts[1])
        except ValueError as exc:
            raise GridParseError(f"bad header value for {key}: {parts[1]}", line_no) from exc
    else:
        idx += 1
    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise GridParseError(f"missing header keys: {missing}")
    if header["ncols"] <= 0 or header["nrows"] <= 0:
        raise GridParseError("ncols and nrows must be positive")
    return header, idx


def _read_raster(source, token_parser, dtype):
    """Parse header + cell rows; returns (header dict, (n_rows, n_cols) array)."""
    if isinstance(source, str):
        source = io.StringIO(source)
    lines = [
        (i + 1, ln.strip())
        for i, ln in enumerate(source.read().splitlines())
        if ln.strip()
    ]
    header, data_start = _parse_raster_header(lines)
    n_cols, n_rows = header["ncols"], header["nrows"]
    data_lines = lines[data_start:]
    if len(data_lines) != n_rows:
        raise GridParseError(
            f"expected {n_rows} data rows, found {len(data_lines)}",
            data_lines[0][0] if data_lines else None,
        )
    rows = []
    for line_no, line in data_lines:
        tokens = line.split()
        if len(tokens) != n_cols:
            raise GridParseError(
                f"expected {n_cols} values per row, found {len(tokens)}", line_no
            )
        try:
            rows.append([token_parser(t) for t in tokens])
        except ValueError as exc:
            raise GridParseError(f"unparseable cell token: {exc}", line_no) from exc
    return header, np.array(rows, dtype=dtype)


def load_land_cover(source) -> LandCoverGrid:
    """Parse a land-cover raster (integer class codes) from text."""
    header, cells = _read_raster(source, int, np.int64)
    return LandCoverGrid(
        origin=GeoPoint(header["yllcorner"], header["xllcorner"]),
        cell_size_deg=header["cellsize"],
        n_cols=header["ncols"],
        n_rows=header["nrows"],
        cells=cells,
        nodata_code=header["nodata_value"],
    )


def load_float_raster(source):
    """Parse a raster of float cells; returns (header, array). Used for noise grids."""
    return _read_raster(source, float, float)


def _parse_sigma_eps(token: str):
    parts = token.split(":")
    if token == "nodata":
        return (math.nan, math.nan)
    if len(parts) != 2:
        raise ValueError(f"expected sigma:eps, got {token!r}")
    return (float(parts[0]), float(parts[1]))


def load_conductivity(source, nodata_policy: str = "default_land") -> ConductivityGrid:
    """Parse a conductivity raster with sigma:eps cell tokens.

    `nodata` tokens are resolved immediately per policy so the grid never
    carries gaps: seawater, default_land, or error.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    text = source.read()
    header, pairs = _read_raster(io.StringIO(text), _parse_sigma_eps, float)
    sigma = pairs[:, :, 0]
    eps = pairs[:, :, 1]
    mask = ~np.isfinite(sigma)
    if mask.any():
        if nodata_policy == "error":
            raise ClassificationError(f"{int(mask.sum())} nodata cells with policy=error")
        fill = SEAWATER_SIGMA_EPS if nodata_policy == "seawater" else DEFAULT_LAND_SIGMA_EPS
        sigma = np.where(mask, fill[0], sigma)
        eps = np.where(mask, fill[1], eps)
    return ConductivityGrid(
        origin=GeoPoint(header["yllcorner"], header["xllcorner"]),
        cell_size_deg=header["cellsize"],
        n_cols=header["ncols"],
        n_rows=header["nrows"],
        sigma=sigma,
        eps=eps,
    )


def dump_conductivity(grid: ConductivityGrid) -> str:
    """Serialize a conductivity grid back to the sigma:eps raster format."""
    out = [
        f"ncols {grid.n_cols}",
        f"nrows {grid.n_rows}",
        f"xllcorner {grid.origin.lon_deg:.10g}",
        f"yllcorner {grid.origin.lat_deg:.10g}",
        f"cellsize {grid.cell_size_deg:.10g}",
        "nodata_value -9999",
    ]
    for r in range(grid.n_rows):
        out.append(
            " ".join(
                f"{grid.sigma[r, c]:.6g}:{grid.eps[r, c]:.6g}" for c in range(grid.n_cols)
            )
        )
    return "\n".join(out) + "\n"


def classify_conductivity(
    grid: LandCoverGrid,
    table: TerrainClassTable,
    nodata_policy: str = "seawater",
) -> ConductivityGrid:
    """Replace each land-cover class code with its (sigma, eps) pair.

    nodata cells resolve per policy: seawater, default_land, or error.
    """
    if nodata_policy not in ("seawater", "default_land", "error"):
        raise ValueError(f"unknown nodata policy {nodata_policy!r}")
    codes = np.unique(grid.cells)
    sigma = np.empty_like(grid.cells, dtype=float)
    eps = np.empty_like(grid.cells, dtype=float)
    for code in codes:
        mask = grid.cells == code
        if code == grid.nodata_code:
            if nodata_policy == "error":
                raise ClassificationError(
                    f"nodata code {code} present with policy=error"
                )
            fill = (
                table.sigma_eps_for_name("Seawater", SEAWATER_SIGMA_EPS)
                if nodata_policy == "seawater"
                else table.sigma_eps_for_name(
                    "Pasture land, medium hills and forest", DEFAULT_LAND_SIGMA_EPS
                )
            )
            sigma[mask], eps[mask] = fill
            continue
        entry = table.get(int(code))
        if entry is None:
            raise ClassificationError(f"class code {int(code)} not in terrain table")
        sigma[mask] = entry.conductivity_s_per_m
        eps[mask] = entry.relative_permittivity
    return ConductivityGrid(
        origin=grid.origin,
        cell_size_deg=grid.cell_size_deg,
        n_cols=grid.n_cols,
        n_rows=grid.n_rows,
        sigma=sigma,
        eps=eps,
    )


def _block_bounds(n_src: int, n_out: int) -> list[tuple[int, int]]:
    # even partition of source indices into n_out blocks
    return [
        (math.floor(k * n_src / n_out), math.floor((k + 1) * n_src / n_out))
        for k in range(n_out)
    ]


def downsample(
    grid: ConductivityGrid, target_cell_m: float, rule: str = "mode_class"
) -> ConductivityGrid:
    """Aggregate to a coarser raster covering the same extent.

    Output cell counts are round(extent / target) per axis, so a 210 km
    extent at a 7 km target yields exactly 30 cells. mode_class picks the
    most frequent (sigma, eps) pair per block, ties broken by lower
    conductivity; median_conductivity picks the lower-median pair ordered
    by conductivity.
    """
    if rule not in ("mode_class", "median_conductivity"):
        raise ValueError(f"unknown downsample rule {rule!r}")
    src_cell_m = grid.frame.cell_size_m
    if target_cell_m < src_cell_m * (1 - 1e-9):
        raise ValueError(
            f"target cell {target_cell_m} m finer than source {src_cell_m:.1f} m"
        )
    out_rows = max(1, round(grid.n_rows * src_cell_m / target_cell_m))
    out_cols = max(1, round(grid.n_cols * src_cell_m / target_cell_m))
    row_blocks = _block_bounds(grid.n_rows, out_rows)
    col_blocks = _block_bounds(grid.n_cols, out_cols)
    sigma = np.empty((out_rows, out_cols))
    eps = np.empty((out_rows, out_cols))
    for i, (r0, r1) in enumerate(row_blocks):
        for j, (c0, c1) in enumerate(col_blocks):
            s = grid.sigma[r0:r1, c0:c1].ravel()
            e = grid.eps[r0:r1, c0:c1].ravel()
            sigma[i, j], eps[i, j] = _aggregate_block(s, e, rule)
    return ConductivityGrid(
        origin=grid.origin,
        cell_size_deg=grid.cell_size_deg * grid.n_rows / out_rows,
        n_cols=out_cols,
        n_rows=out_rows,
        sigma=sigma,
        eps=eps,
    )


def _aggregate_block(sigma, eps, rule):
    pairs = np.stack([sigma, eps], axis=1)
    uniq, counts = np.unique(pairs, axis=0, return_counts=True)
    if rule == "mode_class":
        best = counts.max()
        candidates = uniq[counts == best]
        # tie: keep the lowest conductivity (conservative attenuation)
        k = np.lexsort((candidates[:, 1], candidates[:, 0]))[0]
        return candidates[k, 0], candidates[k, 1]
    # median_conductivity: lower-median pair ordered by sigma then eps
    order = np.lexsort((eps, sigma))
    k = order[(len(order) - 1) // 2]
    return sigma[k], eps[k]


def sample_path(
    tx: GeoPoint,
    rx: GeoPoint,
    grid: ConductivityGrid,
    step_m: float = 1000.0,
) -> PathProfile:
    """Discretize the tx->rx great circle and build a merged path profile.

    Each subsegment takes the (sigma, eps) of the cell containing its
    midpoint; points off the grid use the seawater policy. Raises PathError
    for a zero-distance path.
    """
    if step_m <= 0:
        raise ValueError("step_m must be positive")
    u, v, omega = _arc(tx, rx)
    distance = EARTH_RADIUS_M * omega
    if distance == 0.0:
        raise PathError("zero-distance path (tx == rx)")
    n = max(1, math.ceil(distance / step_m))
    fractions = (np.arange(n) + 0.5) / n
    lats, lons = _slerp_latlon(u, v, omega, fractions)
    seg_len = distance / n
    sigma, eps = grid.sigma_eps_at_many(lats, lons)
    return _merged_profile(sigma, eps, seg_len, distance, n)


def _merged_profile(sigma, eps, seg_len, distance, n) -> PathProfile:
    # run-length merge of consecutive equal (sigma, eps) samples
    change = np.flatnonzero((sigma[1:] != sigma[:-1]) | (eps[1:] != eps[:-1]))
    starts = np.concatenate(([0], change + 1))
    counts = np.diff(np.concatenate((starts, [n])))
    segments = [
        PathSegment(int(c) * seg_len, float(sigma[i]), float(eps[i]))
        for i, c in zip(starts, counts)
    ]
    return PathProfile(segments, distance)


def sample_paths_from(
    tx: GeoPoint,
    lats_deg: np.ndarray,
    lons_deg: np.ndarray,
    grid: ConductivityGrid,
    step_m: float = 1000.0,
    chunk_samples: int = 1_500_000,
    poll=None,
) -> list:
    """Paths from one transmitter to many receivers, batched for sweeps.

    Produces results identical to sample_path per receiver (same sample
    points, same merge); entries are PathProfile or the PathError a direct
    call would have raised. Work is chunked to bound peak memory; `poll`,
    when given, is called between chunks (cancellation hook).
    """
    if step_m <= 0:
        raise ValueError("step_m must be positive")
    m = len(lats_deg)
    u = _unit_vector(tx)
    rx_lat = np.radians(np.asarray(lats_deg, dtype=float))
    rx_lon = np.radians(np.asarray(lons_deg, dtype=float))
    cos_lat = np.cos(rx_lat)
    v = np.stack([cos_lat * np.cos(rx_lon), cos_lat * np.sin(rx_lon), np.sin(rx_lat)], axis=1)
    cross = np.cross(u[None, :], v)
    omega = np.arctan2(np.sqrt(np.sum(cross * cross, axis=1)), v @ u)
    distance = EARTH_RADIUS_M * omega
    n = np.maximum(1, np.ceil(distance / step_m)).astype(np.int64)
    results: list = [None] * m
    order = np.arange(m)
    valid = distance > 0.0
    for i in order[~valid]:
        results[i] = PathError("zero-distance path (tx == rx)")
    todo = order[valid]
    start = 0
    while start < len(todo):
        if poll is not None:
            poll()
        # grow the chunk until the sample budget is hit
        end = start
        total = 0
        while end < len(todo) and (total == 0 or total + n[todo[end]] <= chunk_samples):
            total += n[todo[end]]
            end += 1
        idx = todo[start:end]
        start = end
        counts = n[idx]
        offsets = np.concatenate(([0], np.cumsum(counts)))
        rep = np.repeat(np.arange(len(idx)), counts)
        k = np.arange(offsets[-1]) - offsets[rep]
        f = (k + 0.5) / counts[rep]
        om = omega[idx][rep]
        so = np.sin(om)
        pts = (
            np.sin((1.0 - f) * om)[:, None] * u + np.sin(f * om)[:, None] * v[idx][rep]
        ) / so[:, None]
        z = pts[:, 2]
        np.clip(z, -1.0, 1.0, out=z)
        lats = np.degrees(np.arcsin(z))
        lons = np.degrees(np.arctan2(pts[:, 1], pts[:, 0]))
        sigma, eps = grid.sigma_eps_at_many(lats, lons)
        for j, cell in enumerate(idx):
            a, b = offsets[j], offsets[j + 1]
            d = float(distance[cell])
            nn = int(counts[j])
            results[cell] = _merged_profile(sigma[a:b], eps[a:b], d / nn, d, nn)
    return results
