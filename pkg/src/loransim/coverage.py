"""Regional accuracy sweep, scenario configuration, and comparison harness.

A scenario names the transmitters, region grid, conductivity source, noise
model, and error-model knobs; the sweep chains propagation, SNR, the
measurement error model, and the WLS covariance per cell. The comparison
harness joins measured reference fixtures with simulated values and scores
them with the relative-error improvement metric.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field, asdict
from importlib import resources
from pathlib import Path

import numpy as np

from .error_model import ErrorModelParams, measurement_sigma, n_pulses as compute_n_pulses
from .errors import ConfigError, CurveRangeError, GeometryError, LoranSimError, PathError
from .geodata import (
    M_PER_DEG,
    ConductivityGrid,
    GeoPoint,
    TerrainClassTable,
    azimuth_rad,
    classify_conductivity,
    default_terrain_table,
    downsample,
    load_conductivity,
    load_land_cover,
    load_terrain_table,
    sample_path,
    sample_paths_from,
)
from .noise import NoiseModel, compute_snr, noise_at
from .positioning import StationGeometry, horizontal_accuracy_95, solve_covariance
from .propagation import AttenuationCurveSet, generate_default_curves, millington_mixed_path

SCHEMA_VERSION = 1
DEFAULT_SNR_FLOOR_DB = -10.0
DEFAULT_CONDUCTIVITY_RESOLUTION_M = 7000.0


class ComputeCancelled(LoranSimError):
    """Sweep aborted between cells by a cancellation check."""


@dataclass(frozen=True)
class Transmitter:
    id: str
    name: str
    location: GeoPoint
    erp_kw: float
    gri_designator: int
    chain_id: str
    emission_delay_us: float = 0.0
    role: str = "secondary"
    jitter_m: float = 0.0
    enabled: bool = True  # disabled stations stay configured but sit out the fix

    def __post_init__(self):
        if self.erp_kw <= 0:
            raise ConfigError(f"transmitter {self.id}: ERP must be positive")
        if self.role not in ("master", "secondary"):
            raise ConfigError(f"transmitter {self.id}: role must be master or secondary")
        if self.emission_delay_us < 0:
            raise ConfigError(f"transmitter {self.id}: emission delay must be >= 0")
        if self.role == "master" and self.emission_delay_us != 0:
            raise ConfigError(f"transmitter {self.id}: master emission delay must be 0")
        if self.jitter_m < 0:
            raise ConfigError(f"transmitter {self.id}: jitter must be >= 0")


@dataclass(frozen=True)
class Region:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    resolution_m: float

    def __post_init__(self):
        if self.lat_min >= self.lat_max or self.lon_min >= self.lon_max:
            raise ConfigError("region bounds must be ordered and non-empty")
        if self.resolution_m < 1000.0:
            raise ConfigError("region resolution must be >= 1,000 m")

    @property
    def pitch_deg(self) -> float:
        return self.resolution_m / M_PER_DEG

    @property
    def n_rows(self) -> int:
        return max(1, math.ceil((self.lat_max - self.lat_min) / self.pitch_deg - 1e-9))

    @property
    def n_cols(self) -> int:
        return max(1, math.ceil((self.lon_max - self.lon_min) / self.pitch_deg - 1e-9))

    def cell_center(self, row: int, col: int) -> GeoPoint:
        # row 0 = north, matching the raster convention
        return GeoPoint(
            self.lat_max - (row + 0.5) * self.pitch_deg,
            self.lon_min + (col + 0.5) * self.pitch_deg,
        )


@dataclass
class Scenario:
    name: str
    region: Region
    transmitters: list[Transmitter]
    conductivity_source: str = "land_cover"  # or itu_baseline
    landcover_path: str | None = None
    conductivity_path: str | None = None
    terrain_table_path: str | None = None
    conductivity_resolution_m: float = DEFAULT_CONDUCTIVITY_RESOLUTION_M
    nodata_policy: str = "seawater"
    noise_mode: str = "constant"
    noise_constant_dbuvm: float = 52.0
    noise_paths: dict = field(default_factory=dict)
    season: str = "summer"
    jitter_mode: str = "estimated"  # or fixed
    fixed_jitter_m: float = 6.0
    clock_mode: str = "auto"  # single | per_chain | auto
    integration_time_s: float = 5.0
    snr_floor_db: float = DEFAULT_SNR_FLOOR_DB
    range_constant_m: float = 337.5
    path_step_m: float = 1000.0
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if len(self.transmitters) < 3:
            raise ConfigError("scenario needs at least 3 transmitters")
        if self.conductivity_source not in ("land_cover", "itu_baseline"):
            raise ConfigError(f"unknown conductivity source {self.conductivity_source!r}")
        if self.jitter_mode not in ("estimated", "fixed"):
            raise ConfigError(f"unknown jitter mode {self.jitter_mode!r}")
        if self.clock_mode not in ("auto", "single", "per_chain"):
            raise ConfigError(f"unknown clock mode {self.clock_mode!r}")
        ids = [t.id for t in self.transmitters]
        if len(set(ids)) != len(ids):
            raise ConfigError("transmitter ids must be unique")

    def jitter_for(self, tx: Transmitter) -> float:
        return self.fixed_jitter_m if self.jitter_mode == "fixed" else tx.jitter_m

    def error_params(self) -> ErrorModelParams:
        return ErrorModelParams(
            range_constant_m=self.range_constant_m,
            integration_time_s=self.integration_time_s,
        )


def scenario_to_dict(s: Scenario) -> dict:
    d = asdict(s)
    d["region"] = asdict(s.region)
    d["transmitters"] = [
        {**asdict(t), "lat": t.location.lat_deg, "lon": t.location.lon_deg}
        for t in s.transmitters
    ]
    for t in d["transmitters"]:
        del t["location"]
    return d


def scenario_from_dict(d: dict) -> Scenario:
    d = dict(d)
    version = d.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported scenario schema_version {version}")
    try:
        region = Region(**d.pop("region"))
        txs = []
        for t in d.pop("transmitters"):
            t = dict(t)
            loc = GeoPoint(t.pop("lat"), t.pop("lon"))
            t.pop("location", None)
            t.setdefault("gri_designator", t.pop("gri", None))
            if t["gri_designator"] is None:
                raise ConfigError("transmitter needs gri or gri_designator")
            txs.append(Transmitter(location=loc, **t))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad scenario structure: {exc}") from exc
    known = {f for f in Scenario.__dataclass_fields__}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unknown scenario keys: {sorted(extra)}")
    return Scenario(region=region, transmitters=txs, schema_version=version, **d)


def scenario_content_hash(s: Scenario) -> str:
    payload = json.dumps(scenario_to_dict(s), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def scenario_data_fingerprint(s: Scenario) -> str:
    """Hash of the fields that determine the resolved data bundle.

    Scenarios that differ only in transmitters/region/error-model knobs share
    one ScenarioData, which services cache across recomputes.
    """
    keys = {
        "conductivity_source": s.conductivity_source,
        "landcover_path": s.landcover_path,
        "conductivity_path": s.conductivity_path,
        "terrain_table_path": s.terrain_table_path,
        "conductivity_resolution_m": s.conductivity_resolution_m,
        "nodata_policy": s.nodata_policy,
        "noise_mode": s.noise_mode,
        "noise_constant_dbuvm": s.noise_constant_dbuvm,
        "noise_paths": s.noise_paths,
    }
    return hashlib.sha256(json.dumps(keys, sort_keys=True).encode()).hexdigest()


def load_scenario_file(path) -> Scenario:
    """Read a scenario from TOML or JSON (by extension)."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"scenario file not found: {p}")
    if p.suffix == ".toml":
        if sys.version_info >= (3, 11):
            import tomllib
        else:
            import tomli as tomllib
        with open(p, "rb") as fh:
            return scenario_from_dict(tomllib.load(fh))
    with open(p) as fh:
        return scenario_from_dict(json.load(fh))


@dataclass
class ScenarioData:
    """Resolved inputs for a sweep: conductivity raster, curves, noise."""

    conductivity: ConductivityGrid
    curves: AttenuationCurveSet
    noise: NoiseModel
    terrain: TerrainClassTable


def resolve_scenario_data(scenario: Scenario, base_dir=".") -> ScenarioData:
    base = Path(base_dir)

    def _resolve(p):
        q = Path(p)
        return q if q.is_absolute() else base / q

    if scenario.terrain_table_path:
        path = _resolve(scenario.terrain_table_path)
        if not path.exists():
            raise ConfigError(f"terrain table not found: {path}")
        with open(path) as fh:
            terrain = load_terrain_table(fh)
    else:
        terrain = default_terrain_table()

    if scenario.conductivity_source == "land_cover":
        if not scenario.landcover_path:
            raise ConfigError("land_cover source needs landcover_path")
        path = _resolve(scenario.landcover_path)
        if not path.exists():
            raise ConfigError(f"land-cover raster not found: {path}")
        with open(path) as fh:
            lc = load_land_cover(fh)
        grid = classify_conductivity(lc, terrain, nodata_policy=scenario.nodata_policy)
        if scenario.conductivity_resolution_m > grid.frame.cell_size_m * (1 + 1e-9):
            grid = downsample(grid, scenario.conductivity_resolution_m)
    else:
        if not scenario.conductivity_path:
            raise ConfigError("itu_baseline source needs conductivity_path")
        path = _resolve(scenario.conductivity_path)
        if not path.exists():
            raise ConfigError(f"conductivity raster not found: {path}")
        with open(path) as fh:
            grid = load_conductivity(fh)

    if scenario.noise_mode == "grid":
        if not scenario.noise_paths:
            raise ConfigError("grid noise mode needs noise_paths")
        sources = {}
        for season, p in scenario.noise_paths.items():
            path = _resolve(p)
            if not path.exists():
                raise ConfigError(f"noise raster not found: {path}")
            sources[season] = path.read_text()
        noise_model = NoiseModel.from_rasters(sources)
    else:
        noise_model = NoiseModel.constant(scenario.noise_constant_dbuvm)

    curves = generate_default_curves(terrain_table=terrain)
    return ScenarioData(conductivity=grid, curves=curves, noise=noise_model, terrain=terrain)


@dataclass
class StationDiagnostic:
    station_id: str
    field_dbuvm: float | None
    snr_db: float | None
    sigma_m: float | None
    azimuth_deg: float
    used: bool
    exclude_reason: str | None = None


@dataclass
class PointResult:
    available: bool
    accuracy_95_m: float | None
    reason: str | None
    stations: list[StationDiagnostic]
    clock_mode: str


def _effective_clock_mode(scenario: Scenario, chains: set) -> str:
    if scenario.clock_mode != "auto":
        return scenario.clock_mode
    return "per_chain" if len(chains) > 1 else "single"


def _evaluate_point(scenario: Scenario, data: ScenarioData, point: GeoPoint,
                    paths=None) -> PointResult:
    params = scenario.error_params()
    diags: list[StationDiagnostic] = []
    usable: list[StationGeometry] = []
    noise_db = noise_at(data.noise, point, scenario.season)
    for ti, tx in enumerate(scenario.transmitters):
        az = azimuth_rad(point, tx.location)
        az_deg = math.degrees(az)
        if not tx.enabled:
            diags.append(
                StationDiagnostic(tx.id, None, None, None, az_deg, False, "disabled")
            )
            continue
        try:
            if paths is not None:
                path = paths[ti]
                if isinstance(path, PathError):
                    raise path
            else:
                path = sample_path(tx.location, point, data.conductivity, scenario.path_step_m)
            field_db = millington_mixed_path(path, data.curves) + 10.0 * math.log10(tx.erp_kw)
        except (CurveRangeError, PathError) as exc:
            diags.append(
                StationDiagnostic(tx.id, None, None, None, az_deg, False, f"range: {exc}")
            )
            continue
        snr = compute_snr(field_db, noise_db)
        if snr.snr_db < scenario.snr_floor_db:
            diags.append(
                StationDiagnostic(
                    tx.id, field_db, snr.snr_db, None, az_deg, False, "snr_floor"
                )
            )
            continue
        pulses = compute_n_pulses(
            tx.gri_designator, params.integration_time_s, params.pulses_per_gri
        )
        sigma = measurement_sigma(scenario.jitter_for(tx), snr, pulses, params)
        diags.append(
            StationDiagnostic(tx.id, field_db, snr.snr_db, sigma.sigma_m, az_deg, True)
        )
        usable.append(
            StationGeometry(
                station_id=tx.id, azimuth_rad=az, sigma_m=sigma.sigma_m, chain_id=tx.chain_id
            )
        )

    chains = {st.chain_id for st in usable}
    clock_mode = _effective_clock_mode(scenario, chains)
    minimum = 3 if clock_mode == "single" else 2 + len(chains)
    if len(usable) < minimum:
        excluded = [d.exclude_reason for d in diags if d.exclude_reason]
        if any(r == "snr_floor" for r in excluded):
            reason = "snr_floor"
        elif any(r and r.startswith("range") for r in excluded):
            reason = "range"
        else:
            reason = "insufficient_stations"
        return PointResult(False, None, reason, diags, clock_mode)
    try:
        cov = solve_covariance(usable, clock_mode)
    except GeometryError:
        return PointResult(False, None, "rank_deficient", diags, clock_mode)
    return PointResult(True, horizontal_accuracy_95(cov), None, diags, clock_mode)


def simulate_point(scenario: Scenario, point: GeoPoint, data: ScenarioData | None = None,
                   base_dir=".") -> PointResult:
    """Accuracy and per-station diagnostics for one location.

    When data is injected it must agree with the scenario's data settings
    (normally built by resolve_scenario_data); the scenario's noise and
    conductivity fields are not re-read from an injected bundle.
    """
    if data is None:
        data = resolve_scenario_data(scenario, base_dir)
    return _evaluate_point(scenario, data, point)


@dataclass
class AccuracyGrid:
    """Regional 95%-accuracy raster with per-cell diagnostics (row 0 = north)."""

    region: Region
    station_ids: list[str]
    accuracy_m: np.ndarray  # (rows, cols), NaN where unavailable
    available: np.ndarray  # bool
    n_stations: np.ndarray  # int, stations used per cell
    reason: list  # list of rows of str|None
    snr_db: np.ndarray  # (rows, cols, n_tx), NaN where not computed
    sigma_m: np.ndarray
    azimuth_deg: np.ndarray
    used: np.ndarray  # bool (rows, cols, n_tx)

    def cell_center(self, row: int, col: int) -> GeoPoint:
        return self.region.cell_center(row, col)

    def summary(self) -> dict:
        vals = self.accuracy_m[self.available]
        total = self.accuracy_m.size
        return {
            "cells": int(total),
            "available_cells": int(self.available.sum()),
            "availability_pct": float(100.0 * self.available.sum() / total),
            "accuracy_min_m": float(np.min(vals)) if vals.size else None,
            "accuracy_median_m": float(np.median(vals)) if vals.size else None,
            "accuracy_max_m": float(np.max(vals)) if vals.size else None,
        }

    def to_csv(self, stream) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["lat", "lon", "accuracy_95_m", "available", "n_stations"])
        for r in range(self.region.n_rows):
            for c in range(self.region.n_cols):
                p = self.cell_center(r, c)
                acc = self.accuracy_m[r, c]
                writer.writerow(
                    [
                        f"{p.lat_deg:.6f}",
                        f"{p.lon_deg:.6f}",
                        "" if math.isnan(acc) else f"{acc:.4f}",
                        "true" if self.available[r, c] else "false",
                        int(self.n_stations[r, c]),
                    ]
                )

    def to_geojson(self) -> dict:
        pitch = self.region.pitch_deg
        features = []
        for r in range(self.region.n_rows):
            for c in range(self.region.n_cols):
                lat_top = self.region.lat_max - r * pitch
                lon_left = self.region.lon_min + c * pitch
                ring = [
                    [lon_left, lat_top - pitch],
                    [lon_left + pitch, lat_top - pitch],
                    [lon_left + pitch, lat_top],
                    [lon_left, lat_top],
                    [lon_left, lat_top - pitch],
                ]
                acc = self.accuracy_m[r, c]
                features.append(
                    {
                        "type": "Feature",
                        "geometry": {"type": "Polygon", "coordinates": [ring]},
                        "properties": {
                            "row": r,
                            "col": c,
                            "accuracy_95_m": None if math.isnan(acc) else round(float(acc), 4),
                            "available": bool(self.available[r, c]),
                            "n_stations": int(self.n_stations[r, c]),
                            "reason": self.reason[r][c],
                            "snr_db": _round_list(self.snr_db[r, c]),
                            "sigma_m": _round_list(self.sigma_m[r, c]),
                            "azimuth_deg": _round_list(self.azimuth_deg[r, c]),
                            "used": [bool(u) for u in self.used[r, c]],
                        },
                    }
                )
        return {
            "type": "FeatureCollection",
            "station_ids": self.station_ids,
            "features": features,
        }


def _round_list(arr) -> list:
    return [None if math.isnan(v) else round(float(v), 4) for v in arr]


def simulate_accuracy_map(
    scenario: Scenario,
    data: ScenarioData | None = None,
    base_dir=".",
    cancel_check=None,
    progress=None,
    path_cache: dict | None = None,
) -> AccuracyGrid:
    """Run the point simulation over every region cell.

    Deterministic for identical inputs. cancel_check is polled between
    cells and may raise ComputeCancelled via returning True; progress is
    called with the fraction done. path_cache, when provided, memoizes
    per-transmitter path batches across calls; it must be scoped to one
    resolved data bundle (paths depend on the conductivity raster).
    """
    if data is None:
        data = resolve_scenario_data(scenario, base_dir)
    region = scenario.region
    rows, cols = region.n_rows, region.n_cols
    n_tx = len(scenario.transmitters)
    acc = np.full((rows, cols), np.nan)
    avail = np.zeros((rows, cols), dtype=bool)
    n_used = np.zeros((rows, cols), dtype=int)
    reasons = [[None] * cols for _ in range(rows)]
    snr = np.full((rows, cols, n_tx), np.nan)
    sig = np.full((rows, cols, n_tx), np.nan)
    azd = np.full((rows, cols, n_tx), np.nan)
    used = np.zeros((rows, cols, n_tx), dtype=bool)
    total = rows * cols

    def _poll():
        if cancel_check is not None and cancel_check():
            raise ComputeCancelled("cancelled during path precomputation")

    # batch-build every cell's path per transmitter up front
    centers = [region.cell_center(r, c) for r in range(rows) for c in range(cols)]
    cell_lats = np.array([p.lat_deg for p in centers])
    cell_lons = np.array([p.lon_deg for p in centers])
    region_key = (region.lat_min, region.lat_max, region.lon_min, region.lon_max,
                  region.resolution_m, scenario.path_step_m)
    tx_paths = []
    for tx in scenario.transmitters:
        if not tx.enabled:
            tx_paths.append(None)
            continue
        key = (tx.location.lat_deg, tx.location.lon_deg) + region_key
        if path_cache is not None and key in path_cache:
            tx_paths.append(path_cache[key])
            continue
        paths = sample_paths_from(
            tx.location, cell_lats, cell_lons, data.conductivity,
            scenario.path_step_m, poll=_poll,
        )
        if path_cache is not None:
            path_cache[key] = paths
        tx_paths.append(paths)
    done = 0
    for r in range(rows):
        for c in range(cols):
            if cancel_check is not None and cancel_check():
                raise ComputeCancelled(f"cancelled at cell {done}/{total}")
            ci = r * cols + c
            paths = [tp[ci] if tp is not None else None for tp in tx_paths]
            res = _evaluate_point(scenario, data, centers[ci], paths=paths)
            if res.available:
                avail[r, c] = True
                acc[r, c] = res.accuracy_95_m
            reasons[r][c] = res.reason
            n_used[r, c] = sum(1 for d in res.stations if d.used)
            for k, d in enumerate(res.stations):
                if d.snr_db is not None:
                    snr[r, c, k] = d.snr_db
                if d.sigma_m is not None:
                    sig[r, c, k] = d.sigma_m
                azd[r, c, k] = d.azimuth_deg
                used[r, c, k] = d.used
            done += 1
        if progress is not None:
            progress(done / total)
    return AccuracyGrid(
        region=region,
        station_ids=[t.id for t in scenario.transmitters],
        accuracy_m=acc,
        available=avail,
        n_stations=n_used,
        reason=reasons,
        snr_db=snr,
        sigma_m=sig,
        azimuth_deg=azd,
        used=used,
    )


# --- comparison harness ---------------------------------------------------


@dataclass(frozen=True)
class ComparisonRecord:
    site: str
    quantity: str
    variant: str  # which existing-method column the record scores against
    ground_truth: float
    sr_existing: float
    sr_proposed: float
    e_existing: float
    e_proposed: float
    improvement_pct: float | None

    def __post_init__(self):
        if abs(self.e_existing - abs(self.sr_existing - self.ground_truth)) > 1e-9:
            raise ValueError("e_existing inconsistent")
        if abs(self.e_proposed - abs(self.sr_proposed - self.ground_truth)) > 1e-9:
            raise ValueError("e_proposed inconsistent")


def improvement_metric(
    site: str,
    quantity: str,
    ground_truth: float,
    sr_existing: float,
    sr_proposed: float,
    variant: str = "existing",
) -> ComparisonRecord:
    """Relative reduction of simulation error versus the existing method.

    improvement = (E_existing - E_proposed) / E_existing * 100; undefined
    (None) when the existing method is already exact. Negative values mean
    the proposed simulation is worse.
    """
    if ground_truth is None or not math.isfinite(ground_truth):
        raise ValueError(f"{site}/{quantity}: ground truth missing")
    e_existing = abs(sr_existing - ground_truth)
    e_proposed = abs(sr_proposed - ground_truth)
    improvement = None
    if e_existing > 0:
        improvement = (e_existing - e_proposed) / e_existing * 100.0
    return ComparisonRecord(
        site=site,
        quantity=quantity,
        variant=variant,
        ground_truth=ground_truth,
        sr_existing=sr_existing,
        sr_proposed=sr_proposed,
        e_existing=e_existing,
        e_proposed=e_proposed,
        improvement_pct=improvement,
    )


@dataclass(frozen=True)
class FixtureRow:
    site: str
    quantity: str
    measured: float | None
    existing_6m: float | None
    existing_4m: float | None
    proposed: float | None


def load_fixture_csv(source) -> list[FixtureRow]:
    """Fixture schema: site,quantity,measured,existing_6m,existing_4m,proposed."""
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.DictReader(source)
    required = {"site", "quantity", "measured", "existing_6m", "existing_4m", "proposed"}
    if reader.fieldnames is None or not required.issubset(reader.fieldnames):
        raise ConfigError(f"fixture header must contain {sorted(required)}")

    def _opt(v):
        v = (v or "").strip()
        return float(v) if v else None

    return [
        FixtureRow(
            site=row["site"],
            quantity=row["quantity"],
            measured=_opt(row["measured"]),
            existing_6m=_opt(row["existing_6m"]),
            existing_4m=_opt(row["existing_4m"]),
            proposed=_opt(row["proposed"]),
        )
        for row in reader
    ]


def builtin_fixture(name: str) -> list[FixtureRow]:
    """Load one of the shipped reference fixtures by file stem."""
    text = resources.files("loransim.data.fixtures").joinpath(f"{name}.csv").read_text()
    return load_fixture_csv(text)


@dataclass
class ComparisonReport:
    records: list[ComparisonRecord]
    rejected: list[str]
    unmatched: list[str]

    def improvement_range(self) -> tuple[float, float] | None:
        vals = [r.improvement_pct for r in self.records if r.improvement_pct is not None]
        if not vals:
            return None
        return (min(vals), max(vals))

    def to_csv(self, stream) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(
            ["site", "quantity", "variant", "ground_truth", "sr_existing", "sr_proposed",
             "e_existing", "e_proposed", "improvement_pct"]
        )
        for r in self.records:
            writer.writerow(
                [
                    r.site, r.quantity, r.variant,
                    f"{r.ground_truth:.6g}", f"{r.sr_existing:.6g}", f"{r.sr_proposed:.6g}",
                    f"{r.e_existing:.6g}", f"{r.e_proposed:.6g}",
                    "" if r.improvement_pct is None else f"{r.improvement_pct:.2f}",
                ]
            )


def compare_sites(fixtures: list[FixtureRow], simulated: dict | None = None) -> ComparisonReport:
    """Join measured fixtures with simulated outputs into ComparisonRecords.

    simulated maps (site, quantity) to a proposed value and overrides the
    fixture's proposed column; unmatched simulated keys are reported, not
    fatal. Fixture rows without a measured value are rejected; rows without
    any existing/proposed pair are carried silently (data-only rows).
    """
    simulated = dict(simulated or {})
    records: list[ComparisonRecord] = []
    rejected: list[str] = []
    fixture_keys = set()
    for row in fixtures:
        key = (row.site, row.quantity)
        fixture_keys.add(key)
        proposed = simulated.get(key, row.proposed)
        if row.measured is None:
            if row.existing_6m is not None or row.existing_4m is not None or proposed is not None:
                rejected.append(f"{row.site}/{row.quantity}: no ground truth")
            continue
        if proposed is None:
            continue
        for variant, value in (("existing_6m", row.existing_6m), ("existing_4m", row.existing_4m)):
            if value is None:
                continue
            records.append(
                improvement_metric(
                    row.site, row.quantity, row.measured, value, proposed, variant=variant
                )
            )
    unmatched = [f"{s}/{q}" for (s, q) in simulated if (s, q) not in fixture_keys]
    return ComparisonReport(records=records, rejected=rejected, unmatched=sorted(unmatched))
