"""Ground-wave field strength prediction at LF over inhomogeneous terrain.

Field strengths are dB(uV/m) referenced to 1 kW ERP. The default curve
provider uses the flat-earth Norton/Sommerfeld attenuation factor with the
rational approximation |F| = (2 + 0.3p) / (2 + p + 0.6p^2) of the numerical
distance p; digitized curve tables can be loaded in its place. Mixed paths
are combined with the Millington forward/reverse average.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import CurveDataError, CurveRangeError
from .geodata import ConductivityGrid, GeoPoint, PathProfile, TerrainClassTable, sample_path

SPEED_OF_LIGHT_M_S = 299_792_458.0
EPSILON_0 = 8.8541878128e-12

DEFAULT_FREQUENCY_HZ = 100_000.0
CURVE_D_MIN_M = 1_000.0
CURVE_D_MAX_M = 2_500_000.0
CURVE_N_SAMPLES = 256
SEAWATER_KEY = (5.0, 80.0)


def reference_field_dbuvm(distance_m, erp_kw: float = 1.0):
    """Inverse-distance reference field: 300*sqrt(P) mV/m at 1 km for P kW."""
    d_km = np.asarray(distance_m, dtype=float) / 1000.0
    return 20.0 * np.log10(300.0 * math.sqrt(erp_kw) / d_km) + 60.0


def numerical_distance(distance_m, conductivity_s_per_m, relative_permittivity, frequency_hz):
    """Sommerfeld numerical distance p for vertical polarization, flat earth.

    p = (pi d / lambda) * |eps_c - 1| / |eps_c|^2 with the complex
    permittivity eps_c = eps_r - j sigma/(omega eps0).
    """
    if conductivity_s_per_m <= 0:
        raise ValueError("conductivity must be positive")
    lam = SPEED_OF_LIGHT_M_S / frequency_hz
    x = conductivity_s_per_m / (2.0 * math.pi * frequency_hz * EPSILON_0)
    eps = relative_permittivity
    ratio = math.hypot(eps - 1.0, x) / (eps * eps + x * x)
    return (math.pi * np.asarray(distance_m, dtype=float) / lam) * ratio


def flat_earth_attenuation(p):
    """Norton rational approximation of |F|; strictly decreasing in p."""
    p = np.asarray(p, dtype=float)
    return (2.0 + 0.3 * p) / (2.0 + p + 0.6 * p * p)


class AttenuationCurveSet:
    """Sampled field-strength curves keyed by (conductivity, permittivity).

    Values are dB(uV/m) at 1 kW ERP on a shared distance grid. Curves must
    be strictly decreasing with distance; when a seawater curve is present
    it must dominate every other curve from 50 km out.
    """

    def __init__(self, frequency_hz: float, distance_grid_m: np.ndarray, curves: dict):
        self.frequency_hz = float(frequency_hz)
        grid = np.asarray(distance_grid_m, dtype=float)
        if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0):
            raise CurveDataError("distance grid must be strictly increasing, >= 2 samples")
        if grid[0] < CURVE_D_MIN_M * (1 - 1e-9) or grid[-1] > CURVE_D_MAX_M * (1 + 1e-9):
            raise CurveDataError(
                f"distance grid must lie within [{CURVE_D_MIN_M:.0f}, {CURVE_D_MAX_M:.0f}] m"
            )
        self.distance_grid_m = grid
        self._log_d = np.log(grid)
        self.keys = list(curves.keys())
        self._values = np.array([curves[k] for k in self.keys], dtype=float)
        if self._values.shape != (len(self.keys), len(grid)):
            raise CurveDataError("every curve must be sampled on the shared distance grid")
        if np.any(np.diff(self._values, axis=1) >= 0):
            raise CurveDataError("curves must be strictly decreasing in distance")
        self._key_index = {k: i for i, k in enumerate(self.keys)}
        self._log_sigma = np.array([math.log10(k[0]) for k in self.keys])
        self._log_eps = np.array([math.log10(k[1]) for k in self.keys])
        self._check_seawater_dominance()

    def _check_seawater_dominance(self):
        i = self._key_index.get(SEAWATER_KEY)
        if i is None:
            return
        far = self.distance_grid_m >= 50_000.0
        sea = self._values[i][far]
        if np.any(self._values[:, far] > sea + 1e-9):
            raise CurveDataError("seawater curve must dominate land curves beyond 50 km")

    @property
    def d_min_m(self) -> float:
        return float(self.distance_grid_m[0])

    @property
    def d_max_m(self) -> float:
        return float(self.distance_grid_m[-1])

    def key_index(self, conductivity_s_per_m: float, relative_permittivity: float) -> int:
        """Index of the exact key, else nearest by log-conductivity distance."""
        k = (conductivity_s_per_m, relative_permittivity)
        idx = self._key_index.get(k)
        if idx is not None:
            return idx
        ds = np.abs(self._log_sigma - math.log10(conductivity_s_per_m))
        de = np.abs(self._log_eps - math.log10(relative_permittivity))
        # primary: conductivity proximity; permittivity settles ties
        return int(np.lexsort((de, ds))[0])

    def evaluate(self, key_idx, distance_m, clamp_below_min: bool = False):
        """Field strength (dB uV/m at 1 kW), log-distance linear interpolation.

        clamp_below_min permits sub-grid interior distances (used by the
        Millington recursion); the public lookup treats them as range errors.
        """
        scalar = np.ndim(distance_m) == 0
        d = np.atleast_1d(np.asarray(distance_m, dtype=float))
        k = np.atleast_1d(np.asarray(key_idx, dtype=int))
        v = self._evaluate_arrays(k, d, clamp_below_min)
        return float(v[0]) if scalar else v

    def _evaluate_arrays(self, key_idx: np.ndarray, d: np.ndarray, clamp_below_min: bool) -> np.ndarray:
        d_hi, d_lo = float(d.max()), float(d.min())
        if d_hi > self.d_max_m * (1 + 1e-12):
            raise CurveRangeError(
                f"distance {d_hi:.0f} m beyond curve grid ({self.d_max_m:.0f} m)"
            )
        if d_lo < self.d_min_m * (1 - 1e-12):
            if not clamp_below_min:
                raise CurveRangeError(
                    f"distance {d_lo:.0f} m below curve grid ({self.d_min_m:.0f} m)"
                )
            d = np.maximum(d, self.d_min_m)
        logd = np.log(d)
        pos = np.searchsorted(self._log_d, logd)
        np.maximum(pos, 1, out=pos)
        np.minimum(pos, len(self._log_d) - 1, out=pos)
        lo = self._log_d[pos - 1]
        w = (logd - lo) / (self._log_d[pos] - lo)
        return self._values[key_idx, pos - 1] * (1.0 - w) + self._values[key_idx, pos] * w


def generate_default_curves(
    frequency_hz: float = DEFAULT_FREQUENCY_HZ,
    terrain_table: TerrainClassTable | None = None,
) -> AttenuationCurveSet:
    """Build the analytic flat-earth curve set for every (sigma, eps) in the table."""
    if not 50_000.0 <= frequency_hz <= 500_000.0:
        raise ValueError(f"frequency {frequency_hz} Hz outside [50 kHz, 500 kHz]")
    if terrain_table is None:
        from .geodata import default_terrain_table

        terrain_table = default_terrain_table()
    grid = np.geomspace(CURVE_D_MIN_M, CURVE_D_MAX_M, CURVE_N_SAMPLES)
    ref = reference_field_dbuvm(grid)
    curves = {}
    for e in terrain_table.entries:
        key = (e.conductivity_s_per_m, e.relative_permittivity)
        if key in curves:
            continue
        p = numerical_distance(grid, key[0], key[1], frequency_hz)
        curves[key] = ref + 20.0 * np.log10(flat_earth_attenuation(p))
    return AttenuationCurveSet(frequency_hz, grid, curves)


def load_curves(source, frequency_hz: float = DEFAULT_FREQUENCY_HZ) -> AttenuationCurveSet:
    """Load digitized curves from CSV: sigma_s_per_m,epsilon,distance_m,field_dbuvm.

    All curves must be sampled on one shared distance column.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.DictReader(source)
    required = {"sigma_s_per_m", "epsilon", "distance_m", "field_dbuvm"}
    if reader.fieldnames is None or not required.issubset(reader.fieldnames):
        raise CurveDataError(f"curve table header must contain {sorted(required)}")
    samples: dict = {}
    for row in reader:
        key = (float(row["sigma_s_per_m"]), float(row["epsilon"]))
        samples.setdefault(key, []).append((float(row["distance_m"]), float(row["field_dbuvm"])))
    if not samples:
        raise CurveDataError("curve table has no rows")
    grids = []
    curves = {}
    for key, pts in samples.items():
        pts.sort(key=lambda t: t[0])
        d = np.array([t[0] for t in pts])
        v = np.array([t[1] for t in pts])
        grids.append(d)
        curves[key] = v
    for g in grids[1:]:
        if len(g) != len(grids[0]) or np.any(g != grids[0]):
            raise CurveDataError("all curves must share one distance grid")
    return AttenuationCurveSet(frequency_hz, grids[0], curves)


def homogeneous_field_strength(
    distance_m: float,
    conductivity_s_per_m: float,
    relative_permittivity: float,
    curves: AttenuationCurveSet,
) -> float:
    """Curve lookup for a homogeneous path, dB(uV/m) at 1 kW ERP."""
    idx = curves.key_index(conductivity_s_per_m, relative_permittivity)
    return float(curves.evaluate(idx, float(distance_m)))


def _chain_pass(values_at_bound: np.ndarray, values_at_prev: np.ndarray) -> float:
    if len(values_at_bound) == 1:
        return float(values_at_bound[0])
    return float(values_at_bound[0] + np.sum(values_at_bound[1:] - values_at_prev))


def millington_mixed_path(path: PathProfile, curves: AttenuationCurveSet) -> float:
    """Millington field strength over a piecewise-homogeneous path, 1 kW ERP.

    Forward and reverse curve-chaining passes are averaged, which makes the
    result exactly invariant under path reversal. All curve lookups for both
    passes go through one vectorized evaluation.
    """
    total = path.total_length_m
    if total < curves.d_min_m * (1 - 1e-12) or total > curves.d_max_m * (1 + 1e-12):
        raise CurveRangeError(
            f"path length {total:.0f} m outside curve grid "
            f"[{curves.d_min_m:.0f}, {curves.d_max_m:.0f}] m"
        )
    key_idx = np.array(
        [
            curves.key_index(s.conductivity_s_per_m, s.relative_permittivity)
            for s in path.segments
        ],
        dtype=int,
    )
    lengths = np.array([s.length_m for s in path.segments])
    n = len(key_idx)
    bounds_f = np.cumsum(lengths)
    key_r = key_idx[::-1]
    bounds_r = np.cumsum(lengths[::-1])
    dist = np.concatenate([bounds_f, bounds_f[: n - 1], bounds_r, bounds_r[: n - 1]])
    keys = np.concatenate([key_idx, key_idx[1:], key_r, key_r[1:]])
    v = curves._evaluate_arrays(keys, dist, clamp_below_min=True)
    fwd = _chain_pass(v[:n], v[n : 2 * n - 1])
    rev = _chain_pass(v[2 * n - 1 : 3 * n - 1], v[3 * n - 1 :])
    return (fwd + rev) / 2.0


@dataclass
class LinkBudget:
    tx: GeoPoint
    rx: GeoPoint
    erp_kw: float
    field_strength_dBuVm: float
    path: PathProfile

    def __post_init__(self):
        if not math.isfinite(self.field_strength_dBuVm):
            raise ValueError("field strength must be finite")
        if self.path.total_length_m <= 0:
            raise ValueError("link distance must be positive")


def received_field_strength(
    tx,
    rx: GeoPoint,
    grid: ConductivityGrid,
    curves: AttenuationCurveSet,
    step_m: float = 1000.0,
) -> LinkBudget:
    """Field strength at rx from a transmitter (needs .location and .erp_kw).

    Millington over the sampled path plus 10*log10(ERP) for the actual power.
    """
    if tx.erp_kw <= 0:
        raise ValueError("transmitter ERP must be positive")
    path = sample_path(tx.location, rx, grid, step_m)
    field = millington_mixed_path(path, curves) + 10.0 * math.log10(tx.erp_kw)
    return LinkBudget(
        tx=tx.location, rx=rx, erp_kw=tx.erp_kw, field_strength_dBuVm=field, path=path
    )
