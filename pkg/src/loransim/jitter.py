"""Transmitter jitter estimation from raw time-of-reception logs.

Pipeline per same-chain transmitter pair observed at one site: MAD outlier
removal, Gaussian-kernel bias estimation, kernel bandwidth optimized
against the TDOA variance identity (the sum of the two detrended variances
must approach the TDOA variance, which is immune to common biases), then
inversion of the measurement error model for each station's jitter.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import fftconvolve

from .error_model import ErrorModelParams, n_pulses as compute_n_pulses
from .errors import AlignmentError, ConfigError, InfeasibleJitterError
from .noise import SnrEstimate, snr_from_db

MAD_FLOOR = 1e-9
KERNEL_HALF_WIDTHS = 4.0  # truncate the Gaussian kernel at +/- 4 bandwidths
DEFAULT_BANDWIDTH_GRID = np.geomspace(0.1, 1000.0, 60)
ALIGN_TOLERANCE_S = 0.5


@dataclass(frozen=True)
class TORRecord:
    timestamp_s: float
    tor_us: float
    snr_db: float


@dataclass
class TORSeries:
    """Time-ordered TOR measurements from one station at one site."""

    station_id: str
    site_id: str
    gri_designator: int
    t_s: np.ndarray
    tor_us: np.ndarray
    snr_db: np.ndarray

    def __post_init__(self):
        self.t_s = np.asarray(self.t_s, dtype=float)
        self.tor_us = np.asarray(self.tor_us, dtype=float)
        self.snr_db = np.asarray(self.snr_db, dtype=float)
        if not (len(self.t_s) == len(self.tor_us) == len(self.snr_db)):
            raise ValueError("timestamp/TOR/SNR arrays must have equal length")
        if len(self.t_s) >= 2 and np.any(np.diff(self.t_s) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        for a in (self.t_s, self.tor_us, self.snr_db):
            if not np.all(np.isfinite(a)):
                raise ValueError("series values must be finite")

    @property
    def m(self) -> int:
        return len(self.t_s)

    @property
    def records(self) -> list[TORRecord]:
        return [
            TORRecord(float(t), float(x), float(s))
            for t, x, s in zip(self.t_s, self.tor_us, self.snr_db)
        ]

    def take(self, index) -> "TORSeries":
        return TORSeries(
            self.station_id,
            self.site_id,
            self.gri_designator,
            self.t_s[index],
            self.tor_us[index],
            self.snr_db[index],
        )

    def mean_snr_db(self) -> float:
        return float(np.mean(self.snr_db))


@dataclass
class DetrendResult:
    bandwidth_s: float
    bias_us: np.ndarray
    residual_variance_us2: float


@dataclass(frozen=True)
class JitterEstimate:
    station_id: str
    jitter_m: float
    sigma_i_us2: float
    snr_linear: float
    n_pulses: float
    optimal_bandwidth_s: float | None = None
    bias_elimination_error_us2: float | None = None
    range_constant_m: float = 337.5
    speed_of_light_m_per_us: float = 299.792458
    site_id: str = ""

    def __post_init__(self):
        if self.jitter_m < 0:
            raise ValueError("jitter must be nonnegative")
        sigma_m2 = self.sigma_i_us2 * self.speed_of_light_m_per_us**2
        noise_m2 = self.range_constant_m**2 / (self.n_pulses * self.snr_linear)
        j = math.sqrt(max(sigma_m2 - noise_m2, 0.0))
        if abs(j - self.jitter_m) > 1e-6 * max(j, 1.0):
            raise ValueError("jitter inconsistent with stored sigma/SNR/pulse inputs")


def _rolling_mad_mask(x: np.ndarray, window: int, k: float) -> np.ndarray:
    """True where |x - median(recent window)| > k * MAD(recent window).

    The window is the trailing `window` samples including the current one.
    """
    n = len(x)
    med = np.empty(n)
    mad = np.empty(n)
    head = min(window, n)
    for i in range(head - 1):
        win = x[: i + 1]
        m = np.median(win)
        med[i] = m
        mad[i] = np.median(np.abs(win - m))
    if n >= window:
        views = np.lib.stride_tricks.sliding_window_view(x, window)
        m = np.median(views, axis=1)
        med[window - 1 :] = m
        mad[window - 1 :] = np.median(np.abs(views - m[:, None]), axis=1)
    elif n > 0:
        win = x
        m = np.median(win)
        med[n - 1] = m
        mad[n - 1] = np.median(np.abs(win - m))
    return np.abs(x - med) > k * np.maximum(mad, MAD_FLOOR)


def remove_outliers(series: TORSeries, window: int = 100, k: float = 3.0) -> TORSeries:
    """Drop records whose TOR or SNR strays beyond k MADs of the recent median."""
    if window < 3:
        raise ValueError("window must be >= 3")
    if series.m < 3:
        warnings.warn(
            f"series {series.station_id}@{series.site_id} too short for outlier "
            "screening; passed through",
            stacklevel=2,
        )
        return series
    bad = _rolling_mad_mask(series.tor_us, window, k) | _rolling_mad_mask(
        series.snr_db, window, k
    )
    return series.take(~bad)


_MAX_SNAP_GRID = 20_000_000  # refuse grid-snapped FFT beyond this many slots


def _snap_to_grid(t_s: np.ndarray):
    """Indices of samples on a uniform base grid, or None if not grid-like.

    Series with dropped records are uniform grids with holes; treating them
    this way keeps the FFT path after outlier removal.
    """
    if len(t_s) < 2:
        return None
    dt = float(np.min(np.diff(t_s)))
    if dt <= 0:
        return None
    rel = (t_s - t_s[0]) / dt
    idx = np.round(rel)
    if np.max(np.abs(rel - idx)) > 1e-6:
        return None
    size = int(idx[-1]) + 1
    if size > _MAX_SNAP_GRID:
        return None
    return idx.astype(np.int64), dt, size


def gaussian_smooth_values(t_s: np.ndarray, x: np.ndarray, bandwidth_s: float) -> np.ndarray:
    """Discrete Gaussian-kernel smoothing with per-point renormalization.

    The kernel is truncated at +/- 4 bandwidths and its weights renormalized
    over the samples actually present, which keeps boundaries and irregular
    sampling unbiased. Series on a uniform base grid (holes allowed) take a
    masked FFT path that is algebraically identical to the direct sum.
    """
    if bandwidth_s <= 0:
        raise ValueError("bandwidth must be positive")
    n = len(x)
    if n == 0:
        return np.array([])
    snapped = _snap_to_grid(t_s) if n > 1 else None
    if snapped is not None:
        idx, dt, size = snapped
        # weights past the series span multiply an empty mask; capping there
        # keeps huge bandwidths cheap without changing the result
        half = min(int(KERNEL_HALF_WIDTHS * bandwidth_s / dt), size - 1)
        if half == 0:
            return x.astype(float).copy()
        offsets = np.arange(-half, half + 1) * dt
        w = np.exp(-(offsets**2) / (2.0 * bandwidth_s**2))
        mean = float(np.mean(x))
        values = np.zeros(size)
        mask = np.zeros(size)
        values[idx] = x - mean
        mask[idx] = 1.0
        num = fftconvolve(values, w, mode="same")
        den = fftconvolve(mask, w, mode="same")
        return mean + num[idx] / den[idx]
    out = np.empty(n, dtype=float)
    reach = KERNEL_HALF_WIDTHS * bandwidth_s
    for i in range(n):
        lo = np.searchsorted(t_s, t_s[i] - reach, side="left")
        hi = np.searchsorted(t_s, t_s[i] + reach, side="right")
        w = np.exp(-((t_s[lo:hi] - t_s[i]) ** 2) / (2.0 * bandwidth_s**2))
        out[i] = np.dot(w, x[lo:hi]) / np.sum(w)
    return out


def gaussian_smooth(series: TORSeries, bandwidth_s: float) -> np.ndarray:
    """Smoothed bias component of the TOR series, in microseconds."""
    return gaussian_smooth_values(series.t_s, series.tor_us, bandwidth_s)


def detrend(series: TORSeries, bandwidth_s: float) -> DetrendResult:
    if series.m < 2:
        raise ValueError("need >= 2 records to detrend")
    bias = gaussian_smooth(series, bandwidth_s)
    residual = series.tor_us - bias
    return DetrendResult(
        bandwidth_s=bandwidth_s,
        bias_us=bias,
        residual_variance_us2=float(np.var(residual, ddof=1)),
    )


def detrended_variance(series: TORSeries, bandwidth_s: float) -> float:
    """Unbiased variance of the bias-removed TOR series, us^2."""
    return detrend(series, bandwidth_s).residual_variance_us2


def raw_variance(series: TORSeries) -> float:
    """Unbiased sample variance of raw TOR over the series span, us^2."""
    if series.m < 2:
        raise ValueError("need >= 2 records for a sample variance")
    return float(np.var(series.tor_us, ddof=1))


def _nearest_index(t_from: np.ndarray, t_to: np.ndarray) -> np.ndarray:
    pos = np.searchsorted(t_to, t_from)
    left = np.clip(pos - 1, 0, len(t_to) - 1)
    right = np.clip(pos, 0, len(t_to) - 1)
    pick_right = np.abs(t_to[right] - t_from) < np.abs(t_from - t_to[left])
    return np.where(pick_right, right, left)


def align_epochs(
    t1: np.ndarray, t2: np.ndarray, tolerance_s: float = ALIGN_TOLERANCE_S
) -> tuple[np.ndarray, np.ndarray]:
    """Mutually-nearest epoch pairs within the tolerance; unmatched dropped.

    Symmetric: swapping the arguments swaps the returned index arrays.
    """
    n12 = _nearest_index(t1, t2)
    n21 = _nearest_index(t2, t1)
    i = np.arange(len(t1))
    mutual = n21[n12] == i
    close = np.abs(t2[n12] - t1) <= tolerance_s
    keep = mutual & close
    return i[keep], n12[keep]


@dataclass
class TdoaSeries:
    t_s: np.ndarray
    tdoa_us: np.ndarray

    def variance_us2(self) -> float:
        return float(np.var(self.tdoa_us, ddof=1))


def tdoa_series(
    tor1: TORSeries, tor2: TORSeries, ed1_us: float = 0.0, ed2_us: float = 0.0
) -> TdoaSeries:
    """Epoch-wise (TOR1 - TOR2) + (ED1 - ED2); common receiver biases cancel."""
    i1, i2 = align_epochs(tor1.t_s, tor2.t_s)
    if len(i1) < 2:
        raise AlignmentError(
            f"only {len(i1)} matched epochs between {tor1.station_id} and {tor2.station_id}"
        )
    tdoa = (tor1.tor_us[i1] - tor2.tor_us[i2]) + (ed1_us - ed2_us)
    return TdoaSeries(t_s=tor1.t_s[i1], tdoa_us=tdoa)


def _aligned_pair(tor1: TORSeries, tor2: TORSeries) -> tuple[TORSeries, TORSeries]:
    i1, i2 = align_epochs(tor1.t_s, tor2.t_s)
    if len(i1) < 2:
        raise AlignmentError(
            f"only {len(i1)} matched epochs between {tor1.station_id} and {tor2.station_id}"
        )
    return tor1.take(i1), tor2.take(i2)


def bias_elimination_error(
    tor1: TORSeries, tor2: TORSeries, bandwidth_s: float
) -> float:
    """e(b) = |sigma1^2(b) + sigma2^2(b) - sigma_TDOA^2| on the matched epochs."""
    a1, a2 = _aligned_pair(tor1, tor2)
    var_tdoa = float(np.var(a1.tor_us - a2.tor_us, ddof=1))
    s1 = detrended_variance(a1, bandwidth_s)
    s2 = detrended_variance(a2, bandwidth_s)
    return abs(s1 + s2 - var_tdoa)


def optimize_bandwidth(
    tor1: TORSeries, tor2: TORSeries, b_grid=None
) -> tuple[float, float]:
    """Grid argmin of the bias elimination error; ties go to the smaller bandwidth."""
    if b_grid is None:
        b_grid = DEFAULT_BANDWIDTH_GRID
    b_grid = np.asarray(b_grid, dtype=float)
    if b_grid.size == 0 or np.any(b_grid <= 0) or np.any(np.diff(b_grid) <= 0):
        raise ValueError("bandwidth grid must be positive and strictly increasing")
    a1, a2 = _aligned_pair(tor1, tor2)
    var_tdoa = float(np.var(a1.tor_us - a2.tor_us, ddof=1))
    errors = np.array(
        [
            abs(detrended_variance(a1, b) + detrended_variance(a2, b) - var_tdoa)
            for b in b_grid
        ]
    )
    k = int(np.argmin(errors))  # first minimum = smallest bandwidth on ties
    return float(b_grid[k]), float(errors[k])


def estimate_jitter(
    sigma_i_us2: float,
    snr: SnrEstimate,
    n_pulses: float,
    params: ErrorModelParams = ErrorModelParams(),
    station_id: str = "",
) -> JitterEstimate:
    """Invert the measurement error model: J = sqrt(sigma^2 - K^2/(N*SNR)).

    A negative radicand raises InfeasibleJitterError carrying the deficit;
    it is never clamped to zero.
    """
    if sigma_i_us2 < 0:
        raise ValueError("sigma_i^2 must be nonnegative")
    c = params.speed_of_light_m_per_us
    sigma_m2 = sigma_i_us2 * c * c
    noise_m2 = params.range_constant_m**2 / (n_pulses * snr.snr_linear)
    radicand = sigma_m2 - noise_m2
    if radicand < 0:
        raise InfeasibleJitterError(
            f"station {station_id or '?'}: detrended variance {sigma_m2:.6g} m^2 "
            f"below SNR noise floor {noise_m2:.6g} m^2 (deficit {-radicand:.6g} m^2)",
            deficit_m2=-radicand,
        )
    return JitterEstimate(
        station_id=station_id,
        jitter_m=math.sqrt(radicand),
        sigma_i_us2=sigma_i_us2,
        snr_linear=snr.snr_linear,
        n_pulses=n_pulses,
        range_constant_m=params.range_constant_m,
        speed_of_light_m_per_us=c,
    )


@dataclass(frozen=True)
class PairEstimationConfig:
    params: ErrorModelParams = ErrorModelParams()
    bandwidth_grid: tuple = tuple(DEFAULT_BANDWIDTH_GRID)
    outlier_window: int = 100
    outlier_k: float = 3.0


def estimate_pair_jitters(
    tor1: TORSeries, tor2: TORSeries, config: PairEstimationConfig = PairEstimationConfig()
) -> tuple[JitterEstimate, JitterEstimate]:
    """Full jitter pipeline for two same-chain transmitters observed together.

    Outlier removal, shared bandwidth optimization, per-station detrended
    variance at the optimum, then per-station inversion using that station's
    mean measured SNR and its GRI-derived pulse count.
    """
    if tor1.site_id != tor2.site_id:
        raise ConfigError(
            f"pair must share a site: {tor1.site_id!r} vs {tor2.site_id!r}"
        )
    if tor1.gri_designator != tor2.gri_designator:
        raise ConfigError(
            f"pair must share a chain GRI: {tor1.gri_designator} vs {tor2.gri_designator}"
        )
    f1 = remove_outliers(tor1, config.outlier_window, config.outlier_k)
    f2 = remove_outliers(tor2, config.outlier_window, config.outlier_k)
    b_grid = np.asarray(config.bandwidth_grid)
    b_star, e_star = optimize_bandwidth(f1, f2, b_grid)
    a1, a2 = _aligned_pair(f1, f2)
    estimates = []
    for filtered, aligned in ((f1, a1), (f2, a2)):
        sigma_us2 = detrended_variance(aligned, b_star)
        snr = snr_from_db(filtered.mean_snr_db())
        pulses = compute_n_pulses(
            filtered.gri_designator,
            config.params.integration_time_s,
            config.params.pulses_per_gri,
        )
        est = estimate_jitter(
            sigma_us2, snr, pulses, config.params, station_id=filtered.station_id
        )
        estimates.append(
            replace(
                est,
                optimal_bandwidth_s=b_star,
                bias_elimination_error_us2=e_star,
                site_id=filtered.site_id,
            )
        )
    return estimates[0], estimates[1]


def average_jitters(estimates) -> dict[str, float]:
    """Arithmetic mean of jitter_m per station across sites."""
    groups: dict[str, list[float]] = {}
    for est in estimates:
        groups.setdefault(est.station_id, []).append(est.jitter_m)
    if not groups:
        raise ValueError("no estimates to average")
    return {sid: float(np.mean(vals)) for sid, vals in groups.items()}


# --- TOR log and report I/O ---------------------------------------------

TOR_LOG_HEADER = ["utc_time_iso8601", "site_id", "station_id", "gri", "tor_us", "snr_db"]
REPORT_HEADER = ["station_id", "site_id", "jitter_m", "sigma_i_us2", "bandwidth_s", "e_us2"]


def read_tor_log(source) -> dict[tuple[str, str], TORSeries]:
    """Parse a TOR log CSV into series keyed by (site_id, station_id)."""
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.DictReader(source)
    if reader.fieldnames is None or not set(TOR_LOG_HEADER).issubset(reader.fieldnames):
        raise ConfigError(f"TOR log header must contain {TOR_LOG_HEADER}")
    buckets: dict[tuple[str, str], dict] = {}
    for row in reader:
        key = (row["site_id"], row["station_id"])
        b = buckets.setdefault(key, {"t": [], "tor": [], "snr": [], "gri": int(row["gri"])})
        b["t"].append(row["utc_time_iso8601"])
        b["tor"].append(float(row["tor_us"]))
        b["snr"].append(float(row["snr_db"]))
    series = {}
    for (site, station), b in buckets.items():
        t_ns = np.array(b["t"], dtype="datetime64[ns]").astype(np.int64)
        series[(site, station)] = TORSeries(
            station_id=station,
            site_id=site,
            gri_designator=b["gri"],
            t_s=t_ns / 1e9,
            tor_us=np.array(b["tor"]),
            snr_db=np.array(b["snr"]),
        )
    return series


def write_jitter_report(estimates, stream) -> None:
    """Per-site rows plus a per-station averages section (site_id 'average')."""
    writer = csv.writer(stream)
    writer.writerow(REPORT_HEADER)
    for est in estimates:
        writer.writerow(
            [
                est.station_id,
                est.site_id,
                f"{est.jitter_m:.6g}",
                f"{est.sigma_i_us2:.6g}",
                "" if est.optimal_bandwidth_s is None else f"{est.optimal_bandwidth_s:.6g}",
                ""
                if est.bias_elimination_error_us2 is None
                else f"{est.bias_elimination_error_us2:.6g}",
            ]
        )
    for station, mean in average_jitters(estimates).items():
        writer.writerow([station, "average", f"{mean:.2f}", "", "", ""])
