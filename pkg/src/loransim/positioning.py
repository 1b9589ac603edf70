"""Weighted-least-squares position error covariance and 95% accuracy.

The geometry matrix rows hold the direction cosines of the user-to-station
azimuths plus receiver clock columns: a single shared clock column, or one
indicator column per Loran chain for multichain fixes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class StationGeometry:
    station_id: str
    azimuth_rad: float  # user -> station, clockwise from north
    sigma_m: float
    chain_id: str = ""

    def __post_init__(self):
        if not 0.0 <= self.azimuth_rad < 2.0 * math.pi:
            raise ValueError("azimuth must be in [0, 2*pi)")
        if self.sigma_m <= 0:
            raise ValueError("sigma must be positive")


@dataclass
class PositionErrorCovariance:
    """Symmetric PSD covariance of (x, y, clock...) errors, m^2."""

    matrix: np.ndarray
    n_clock: int = 1

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != 2 + self.n_clock:
            raise ValueError(f"expected ({2 + self.n_clock})-square matrix")
        scale = float(np.abs(m).max()) or 1.0
        if float(np.abs(m - m.T).max()) > 1e-9 * scale:
            raise ValueError("covariance must be symmetric")
        if np.any(np.diag(m) < 0):
            raise ValueError("covariance diagonal must be nonnegative")
        self.matrix = m

    @property
    def sigma_x2(self) -> float:
        return float(self.matrix[0, 0])

    @property
    def sigma_y2(self) -> float:
        return float(self.matrix[1, 1])

    @property
    def sigma_xy(self) -> float:
        return float(self.matrix[0, 1])

    @property
    def horizontal_variance_m2(self) -> float:
        return self.sigma_x2 + self.sigma_y2


def build_weight_matrix(sigmas_m) -> np.ndarray:
    """Diagonal weights 1/sigma_i^2 (the inverse of diag(sigma_i^2))."""
    s = np.asarray(sigmas_m, dtype=float)
    if s.size == 0:
        raise GeometryError("need at least one sigma")
    if np.any(s <= 0) or not np.all(np.isfinite(s)):
        raise GeometryError("all sigmas must be positive and finite")
    return np.diag(1.0 / s**2)


def _chain_order(stations) -> list[str]:
    seen: list[str] = []
    for st in stations:
        if st.chain_id not in seen:
            seen.append(st.chain_id)
    return seen


def build_geometry_matrix(stations, clock_mode: str = "single") -> np.ndarray:
    """Rows [cos az, sin az, clock columns] for every station.

    single: one shared clock column of ones (needs N >= 3).
    per_chain: one indicator column per chain (needs N >= 2 + n_chains).
    """
    if clock_mode not in ("single", "per_chain"):
        raise ValueError(f"unknown clock mode {clock_mode!r}")
    n = len(stations)
    if clock_mode == "single":
        if n < 3:
            raise GeometryError(f"single-clock fix needs >= 3 stations, got {n}")
        clock = np.ones((n, 1))
    else:
        chains = _chain_order(stations)
        if n < 2 + len(chains):
            raise GeometryError(
                f"per-chain fix with {len(chains)} chains needs >= {2 + len(chains)} stations, got {n}"
            )
        clock = np.zeros((n, len(chains)))
        for i, st in enumerate(stations):
            clock[i, chains.index(st.chain_id)] = 1.0
    az = np.array([st.azimuth_rad for st in stations])
    return np.column_stack([np.cos(az), np.sin(az), clock])


def _checked_inverse(normal: np.ndarray) -> np.ndarray:
    """Invert the normal matrix, rejecting ill-conditioned geometry.

    Uses the 1-norm condition estimate, which avoids an SVD in the sweep's
    inner loop.
    """
    try:
        inv = np.linalg.inv(normal)
    except np.linalg.LinAlgError as exc:
        raise GeometryError(f"singular normal matrix: {exc}") from exc
    cond = np.linalg.norm(normal, 1) * np.linalg.norm(inv, 1)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise GeometryError(
            f"normal matrix condition {cond:.3g} exceeds {CONDITION_LIMIT:.0e}"
        )
    return inv


def position_covariance(G: np.ndarray, W: np.ndarray) -> PositionErrorCovariance:
    """(G^T W G)^-1 with a conditioning guard for near-collinear geometry."""
    G = np.asarray(G, dtype=float)
    W = np.asarray(W, dtype=float)
    cov = _checked_inverse(G.T @ W @ G)
    cov = (cov + cov.T) / 2.0  # enforce exact symmetry
    return PositionErrorCovariance(matrix=cov, n_clock=G.shape[1] - 2)


def horizontal_accuracy_95(cov: PositionErrorCovariance) -> float:
    """95% repeatable horizontal accuracy: 2*sqrt(sigma_x^2 + sigma_y^2), meters."""
    return 2.0 * math.sqrt(cov.horizontal_variance_m2)


def solve_covariance(stations, clock_mode: str = "single") -> PositionErrorCovariance:
    """Covariance straight from station geometry (weight matrix built inline)."""
    G = build_geometry_matrix(stations, clock_mode)
    W = build_weight_matrix([st.sigma_m for st in stations])
    return position_covariance(G, W)


def monte_carlo_accuracy(
    stations,
    clock_mode: str = "single",
    trials: int = 20_000,
    seed: int = 0,
) -> float:
    """Empirical 2*rms horizontal error of seeded WLS solutions.

    Verification oracle for horizontal_accuracy_95: simulates zero-mean
    Gaussian range errors with each station's sigma and solves the same
    weighted least squares per trial.
    """
    if trials < 1000:
        raise ValueError("need >= 1000 trials for a stable estimate")
    G = build_geometry_matrix(stations, clock_mode)
    W = build_weight_matrix([st.sigma_m for st in stations])
    solver = _checked_inverse(G.T @ W @ G) @ (G.T @ W)  # (2+C, N) error projection
    rng = np.random.default_rng(seed)
    sigmas = np.array([st.sigma_m for st in stations])
    errors = rng.standard_normal((trials, len(stations))) * sigmas
    solutions = errors @ solver.T
    return 2.0 * math.sqrt(float(np.mean(solutions[:, 0] ** 2 + solutions[:, 1] ** 2)))
