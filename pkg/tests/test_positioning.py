import math

import numpy as np
import pytest

from loransim.errors import GeometryError
from loransim.positioning import (
    PositionErrorCovariance,
    StationGeometry,
    build_geometry_matrix,
    build_weight_matrix,
    horizontal_accuracy_95,
    monte_carlo_accuracy,
    position_covariance,
    solve_covariance,
)

CARDINAL = [0.0, math.pi / 2, math.pi, 3 * math.pi / 2]


def stations(azimuths, sigmas=None, chains=None):
    sigmas = sigmas or [1.0] * len(azimuths)
    chains = chains or ["A"] * len(azimuths)
    return [
        StationGeometry(f"S{i}", az, s, ch)
        for i, (az, s, ch) in enumerate(zip(azimuths, sigmas, chains))
    ]


class TestWeightMatrix:
    def test_reciprocal_squares(self):
        W = build_weight_matrix([1.0, 2.0])
        np.testing.assert_allclose(W, np.diag([1.0, 0.25]))

    def test_unit_weights(self):
        np.testing.assert_array_equal(build_weight_matrix([1.0, 1.0, 1.0]), np.eye(3))

    def test_zero_sigma_rejected(self):
        with pytest.raises(GeometryError):
            build_weight_matrix([1.0, 0.0])


class TestGeometryMatrix:
    def test_cardinal_single_clock(self):
        G = build_geometry_matrix(stations(CARDINAL), "single")
        expected = np.array(
            [[1, 0, 1], [0, 1, 1], [-1, 0, 1], [0, -1, 1]], dtype=float
        )
        np.testing.assert_allclose(G, expected, atol=1e-15)

    def test_two_chains_per_chain_mode(self):
        sts = stations(CARDINAL, chains=["A", "A", "B", "B"])
        G = build_geometry_matrix(sts, "per_chain")
        assert G.shape == (4, 4)
        np.testing.assert_allclose(G[:, 2], [1, 1, 0, 0], atol=0)
        np.testing.assert_allclose(G[:, 3], [0, 0, 1, 1], atol=0)

    def test_too_few_stations_single(self):
        with pytest.raises(GeometryError):
            build_geometry_matrix(stations([0.0, 1.0]), "single")

    def test_too_few_stations_per_chain(self):
        sts = stations([0.0, 1.0, 2.0], chains=["A", "A", "B"])
        with pytest.raises(GeometryError):
            build_geometry_matrix(sts, "per_chain")  # needs 2 + 2 = 4

    def test_azimuth_range_enforced(self):
        with pytest.raises(ValueError):
            StationGeometry("X", -0.1, 1.0)
        with pytest.raises(ValueError):
            StationGeometry("X", 2 * math.pi, 1.0)


class TestPositionCovariance:
    def test_cardinal_hand_computed(self):
        G = build_geometry_matrix(stations(CARDINAL), "single")
        cov = position_covariance(G, np.eye(4))
        np.testing.assert_allclose(cov.matrix, np.diag([0.5, 0.5, 0.25]), atol=1e-12)

    def test_collinear_rejected(self):
        G = build_geometry_matrix(stations([0.0, 0.0, 0.0]), "single")
        with pytest.raises(GeometryError):
            position_covariance(G, np.eye(3))

    def test_sigma_scaling_law(self):
        sts = stations([0.1, 1.7, 3.0, 4.9], sigmas=[1.0, 2.0, 1.5, 3.0])
        cov1 = solve_covariance(sts, "single")
        scaled = stations([0.1, 1.7, 3.0, 4.9], sigmas=[3.0, 6.0, 4.5, 9.0])
        cov3 = solve_covariance(scaled, "single")
        np.testing.assert_allclose(cov3.matrix, 9.0 * cov1.matrix, rtol=1e-9)

    def test_symmetric_psd(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            az = np.sort(rng.uniform(0, 2 * math.pi, 5))
            sig = rng.uniform(0.5, 10.0, 5)
            cov = solve_covariance(stations(list(az), list(sig)), "single")
            np.testing.assert_allclose(cov.matrix, cov.matrix.T, atol=0)
            assert np.all(np.linalg.eigvalsh(cov.matrix) >= -1e-12)

    def test_invalid_covariance_rejected(self):
        with pytest.raises(ValueError):
            PositionErrorCovariance(np.array([[1.0, 2.0], [3.0, 4.0]]), n_clock=0)


class TestAccuracy:
    def test_unit_diagonal(self):
        cov = PositionErrorCovariance(np.diag([1.0, 1.0, 1.0]))
        assert horizontal_accuracy_95(cov) == pytest.approx(2 * math.sqrt(2), rel=1e-12)

    def test_cardinal_case(self):
        cov = solve_covariance(stations(CARDINAL), "single")
        assert horizontal_accuracy_95(cov) == pytest.approx(2.0, rel=1e-12)

    def test_rotation_invariance(self):
        az = [0.3, 1.9, 3.3, 5.1]
        sig = [1.0, 2.0, 1.4, 0.9]
        base = horizontal_accuracy_95(solve_covariance(stations(az, sig), "single"))
        for rot in (0.7, 2.1, 4.5):
            rotated = [(a + rot) % (2 * math.pi) for a in az]
            acc = horizontal_accuracy_95(solve_covariance(stations(rotated, sig), "single"))
            assert acc == pytest.approx(base, rel=1e-9)

    def test_extra_station_never_hurts(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            az = list(np.sort(rng.uniform(0, 2 * math.pi, 4)))
            sig = list(rng.uniform(0.5, 5.0, 4))
            base = solve_covariance(stations(az, sig), "single")
            extra_az = az + [float(rng.uniform(0, 2 * math.pi))]
            extra_sig = sig + [float(rng.uniform(0.5, 5.0))]
            bigger = solve_covariance(stations(extra_az, extra_sig), "single")
            assert (
                bigger.horizontal_variance_m2
                <= base.horizontal_variance_m2 * (1 + 1e-9)
            )


class TestMonteCarlo:
    def test_cardinal_matches_analytic(self):
        sts = stations(CARDINAL, sigmas=[1.5] * 4)
        analytic = horizontal_accuracy_95(solve_covariance(sts, "single"))
        assert analytic == pytest.approx(2 * 1.5, rel=1e-12)
        empirical = monte_carlo_accuracy(sts, "single", trials=20_000, seed=1)
        assert abs(empirical - analytic) / analytic < 0.015

    def test_sigma_doubling_exact_with_same_seed(self):
        sts1 = stations(CARDINAL, sigmas=[1.0] * 4)
        sts2 = stations(CARDINAL, sigmas=[2.0] * 4)
        a = monte_carlo_accuracy(sts1, "single", trials=5000, seed=9)
        b = monte_carlo_accuracy(sts2, "single", trials=5000, seed=9)
        assert b == pytest.approx(2 * a, rel=1e-12)

    def test_deterministic_for_fixed_seed(self):
        sts = stations(CARDINAL)
        a = monte_carlo_accuracy(sts, "single", trials=2000, seed=123)
        b = monte_carlo_accuracy(sts, "single", trials=2000, seed=123)
        assert a == b

    def test_minimum_trials_enforced(self):
        with pytest.raises(ValueError):
            monte_carlo_accuracy(stations(CARDINAL), trials=10)

    def test_per_chain_mode_agrees(self):
        sts = stations(
            [0.2, 1.8, 3.1, 4.7, 5.9],
            sigmas=[1.0, 1.2, 0.8, 2.0, 1.1],
            chains=["A", "A", "B", "B", "B"],
        )
        analytic = horizontal_accuracy_95(solve_covariance(sts, "per_chain"))
        empirical = monte_carlo_accuracy(sts, "per_chain", trials=20_000, seed=3)
        assert abs(empirical - analytic) / analytic < 0.015
