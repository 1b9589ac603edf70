import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loransim.error_model import (
    ErrorModelParams,
    RANGE_CONSTANT_M,
    SPEED_OF_LIGHT_M_PER_US,
    measurement_sigma,
    n_pulses,
    snr_noise_variance_m2,
)
from loransim.errors import ConfigError
from loransim.noise import snr_from_db


class TestNPulses:
    def test_gri_9930_one_second(self):
        assert n_pulses(9930, 1.0) == pytest.approx(8.0 / 0.0993, rel=1e-12)

    def test_exactly_one_gri(self):
        assert n_pulses(9930, 0.0993) == 8.0

    def test_gri_7430_five_seconds(self):
        assert n_pulses(7430, 5.0) == pytest.approx(40.0 / 0.0743, rel=1e-12)
        assert n_pulses(7430, 5.0) == pytest.approx(538.36, abs=0.01)

    @pytest.mark.parametrize("gri", [3999, 10000, 0])
    def test_gri_out_of_range(self, gri):
        with pytest.raises(ConfigError):
            n_pulses(gri, 5.0)

    def test_nonpositive_integration_time(self):
        with pytest.raises(ConfigError):
            n_pulses(9930, 0.0)


class TestMeasurementSigma:
    def test_jitter_only_limit(self):
        noise = measurement_sigma(6.0, snr_from_db(100.0), 1e9)
        assert noise.sigma_m == pytest.approx(6.0, rel=1e-9)

    def test_unit_sigma_from_snr_term(self):
        # N * SNR = 337.5^2 makes the noise term exactly 1 m^2
        snr = snr_from_db(0.0)
        noise = measurement_sigma(0.0, snr, RANGE_CONSTANT_M**2)
        assert noise.sigma_m == 1.0

    def test_three_four_five(self):
        snr = snr_from_db(0.0)
        pulses = RANGE_CONSTANT_M**2 / 16.0  # second term exactly 16 m^2
        noise = measurement_sigma(3.0, snr, pulses)
        assert noise.sigma_m == 5.0

    def test_unit_round_trip(self):
        noise = measurement_sigma(4.0, snr_from_db(20.0), 400.0)
        assert noise.sigma_us * SPEED_OF_LIGHT_M_PER_US == pytest.approx(
            noise.sigma_m, rel=1e-12
        )

    def test_nonpositive_snr_rejected(self):
        snr = snr_from_db(0.0)
        object.__setattr__(snr, "snr_linear", 0.0)
        with pytest.raises(ValueError):
            measurement_sigma(1.0, snr, 100.0)

    @given(
        j=st.floats(min_value=0.0, max_value=50.0),
        snr_db=st.floats(min_value=-20.0, max_value=60.0),
        pulses=st.floats(min_value=1.0, max_value=1e4),
    )
    @settings(max_examples=150, deadline=None)
    def test_lower_bounds(self, j, snr_db, pulses):
        snr = snr_from_db(snr_db)
        noise = measurement_sigma(j, snr, pulses)
        assert noise.sigma_m >= j
        assert noise.sigma_m >= RANGE_CONSTANT_M / math.sqrt(pulses * snr.snr_linear) * (1 - 1e-12)

    @given(
        j=st.floats(min_value=0.0, max_value=50.0),
        snr_db=st.floats(min_value=-20.0, max_value=60.0),
        pulses=st.floats(min_value=1.0, max_value=1e4),
    )
    @settings(max_examples=100, deadline=None)
    def test_monotone_in_inputs(self, j, snr_db, pulses):
        snr = snr_from_db(snr_db)
        base = measurement_sigma(j, snr, pulses).sigma_m
        assert measurement_sigma(j + 1.0, snr, pulses).sigma_m >= base
        assert measurement_sigma(j, snr_from_db(snr_db + 3.0), pulses).sigma_m <= base
        assert measurement_sigma(j, snr, pulses * 2.0).sigma_m <= base


class TestParams:
    def test_defaults(self):
        p = ErrorModelParams()
        assert p.range_constant_m == 337.5
        assert p.pulses_per_gri == 8
        assert p.integration_time_s == 5.0

    def test_positive_required(self):
        with pytest.raises(ConfigError):
            ErrorModelParams(range_constant_m=0.0)

    def test_snr_noise_variance(self):
        assert snr_noise_variance_m2(1.0, RANGE_CONSTANT_M**2) == 1.0
