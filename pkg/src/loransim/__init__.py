"""eLoran/Loran positioning-accuracy simulator.

Predicts regional 95% repeatable accuracy from transmitter configurations,
land-cover-derived ground conductivity, atmospheric noise, and transmitter
jitters, and estimates those jitters from raw time-of-reception logs.
"""

from .coverage import (
    AccuracyGrid,
    ComparisonRecord,
    ComparisonReport,
    Region,
    Scenario,
    Transmitter,
    compare_sites,
    improvement_metric,
    load_scenario_file,
    scenario_content_hash,
    simulate_accuracy_map,
    simulate_point,
)
from .error_model import ErrorModelParams, MeasurementNoise, measurement_sigma, n_pulses
from .errors import LoranSimError
from .geodata import (
    ConductivityGrid,
    GeoPoint,
    LandCoverGrid,
    PathProfile,
    TerrainClassTable,
    classify_conductivity,
    default_terrain_table,
    downsample,
    load_land_cover,
    sample_path,
)
from .jitter import (
    JitterEstimate,
    TORSeries,
    average_jitters,
    estimate_jitter,
    estimate_pair_jitters,
    optimize_bandwidth,
    remove_outliers,
)
from .noise import NoiseModel, SnrEstimate, compute_snr, noise_at
from .positioning import (
    PositionErrorCovariance,
    StationGeometry,
    build_geometry_matrix,
    build_weight_matrix,
    horizontal_accuracy_95,
    monte_carlo_accuracy,
    position_covariance,
)
from .propagation import (
    AttenuationCurveSet,
    LinkBudget,
    generate_default_curves,
    homogeneous_field_strength,
    millington_mixed_path,
    received_field_strength,
)

__version__ = "0.1.0"
