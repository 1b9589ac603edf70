import io
import json
import math

import numpy as np
import pytest

from loransim.coverage import (
    AccuracyGrid,
    ComputeCancelled,
    Region,
    Scenario,
    ScenarioData,
    Transmitter,
    builtin_fixture,
    compare_sites,
    improvement_metric,
    load_fixture_csv,
    load_scenario_file,
    resolve_scenario_data,
    scenario_content_hash,
    scenario_from_dict,
    scenario_to_dict,
    simulate_accuracy_map,
    simulate_point,
)
from loransim.errors import ConfigError
from loransim.geodata import ConductivityGrid, GeoPoint, default_terrain_table
from loransim.noise import NoiseModel
from loransim.propagation import generate_default_curves


def tx(id, lat, lon, erp=100.0, gri=9930, chain="9930", ed=0.0, role="master", jitter=2.0):
    return Transmitter(
        id=id,
        name=id,
        location=GeoPoint(lat, lon),
        erp_kw=erp,
        gri_designator=gri,
        chain_id=chain,
        emission_delay_us=ed,
        role=role,
        jitter_m=jitter,
    )


def sea_scenario(transmitters, region=None, **kw):
    region = region or Region(-1.0, 1.0, -1.0, 1.0, 7000.0)
    defaults = dict(jitter_mode="estimated", clock_mode="auto")
    defaults.update(kw)
    return Scenario(name="test", region=region, transmitters=transmitters, **defaults)


def make_sea_data(noise_db=52.0):
    grid = ConductivityGrid(
        origin=GeoPoint(-10.0, -10.0),
        cell_size_deg=1.0,
        n_cols=20,
        n_rows=20,
        sigma=np.full((20, 20), 5.0),
        eps=np.full((20, 20), 80.0),
    )
    return ScenarioData(
        conductivity=grid,
        curves=generate_default_curves(),
        noise=NoiseModel.constant(noise_db),
        terrain=default_terrain_table(),
    )


@pytest.fixture(scope="module")
def sea_data():
    return make_sea_data()


def cardinal_transmitters(jitter=2.0, d_deg=1.0):
    return [
        tx("N", d_deg, 0.0, jitter=jitter),
        tx("E", 0.0, d_deg, jitter=jitter),
        tx("S", -d_deg, 0.0, jitter=jitter),
        tx("W", 0.0, -d_deg, jitter=jitter),
    ]


class TestImprovementMetric:
    def test_signal_strength_example(self):
        rec = improvement_metric("Incheon", "ss", 56.25, 67.62, 65.19)
        assert rec.improvement_pct == pytest.approx(21.37, abs=0.01)
        assert rec.e_existing == pytest.approx(11.37)
        assert rec.e_proposed == pytest.approx(8.94)

    def test_accuracy_example(self):
        rec = improvement_metric("Incheon", "acc", 10.16, 20.83, 12.10)
        assert rec.improvement_pct == pytest.approx(81.82, abs=0.01)

    def test_perfect_proposed(self):
        rec = improvement_metric("X", "q", 10.0, 12.0, 10.0)
        assert rec.improvement_pct == pytest.approx(100.0)

    def test_negative_improvement_permitted(self):
        rec = improvement_metric("X", "q", 10.0, 11.0, 14.0)
        assert rec.improvement_pct == pytest.approx(-300.0)

    def test_exact_existing_undefined(self):
        rec = improvement_metric("X", "q", 10.0, 10.0, 11.0)
        assert rec.improvement_pct is None

    def test_missing_ground_truth_rejected(self):
        with pytest.raises(ValueError):
            improvement_metric("X", "q", math.nan, 1.0, 2.0)


class TestCompareSites:
    def test_fixture_only_join(self):
        fixtures = builtin_fixture("table4_accuracy")
        report = compare_sites(fixtures)
        assert len(report.records) == 14  # 7 sites x two existing variants
        by_key = {(r.site, r.variant): r for r in report.records}
        assert by_key[("Incheon", "existing_6m")].improvement_pct == pytest.approx(81.82, abs=0.01)
        assert by_key[("Incheon", "existing_4m")].improvement_pct == pytest.approx(50.00, abs=0.01)
        assert by_key[("Pyeongtaek", "existing_6m")].improvement_pct == pytest.approx(81.94, abs=0.01)

    def test_signal_strength_fixture_join(self):
        fixtures = builtin_fixture("table2_signal_strength")
        report = compare_sites(fixtures)
        assert len(report.records) == 10
        by_key = {(r.site, r.quantity): r for r in report.records}
        assert by_key[("Incheon", "ss_pohang_dbuvm")].improvement_pct == pytest.approx(
            21.37, abs=0.01
        )
        assert by_key[("Gimcheon", "ss_gwangju_dbuvm")].improvement_pct == pytest.approx(
            35.21, abs=0.01
        )

    def test_simulated_overrides_proposed(self):
        fixtures = load_fixture_csv(
            "site,quantity,measured,existing_6m,existing_4m,proposed\nA,q,10,12,,11\n"
        )
        report = compare_sites(fixtures, {("A", "q"): 10.5})
        assert report.records[0].sr_proposed == 10.5
        assert report.records[0].improvement_pct == pytest.approx(75.0)

    def test_empty_simulated_no_proposed_rows(self):
        fixtures = load_fixture_csv(
            "site,quantity,measured,existing_6m,existing_4m,proposed\nA,q,10,12,,\n"
        )
        report = compare_sites(fixtures, {})
        assert report.records == []

    def test_unmatched_simulated_reported(self):
        fixtures = builtin_fixture("table4_accuracy")
        report = compare_sites(fixtures, {("Nowhere", "acc"): 1.0})
        assert report.unmatched == ["Nowhere/acc"]

    def test_missing_ground_truth_rejected_row(self):
        fixtures = load_fixture_csv(
            "site,quantity,measured,existing_6m,existing_4m,proposed\nA,q,,12,,11\n"
        )
        report = compare_sites(fixtures)
        assert report.rejected == ["A/q: no ground truth"]
        assert report.records == []

    def test_report_csv_shape(self):
        report = compare_sites(builtin_fixture("table4_accuracy"))
        buf = io.StringIO()
        report.to_csv(buf)
        lines = buf.getvalue().strip().splitlines()
        assert len(lines) == 15
        assert lines[0].startswith("site,quantity,variant,ground_truth")


class TestFixtureIntegrity:
    """The shipped reference values are data, never regenerated."""

    def test_accuracy_table_values(self):
        rows = {r.site: r for r in builtin_fixture("table4_accuracy")}
        assert rows["Incheon"].measured == 10.16
        assert rows["Incheon"].existing_6m == 20.83
        assert rows["Incheon"].existing_4m == 14.04
        assert rows["Incheon"].proposed == 12.10
        assert rows["Gwangju"].measured == 12.13

    def test_variance_table_values(self):
        rows = {(r.site, r.quantity): r for r in builtin_fixture("measurement_error_variance")}
        assert rows[("Incheon", "sigma_sum_9930_us2")].measured == pytest.approx(3.2977e-4)
        assert rows[("Incheon", "tor_variance_pohang_us2")].measured == pytest.approx(3.8693)
        assert rows[("Incheon", "tor_variance_gwangju_us2")].measured == pytest.approx(3.8727)
        total = (
            rows[("Incheon", "tor_variance_pohang_us2")].measured
            + rows[("Incheon", "tor_variance_gwangju_us2")].measured
        )
        assert total == pytest.approx(7.7420, abs=1e-4)

    def test_variance_improvements_follow_from_operands(self):
        report = compare_sites(builtin_fixture("measurement_error_variance"))
        by_key = {(r.site, r.quantity, r.variant): r for r in report.records}
        assert by_key[
            ("Incheon", "sigma_sum_9930_us2", "existing_6m")
        ].improvement_pct == pytest.approx(96.19, abs=0.01)
        assert by_key[
            ("Pyeongtaek", "sigma_sum_9930_us2", "existing_4m")
        ].improvement_pct == pytest.approx(17.55, abs=0.01)


class TestSimulatePoint:
    def test_cardinal_equal_sigma_accuracy(self, sea_data):
        scenario = sea_scenario(cardinal_transmitters())
        res = simulate_point(scenario, GeoPoint(0.0, 0.0), data=sea_data)
        assert res.available
        sigmas = [d.sigma_m for d in res.stations]
        assert all(s == pytest.approx(sigmas[0], rel=1e-9) for s in sigmas)
        assert res.accuracy_95_m == pytest.approx(2.0 * sigmas[0], rel=1e-9)
        assert res.clock_mode == "single"

    def test_all_below_snr_floor_unavailable(self):
        scenario = sea_scenario(cardinal_transmitters(), noise_constant_dbuvm=200.0)
        res = simulate_point(scenario, GeoPoint(0.0, 0.0), data=make_sea_data(200.0))
        assert not res.available
        assert res.reason == "snr_floor"
        assert all(not d.used for d in res.stations)

    def test_doubled_jitter_doubles_accuracy(self, sea_data):
        base = sea_scenario(cardinal_transmitters(), jitter_mode="fixed", fixed_jitter_m=1000.0)
        doubled = sea_scenario(cardinal_transmitters(), jitter_mode="fixed", fixed_jitter_m=2000.0)
        p = GeoPoint(0.0, 0.0)
        a = simulate_point(base, p, data=sea_data).accuracy_95_m
        b = simulate_point(doubled, p, data=sea_data).accuracy_95_m
        assert b / a == pytest.approx(2.0, rel=1e-6)

    def test_out_of_range_station_excluded(self, sea_data):
        # one transmitter pushed beyond the 2,500 km curve grid
        txs = cardinal_transmitters() + [tx("FAR", 0.0, -30.0, chain="7430")]
        scenario = sea_scenario(txs)
        res = simulate_point(scenario, GeoPoint(0.0, 0.0), data=sea_data)
        far = [d for d in res.stations if d.station_id == "FAR"][0]
        assert not far.used and far.exclude_reason.startswith("range")
        assert res.available  # remaining four still fix

    def test_per_chain_clock_mode_auto(self, sea_data):
        # asymmetric azimuths: two stations per chain on cardinal axes is a
        # genuinely rank-deficient per-chain geometry
        txs = [
            tx("A1", 1.0, 0.0, chain="9930"),
            tx("A2", 0.0, 1.0, chain="9930"),
            tx("B1", -1.0, 0.0, chain="7430", gri=7430),
            tx("B2", -0.5, -1.0, chain="7430", gri=7430),
        ]
        res = simulate_point(sea_scenario(txs), GeoPoint(0.0, 0.0), data=sea_data)
        assert res.clock_mode == "per_chain"
        assert res.available

    def test_disabled_transmitters_sit_out(self, sea_data):
        txs = cardinal_transmitters()
        txs[2] = Transmitter(**{**txs[2].__dict__, "enabled": False})
        txs[3] = Transmitter(**{**txs[3].__dict__, "enabled": False})
        res = simulate_point(sea_scenario(txs), GeoPoint(0.0, 0.0), data=sea_data)
        assert not res.available
        assert res.reason == "insufficient_stations"
        disabled = [d for d in res.stations if d.exclude_reason == "disabled"]
        assert len(disabled) == 2

    def test_insufficient_stations_reason(self, sea_data):
        txs = [
            tx("A1", 1.0, 0.0, chain="9930"),
            tx("A2", 0.0, 1.0, chain="9930"),
            tx("B1", -1.0, 0.0, chain="7430", gri=7430),
        ]
        # per_chain forced: needs 2 + 2 = 4 usable
        res = simulate_point(
            sea_scenario(txs, clock_mode="per_chain"), GeoPoint(0.0, 0.0), data=sea_data
        )
        assert not res.available
        assert res.reason == "insufficient_stations"


class TestSimulateAccuracyMap:
    def test_2x2_region_evaluates_4_cells(self, sea_data):
        pitch_deg = 7000.0 / (6371000.0 * math.pi / 180.0)
        region = Region(-pitch_deg, pitch_deg, -pitch_deg, pitch_deg, 7000.0)
        scenario = sea_scenario(cardinal_transmitters(), region=region)
        grid = simulate_accuracy_map(scenario, data=sea_data)
        assert grid.accuracy_m.shape == (2, 2)
        assert grid.available.all()

    def test_deterministic_bytes(self, sea_data):
        scenario = sea_scenario(cardinal_transmitters())
        a, b = (simulate_accuracy_map(scenario, data=sea_data) for _ in range(2))
        bufs = []
        for g in (a, b):
            buf = io.StringIO()
            g.to_csv(buf)
            bufs.append(buf.getvalue())
        assert bufs[0] == bufs[1]
        assert json.dumps(a.to_geojson()) == json.dumps(b.to_geojson())

    def test_extra_station_never_worsens_cells(self, sea_data):
        base = sea_scenario(cardinal_transmitters())
        extra = sea_scenario(cardinal_transmitters() + [tx("X", 0.7, 0.7)])
        g1 = simulate_accuracy_map(base, data=sea_data)
        g2 = simulate_accuracy_map(extra, data=sea_data)
        both = g1.available & g2.available
        assert np.all(g2.accuracy_m[both] <= g1.accuracy_m[both] * (1 + 1e-9))

    def test_cancellation(self, sea_data):
        scenario = sea_scenario(cardinal_transmitters())
        calls = []

        def cancel():
            calls.append(1)
            return len(calls) > 3

        with pytest.raises(ComputeCancelled):
            simulate_accuracy_map(scenario, data=sea_data, cancel_check=cancel)

    def test_csv_schema(self, sea_data):
        scenario = sea_scenario(cardinal_transmitters())
        grid = simulate_accuracy_map(scenario, data=sea_data)
        buf = io.StringIO()
        grid.to_csv(buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "lat,lon,accuracy_95_m,available,n_stations"
        assert len(lines) == 1 + grid.accuracy_m.size

    def test_geojson_cells_and_properties(self, sea_data):
        scenario = sea_scenario(cardinal_transmitters())
        grid = simulate_accuracy_map(scenario, data=sea_data)
        gj = grid.to_geojson()
        assert gj["type"] == "FeatureCollection"
        assert gj["station_ids"] == ["N", "E", "S", "W"]
        assert len(gj["features"]) == grid.accuracy_m.size
        props = gj["features"][0]["properties"]
        for key in ("accuracy_95_m", "available", "n_stations", "snr_db", "sigma_m"):
            assert key in props

    def test_conductivity_source_only_changes_propagation_inputs(self, tmp_path, sea_data):
        # identical conductivity content through both source paths -> identical maps
        from loransim.geodata import dump_conductivity

        cond_path = tmp_path / "sea.grid"
        cond_path.write_text(dump_conductivity(sea_data.conductivity))
        lc_rows = ["10 " * 19 + "10"] * 20
        lc_path = tmp_path / "sea_lc.grid"
        lc_path.write_text(
            "ncols 20\nnrows 20\nxllcorner -10\nyllcorner -10\ncellsize 1.0\n"
            "nodata_value -9999\n" + "\n".join(lc_rows) + "\n"
        )
        common = dict(
            region=Region(-1.0, 1.0, -1.0, 1.0, 7000.0),
            transmitters=cardinal_transmitters(),
            conductivity_resolution_m=7000.0,
        )
        s_lc = Scenario(
            name="lc", conductivity_source="land_cover", landcover_path="sea_lc.grid", **common
        )
        s_itu = Scenario(
            name="itu", conductivity_source="itu_baseline", conductivity_path="sea.grid", **common
        )
        g_lc = simulate_accuracy_map(s_lc, base_dir=tmp_path)
        g_itu = simulate_accuracy_map(s_itu, base_dir=tmp_path)
        np.testing.assert_array_equal(g_lc.accuracy_m, g_itu.accuracy_m)


class TestScenarioConfig:
    def test_round_trip_dict(self, sea_data):
        s = sea_scenario(cardinal_transmitters())
        d = scenario_to_dict(s)
        back = scenario_from_dict(d)
        assert scenario_content_hash(back) == scenario_content_hash(s)

    def test_hash_changes_with_content(self):
        s1 = sea_scenario(cardinal_transmitters())
        s2 = sea_scenario(cardinal_transmitters(jitter=3.0))
        assert scenario_content_hash(s1) != scenario_content_hash(s2)

    def test_min_transmitters(self):
        with pytest.raises(ConfigError):
            sea_scenario(cardinal_transmitters()[:2])

    def test_min_resolution(self):
        with pytest.raises(ConfigError):
            Region(-1, 1, -1, 1, 500.0)

    def test_master_emission_delay_zero(self):
        with pytest.raises(ConfigError):
            tx("M", 0, 0, ed=100.0, role="master")

    def test_unknown_keys_rejected(self):
        d = scenario_to_dict(sea_scenario(cardinal_transmitters()))
        d["bogus"] = 1
        with pytest.raises(ConfigError):
            scenario_from_dict(d)

    def test_load_toml_and_json_agree(self, tmp_path):
        s = sea_scenario(cardinal_transmitters())
        d = scenario_to_dict(s)
        json_path = tmp_path / "s.json"
        json_path.write_text(json.dumps(d))
        toml_lines = [
            'schema_version = 1',
            'name = "test"',
            '[region]',
            'lat_min = -1.0', 'lat_max = 1.0', 'lon_min = -1.0', 'lon_max = 1.0',
            'resolution_m = 7000.0',
        ]
        for t_ in cardinal_transmitters():
            toml_lines += [
                "[[transmitters]]",
                f'id = "{t_.id}"', f'name = "{t_.name}"',
                f"lat = {t_.location.lat_deg}", f"lon = {t_.location.lon_deg}",
                f"erp_kw = {t_.erp_kw}", f"gri_designator = {t_.gri_designator}",
                f'chain_id = "{t_.chain_id}"', f"emission_delay_us = {t_.emission_delay_us}",
                f'role = "{t_.role}"', f"jitter_m = {t_.jitter_m}",
            ]
        toml_path = tmp_path / "s.toml"
        toml_path.write_text("\n".join(toml_lines) + "\n")
        assert scenario_content_hash(load_scenario_file(json_path)) == scenario_content_hash(
            load_scenario_file(toml_path)
        )

    def test_missing_raster_named_in_error(self, tmp_path):
        s = sea_scenario(cardinal_transmitters(), landcover_path="missing.grid")
        with pytest.raises(ConfigError, match="missing.grid"):
            resolve_scenario_data(s, base_dir=tmp_path)

    def test_korea_scenario_loads(self, data_dir):
        s = load_scenario_file(data_dir / "korea_scenario.toml")
        assert len(s.transmitters) == 4
        assert s.region.resolution_m == 7000.0
        assert {t.chain_id for t in s.transmitters} == {"9930", "7430"}
