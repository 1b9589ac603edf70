"""Command-line entry points: simulate, estimate-jitter, convert-landcover,
compare, and serve."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import coverage, geodata, jitter
from .errors import InfeasibleJitterError, LoranSimError

EXIT_OK = 0
EXIT_ERROR = 2


def _fail(message: str, kind: str = "error") -> int:
    print(json.dumps({"error": message, "type": kind}), file=sys.stderr)
    return EXIT_ERROR


def _parse_bandwidth_grid(spec: str) -> np.ndarray:
    try:
        lo, hi, n = spec.split(":")
        grid = np.geomspace(float(lo), float(hi), int(n))
    except ValueError as exc:
        raise LoranSimError(f"bad bandwidth grid {spec!r}, expected lo:hi:n") from exc
    return grid


def cmd_simulate(args) -> int:
    try:
        scenario = coverage.load_scenario_file(args.scenario)
        if args.conductivity:
            scenario.conductivity_source = args.conductivity
        base_dir = Path(args.scenario).parent
        grid = coverage.simulate_accuracy_map(scenario, base_dir=base_dir)
    except LoranSimError as exc:
        return _fail(str(exc), type(exc).__name__)
    with open(args.out, "w") as fh:
        grid.to_csv(fh)
    if args.geojson:
        with open(args.geojson, "w") as fh:
            json.dump(grid.to_geojson(), fh)
    summary = grid.summary()
    print(json.dumps({"scenario": scenario.name, **summary}))
    return EXIT_OK


def _pair_stations(series_by_key, pairs_arg):
    """Group same-site series into same-chain pairs to estimate together."""
    if pairs_arg:
        wanted = [tuple(p.split(":")) for p in pairs_arg.split(",")]
        for pair in wanted:
            if len(pair) != 2:
                raise LoranSimError(f"bad --pairs entry {pair}, expected A:B")
    else:
        wanted = None
    by_site: dict = {}
    for (site, station), series in series_by_key.items():
        by_site.setdefault(site, {})[station] = series
    pairs = []
    for site, stations in sorted(by_site.items()):
        if wanted is not None:
            for a, b in wanted:
                if a in stations and b in stations:
                    pairs.append((stations[a], stations[b]))
            continue
        by_gri: dict = {}
        for station, series in sorted(stations.items()):
            by_gri.setdefault(series.gri_designator, []).append(series)
        for gri, members in sorted(by_gri.items()):
            for k in range(0, len(members) - 1, 2):
                pairs.append((members[k], members[k + 1]))
    if not pairs:
        raise LoranSimError(
            "no same-chain station pairs found in the log; jitter estimation "
            "needs two stations of one chain observed at the same site"
        )
    return pairs


def cmd_estimate_jitter(args) -> int:
    try:
        with open(args.log) as fh:
            series_by_key = jitter.read_tor_log(fh)
        pairs = _pair_stations(series_by_key, args.pairs)
        grid = _parse_bandwidth_grid(args.bandwidth_grid)
        config = jitter.PairEstimationConfig(
            params=jitter.ErrorModelParams(integration_time_s=args.integration_time),
            bandwidth_grid=tuple(grid),
            outlier_window=args.outlier_window,
        )
    except FileNotFoundError as exc:
        return _fail(str(exc), "FileNotFoundError")
    except LoranSimError as exc:
        return _fail(str(exc), type(exc).__name__)
    estimates = []
    row_errors = []
    for tor1, tor2 in pairs:
        try:
            e1, e2 = jitter.estimate_pair_jitters(tor1, tor2, config)
            estimates.extend([e1, e2])
        except InfeasibleJitterError as exc:
            # row-level error; remaining pairs still estimated
            row_errors.append(str(exc))
        except LoranSimError as exc:
            row_errors.append(str(exc))
    if not estimates:
        return _fail("no feasible jitter estimates: " + "; ".join(row_errors))
    with open(args.out, "w", newline="") as fh:
        jitter.write_jitter_report(estimates, fh)
    print(
        json.dumps(
            {
                "stations": sorted({e.station_id for e in estimates}),
                "estimates": len(estimates),
                "errors": row_errors,
                "bandwidth_grid": args.bandwidth_grid,
                "integration_time_s": args.integration_time,
            }
        )
    )
    return EXIT_OK


def cmd_convert_landcover(args) -> int:
    try:
        with open(args.input) as fh:
            lc = geodata.load_land_cover(fh)
        if args.table:
            with open(args.table) as fh:
                table = geodata.load_terrain_table(fh)
        else:
            table = geodata.default_terrain_table()
        grid = geodata.classify_conductivity(lc, table, nodata_policy=args.nodata_policy)
        if args.target_cell_m:
            grid = geodata.downsample(grid, args.target_cell_m, rule=args.rule)
    except FileNotFoundError as exc:
        return _fail(str(exc), "FileNotFoundError")
    except LoranSimError as exc:
        return _fail(str(exc), type(exc).__name__)
    with open(args.out, "w") as fh:
        fh.write(geodata.dump_conductivity(grid))
    print(json.dumps({"n_rows": grid.n_rows, "n_cols": grid.n_cols}))
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        if Path(args.fixture).exists():
            with open(args.fixture) as fh:
                fixtures = coverage.load_fixture_csv(fh)
        else:
            fixtures = coverage.builtin_fixture(args.fixture)
        simulated = None
        if args.simulated:
            simulated = {}
            with open(args.simulated) as fh:
                import csv as _csv

                for row in _csv.DictReader(fh):
                    simulated[(row["site"], row["quantity"])] = float(row["value"])
        report = coverage.compare_sites(fixtures, simulated)
    except FileNotFoundError as exc:
        return _fail(str(exc), "FileNotFoundError")
    except LoranSimError as exc:
        return _fail(str(exc), type(exc).__name__)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            report.to_csv(fh)
    rng = report.improvement_range()
    print(
        json.dumps(
            {
                "records": len(report.records),
                "improvement_min_pct": None if rng is None else round(rng[0], 2),
                "improvement_max_pct": None if rng is None else round(rng[1], 2),
                "rejected": report.rejected,
                "unmatched": report.unmatched,
            }
        )
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve

    serve(port=args.port, data_dir=args.data, log_level=args.log_level)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loransim",
        description="Loran/eLoran positioning accuracy simulator and jitter estimator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a regional accuracy sweep")
    p.add_argument("--scenario", required=True, help="scenario file (.toml or .json)")
    p.add_argument("--out", required=True, help="accuracy map CSV path")
    p.add_argument("--geojson", help="optional GeoJSON output path")
    p.add_argument(
        "--conductivity",
        choices=["land_cover", "itu_baseline"],
        help="override the scenario's conductivity source",
    )
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate-jitter", help="estimate transmitter jitters from a TOR log")
    p.add_argument("--log", required=True, help="TOR log CSV")
    p.add_argument("--out", required=True, help="jitter report CSV path")
    p.add_argument("--pairs", help="explicit station pairs, e.g. 9930M:9930W")
    p.add_argument("--bandwidth-grid", default="0.1:1000:60", help="lo:hi:n log-spaced grid")
    p.add_argument("--integration-time", type=float, default=5.0)
    p.add_argument("--outlier-window", type=int, default=100)
    p.set_defaults(func=cmd_estimate_jitter)

    p = sub.add_parser("convert-landcover", help="land-cover raster to conductivity grid")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--table", help="terrain class table CSV (default: shipped table)")
    p.add_argument("--target-cell-m", type=float, help="downsample target cell size")
    p.add_argument("--rule", choices=["mode_class", "median_conductivity"], default="mode_class")
    p.add_argument(
        "--nodata-policy", choices=["seawater", "default_land", "error"], default="seawater"
    )
    p.set_defaults(func=cmd_convert_landcover)

    p = sub.add_parser("compare", help="score simulated values against reference fixtures")
    p.add_argument(
        "--fixture",
        required=True,
        help="fixture CSV path or builtin name (table2_signal_strength, "
        "table4_accuracy, measurement_error_variance)",
    )
    p.add_argument("--simulated", help="CSV site,quantity,value of simulated outputs")
    p.add_argument("--out", help="comparison report CSV path")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--port", type=int, default=int(os.environ.get("LORANSIM_PORT", "8000")))
    p.add_argument("--data", default=os.environ.get("LORANSIM_DATA", "./loransim-data"))
    p.add_argument(
        "--log-level", default=os.environ.get("LORANSIM_LOG_LEVEL", "info")
    )
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
