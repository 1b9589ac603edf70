"""HTTP service over the simulator: scenario CRUD, async accuracy-map
computation with cancellation, and jitter estimation from uploaded TOR logs.

Persistence is flat files under a data directory; one active compute job
per scenario, the newest submission cancelling an older running job.
"""

from __future__ import annotations

import io
import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Body, FastAPI, Header, HTTPException, Query, Response
from fastapi.middleware.cors import CORSMiddleware

from . import jitter
from .coverage import (
    AccuracyGrid,
    ComputeCancelled,
    Scenario,
    resolve_scenario_data,
    scenario_content_hash,
    scenario_data_fingerprint,
    scenario_from_dict,
    scenario_to_dict,
    simulate_accuracy_map,
)
from .errors import ConfigError, InfeasibleJitterError, LoranSimError
from .geodata import default_terrain_table


class _BoundedCache(dict):
    """Dict evicting its oldest entries beyond max_entries (insertion order)."""

    def __init__(self, max_entries: int = 12):
        super().__init__()
        self.max_entries = max_entries

    def __setitem__(self, key, value):
        if key not in self and len(self) >= self.max_entries:
            del self[next(iter(self))]
        super().__setitem__(key, value)


@dataclass
class JobRecord:
    job_id: str
    scenario_id: str
    state: str = "queued"  # queued | running | done | failed | cancelled
    progress: float = 0.0
    error: str | None = None
    content_hash: str = ""
    cancel_event: threading.Event = field(default_factory=threading.Event)

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "scenario_id": self.scenario_id,
            "state": self.state,
            "progress": round(self.progress, 4),
            "error": self.error,
            "content_hash": self.content_hash,
        }


@dataclass
class StoredScenario:
    scenario: Scenario
    content_hash: str
    grid: AccuracyGrid | None = None
    grid_hash: str | None = None  # hash of the scenario the grid was computed from
    active_job: JobRecord | None = None


class ScenarioStore:
    """In-memory store with flat-file persistence of scenario bodies."""

    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self.scenario_dir = self.data_dir / "scenarios"
        self.scenario_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._scenarios: dict[str, StoredScenario] = {}
        self._jobs: dict[str, JobRecord] = {}
        # resolved data bundles + per-bundle path caches, keyed by the
        # scenario's data fingerprint so drag edits reuse heavy inputs
        self._data_cache: dict[str, tuple] = {}
        self._load_existing()

    def resolved_data(self, scenario: Scenario, base_dir) -> tuple:
        fingerprint = scenario_data_fingerprint(scenario)
        with self._lock:
            hit = self._data_cache.get(fingerprint)
        if hit is not None:
            return hit
        data = resolve_scenario_data(scenario, base_dir)
        entry = (data, _BoundedCache())
        with self._lock:
            if len(self._data_cache) >= 8:
                self._data_cache.pop(next(iter(self._data_cache)))
            self._data_cache[fingerprint] = entry
        return entry

    def _load_existing(self):
        for path in sorted(self.scenario_dir.glob("*.json")):
            try:
                scenario = scenario_from_dict(json.loads(path.read_text()))
            except (LoranSimError, json.JSONDecodeError):
                continue
            self._scenarios[path.stem] = StoredScenario(
                scenario=scenario, content_hash=scenario_content_hash(scenario)
            )

    def _persist(self, scenario_id: str):
        entry = self._scenarios[scenario_id]
        path = self.scenario_dir / f"{scenario_id}.json"
        path.write_text(json.dumps(scenario_to_dict(entry.scenario), indent=2))

    def create(self, scenario: Scenario) -> tuple[str, StoredScenario]:
        with self._lock:
            scenario_id = uuid.uuid4().hex[:12]
            entry = StoredScenario(
                scenario=scenario, content_hash=scenario_content_hash(scenario)
            )
            self._scenarios[scenario_id] = entry
            self._persist(scenario_id)
            return scenario_id, entry

    def get(self, scenario_id: str) -> StoredScenario:
        with self._lock:
            entry = self._scenarios.get(scenario_id)
            if entry is None:
                raise KeyError(scenario_id)
            return entry

    def replace(self, scenario_id: str, scenario: Scenario, if_match: str | None) -> StoredScenario:
        with self._lock:
            entry = self.get(scenario_id)
            if if_match is not None and if_match != entry.content_hash:
                raise ConcurrentModification(
                    f"scenario {scenario_id} hash {entry.content_hash} != If-Match {if_match}"
                )
            entry.scenario = scenario
            entry.content_hash = scenario_content_hash(scenario)
            self._persist(scenario_id)
            return entry

    def delete(self, scenario_id: str):
        with self._lock:
            entry = self.get(scenario_id)
            if entry.active_job is not None:
                entry.active_job.cancel_event.set()
            del self._scenarios[scenario_id]
            path = self.scenario_dir / f"{scenario_id}.json"
            if path.exists():
                path.unlink()

    def job(self, job_id: str) -> JobRecord:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise KeyError(job_id)
            return job

    def new_job(self, scenario_id: str, content_hash: str) -> JobRecord:
        with self._lock:
            entry = self.get(scenario_id)
            if entry.active_job is not None and entry.active_job.state in ("queued", "running"):
                entry.active_job.cancel_event.set()
                entry.active_job.state = "cancelled"
            job = JobRecord(
                job_id=uuid.uuid4().hex[:12],
                scenario_id=scenario_id,
                content_hash=content_hash,
            )
            self._jobs[job.job_id] = job
            entry.active_job = job
            return job


class ConcurrentModification(LoranSimError):
    pass


def _run_compute(store: ScenarioStore, scenario_id: str, job: JobRecord, base_dir: Path):
    with store._lock:
        if job.cancel_event.is_set():
            job.state = "cancelled"
            return
        entry = store._scenarios.get(scenario_id)
        if entry is None:
            job.state = "failed"
            job.error = "scenario deleted"
            return
        scenario = entry.scenario
        job.state = "running"

    def _progress(frac: float):
        job.progress = frac

    try:
        data, path_cache = store.resolved_data(scenario, base_dir)
        grid = simulate_accuracy_map(
            scenario,
            data=data,
            cancel_check=job.cancel_event.is_set,
            progress=_progress,
            path_cache=path_cache,
        )
    except ComputeCancelled:
        job.state = "cancelled"
        return
    except LoranSimError as exc:
        job.state = "failed"
        job.error = str(exc)
        return
    with store._lock:
        entry = store._scenarios.get(scenario_id)
        if entry is None or job.cancel_event.is_set():
            job.state = "cancelled"
            return
        entry.grid = grid
        entry.grid_hash = job.content_hash
        job.progress = 1.0
        job.state = "done"


def create_app(data_dir=".", base_dir=None) -> FastAPI:
    """App factory. base_dir resolves relative raster paths in scenarios."""
    data_path = Path(data_dir)
    base_path = Path(base_dir) if base_dir is not None else data_path
    store = ScenarioStore(data_path)
    app = FastAPI(title="loransim")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.store = store

    def _get_or_404(scenario_id: str) -> StoredScenario:
        try:
            return store.get(scenario_id)
        except KeyError:
            raise HTTPException(404, f"unknown scenario {scenario_id}")

    def _parse_scenario(body: dict) -> Scenario:
        try:
            return scenario_from_dict(body)
        except LoranSimError as exc:
            raise HTTPException(400, f"invalid scenario: {exc}")

    @app.post("/api/scenarios", status_code=201)
    def create_scenario(body: dict = Body(...)):
        scenario = _parse_scenario(body)
        scenario_id, entry = store.create(scenario)
        return {"id": scenario_id, "content_hash": entry.content_hash}

    @app.get("/api/scenarios/{scenario_id}")
    def get_scenario(scenario_id: str):
        entry = _get_or_404(scenario_id)
        return {
            "id": scenario_id,
            "content_hash": entry.content_hash,
            "has_map": entry.grid is not None and entry.grid_hash == entry.content_hash,
            "scenario": scenario_to_dict(entry.scenario),
        }

    @app.put("/api/scenarios/{scenario_id}")
    def put_scenario(
        scenario_id: str,
        body: dict = Body(...),
        if_match: str | None = Header(default=None),
    ):
        _get_or_404(scenario_id)
        scenario = _parse_scenario(body)
        try:
            entry = store.replace(scenario_id, scenario, if_match)
        except ConcurrentModification as exc:
            raise HTTPException(409, str(exc))
        return {"id": scenario_id, "content_hash": entry.content_hash}

    @app.delete("/api/scenarios/{scenario_id}", status_code=204)
    def delete_scenario(scenario_id: str):
        _get_or_404(scenario_id)
        store.delete(scenario_id)
        return Response(status_code=204)

    @app.post("/api/scenarios/{scenario_id}/compute", status_code=202)
    def compute(scenario_id: str):
        entry = _get_or_404(scenario_id)
        job = store.new_job(scenario_id, entry.content_hash)
        # cache hit: identical content hash never recomputes
        if entry.grid is not None and entry.grid_hash == entry.content_hash:
            job.state = "done"
            job.progress = 1.0
            return {"job_id": job.job_id, "cached": True}
        thread = threading.Thread(
            target=_run_compute, args=(store, scenario_id, job, base_path), daemon=True
        )
        thread.start()
        return {"job_id": job.job_id, "cached": False}

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        try:
            return store.job(job_id).to_dict()
        except KeyError:
            raise HTTPException(404, f"unknown job {job_id}")

    @app.get("/api/scenarios/{scenario_id}/accuracy-map")
    def accuracy_map(scenario_id: str, format: str = Query(default="geojson")):
        entry = _get_or_404(scenario_id)
        if entry.grid is None or entry.grid_hash != entry.content_hash:
            raise HTTPException(404, "no accuracy map computed for this scenario version")
        if format == "csv":
            buf = io.StringIO()
            entry.grid.to_csv(buf)
            return Response(buf.getvalue(), media_type="text/csv")
        if format == "geojson":
            return Response(
                json.dumps(entry.grid.to_geojson()), media_type="application/geo+json"
            )
        raise HTTPException(400, f"unknown format {format!r}")

    @app.post("/api/jitter-estimates")
    def jitter_estimates(body: dict = Body(...)):
        log_csv = body.get("log_csv")
        if not log_csv:
            raise HTTPException(400, "body must contain log_csv")
        try:
            series_by_key = jitter.read_tor_log(log_csv)
        except LoranSimError as exc:
            raise HTTPException(400, str(exc))
        from .cli import _pair_stations

        try:
            pairs = _pair_stations(series_by_key, body.get("pairs"))
        except LoranSimError as exc:
            raise HTTPException(400, str(exc))
        config = jitter.PairEstimationConfig()
        estimates = []
        errors = []
        for tor1, tor2 in pairs:
            try:
                e1, e2 = jitter.estimate_pair_jitters(tor1, tor2, config)
                estimates.extend([e1, e2])
            except InfeasibleJitterError as exc:
                errors.append(str(exc))
            except LoranSimError as exc:
                errors.append(str(exc))
        if not estimates:
            raise HTTPException(422, "infeasible model inputs: " + "; ".join(errors))
        return {
            "estimates": [
                {
                    "station_id": e.station_id,
                    "site_id": e.site_id,
                    "jitter_m": e.jitter_m,
                    "sigma_i_us2": e.sigma_i_us2,
                    "bandwidth_s": e.optimal_bandwidth_s,
                    "e_us2": e.bias_elimination_error_us2,
                }
                for e in estimates
            ],
            "averages": jitter.average_jitters(estimates),
            "errors": errors,
        }

    @app.get("/api/meta/terrain-classes")
    def terrain_classes():
        table = default_terrain_table()
        return {
            "classes": [
                {
                    "class_code": e.class_code,
                    "terrain_name": e.terrain_name,
                    "conductivity_s_per_m": e.conductivity_s_per_m,
                    "relative_permittivity": e.relative_permittivity,
                }
                for e in table.entries
            ]
        }

    return app


def serve(port: int = 8000, data_dir=".", log_level: str = "info"):
    import uvicorn

    app = create_app(data_dir)
    uvicorn.run(app, host="0.0.0.0", port=port, log_level=log_level)
