// Wire types mirroring the simulation service API.

export type Role = 'master' | 'secondary'

export interface Transmitter {
  id: string
  name: string
  lat: number
  lon: number
  erp_kw: number
  gri_designator: number
  chain_id: string
  emission_delay_us: number
  role: Role
  jitter_m: number
  enabled: boolean
}

export interface RegionSpec {
  lat_min: number
  lat_max: number
  lon_min: number
  lon_max: number
  resolution_m: number
}

export interface ScenarioBody {
  schema_version: number
  name: string
  region: RegionSpec
  transmitters: Transmitter[]
  conductivity_source: string
  landcover_path?: string | null
  conductivity_path?: string | null
  noise_mode?: string
  noise_constant_dbuvm?: number
  season?: string
  jitter_mode?: string
  fixed_jitter_m?: number
  clock_mode?: string
  integration_time_s?: number
  snr_floor_db?: number
}

export interface CellProperties {
  row: number
  col: number
  accuracy_95_m: number | null
  available: boolean
  n_stations: number
  reason: string | null
  snr_db: (number | null)[]
  sigma_m: (number | null)[]
  azimuth_deg: (number | null)[]
  used: boolean[]
}

export interface CellFeature {
  type: 'Feature'
  geometry: { type: 'Polygon'; coordinates: number[][][] }
  properties: CellProperties
}

export interface AccuracyMap {
  type: 'FeatureCollection'
  station_ids: string[]
  features: CellFeature[]
}

export interface JobStatus {
  job_id: string
  scenario_id: string
  state: 'queued' | 'running' | 'done' | 'failed' | 'cancelled'
  progress: number
  error: string | null
  content_hash: string
}

export interface ScenarioRef {
  id: string
  content_hash: string
}
