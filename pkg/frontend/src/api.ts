// Thin typed client for the simulation service. Everything the UI knows
// about the backend goes through this interface so tests can inject fakes.

import type { AccuracyMap, JobStatus, ScenarioBody, ScenarioRef } from './types'

export interface SimulatorApi {
  createScenario(body: ScenarioBody): Promise<ScenarioRef>
  putScenario(id: string, body: ScenarioBody, ifMatch?: string): Promise<ScenarioRef>
  getScenario(id: string): Promise<{ id: string; content_hash: string; scenario: ScenarioBody }>
  deleteScenario(id: string): Promise<void>
  compute(id: string): Promise<{ job_id: string; cached: boolean }>
  job(jobId: string): Promise<JobStatus>
  accuracyMap(id: string): Promise<AccuracyMap>
}

export class HttpError extends Error {
  constructor(readonly status: number, message: string) {
    super(message)
  }
}

async function request<T>(url: string, options?: RequestInit): Promise<T> {
  const res = await fetch(url, {
    headers: { 'Content-Type': 'application/json', ...(options?.headers ?? {}) },
    ...options,
  })
  if (!res.ok) {
    let detail = res.statusText
    try {
      const body = await res.json()
      if (body?.detail) detail = String(body.detail)
    } catch {
      /* non-JSON error body */
    }
    throw new HttpError(res.status, detail)
  }
  if (res.status === 204) return undefined as T
  return (await res.json()) as T
}

export function createHttpApi(baseUrl: string): SimulatorApi {
  const api = baseUrl.replace(/\/$/, '') + '/api'
  return {
    createScenario: (body) =>
      request(`${api}/scenarios`, { method: 'POST', body: JSON.stringify(body) }),
    putScenario: (id, body, ifMatch) =>
      request(`${api}/scenarios/${id}`, {
        method: 'PUT',
        body: JSON.stringify(body),
        headers: ifMatch ? { 'If-Match': ifMatch } : {},
      }),
    getScenario: (id) => request(`${api}/scenarios/${id}`),
    deleteScenario: (id) => request(`${api}/scenarios/${id}`, { method: 'DELETE' }),
    compute: (id) => request(`${api}/scenarios/${id}/compute`, { method: 'POST' }),
    job: (jobId) => request(`${api}/jobs/${jobId}`),
    accuracyMap: (id) => request(`${api}/scenarios/${id}/accuracy-map?format=geojson`),
  }
}
