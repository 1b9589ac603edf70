// UI scenario state: the service scenario body plus view-only state that
// must never leak into the body sent to the service.

import type { ScenarioBody, Transmitter } from './types'

export interface ViewState {
  overlayOpacity: number
  selectedCell: { row: number; col: number } | null
  mapExtent: { latMin: number; latMax: number; lonMin: number; lonMax: number }
}

export interface UiScenario {
  body: ScenarioBody
  view: ViewState
}

export function defaultView(body: ScenarioBody): ViewState {
  return {
    overlayOpacity: 0.75,
    selectedCell: null,
    mapExtent: {
      latMin: body.region.lat_min - 0.5,
      latMax: body.region.lat_max + 0.5,
      lonMin: body.region.lon_min - 0.5,
      lonMax: body.region.lon_max + 0.5,
    },
  }
}

/** Canonical JSON of the service body: stable key order at every level so
 * save -> reload -> serialize reproduces the identical scenario payload. */
export function canonicalBody(body: ScenarioBody): string {
  const sort = (value: unknown): unknown => {
    if (Array.isArray(value)) return value.map(sort)
    if (value !== null && typeof value === 'object') {
      return Object.fromEntries(
        Object.keys(value as Record<string, unknown>)
          .sort()
          .map((k) => [k, sort((value as Record<string, unknown>)[k])]),
      )
    }
    return value
  }
  return JSON.stringify(sort(body))
}

export function saveScenario(ui: UiScenario): string {
  return JSON.stringify({ body: ui.body, view: ui.view })
}

export function loadScenario(saved: string): UiScenario {
  const parsed = JSON.parse(saved) as UiScenario
  if (!parsed.body || !parsed.body.region || !Array.isArray(parsed.body.transmitters)) {
    throw new Error('saved scenario is missing its service body')
  }
  return { body: parsed.body, view: parsed.view ?? defaultView(parsed.body) }
}

export function moveTransmitter(body: ScenarioBody, id: string, lat: number, lon: number): ScenarioBody {
  return {
    ...body,
    transmitters: body.transmitters.map((t) => (t.id === id ? { ...t, lat, lon } : t)),
  }
}

export function toggleTransmitter(body: ScenarioBody, id: string): ScenarioBody {
  return {
    ...body,
    transmitters: body.transmitters.map((t) =>
      t.id === id ? { ...t, enabled: !t.enabled } : t,
    ),
  }
}

export function addTransmitter(body: ScenarioBody, tx: Transmitter): ScenarioBody {
  if (body.transmitters.some((t) => t.id === tx.id)) {
    throw new Error(`transmitter id ${tx.id} already in scenario`)
  }
  return { ...body, transmitters: [...body.transmitters, tx] }
}

export function removeTransmitter(body: ScenarioBody, id: string): ScenarioBody {
  const remaining = body.transmitters.filter((t) => t.id !== id)
  if (remaining.length < 3) {
    throw new Error('a scenario needs at least 3 configured transmitters')
  }
  return { ...body, transmitters: remaining }
}

export function enabledCount(body: ScenarioBody): number {
  return body.transmitters.filter((t) => t.enabled).length
}
