// Pure heatmap logic: legend breakpoints, cell colors, SVG paths, and the
// scenario-difference overlay. Rendering itself stays in main.ts.

import type { AccuracyMap, CellFeature } from './types'

/** Legend anchored on the 20 m national requirement (highlighted). */
export const LEGEND_BREAKS_M = [10, 15, 20] as const
export const REQUIREMENT_M = 20

export interface LegendEntry {
  label: string
  color: string
  highlighted: boolean
}

const BAND_COLORS = ['#1a9850', '#91cf60', '#fee08b', '#d73027']
export const UNAVAILABLE_COLOR = '#9aa0a6'

export function accuracyColor(accuracy: number | null, available: boolean): string {
  if (!available || accuracy === null) return UNAVAILABLE_COLOR
  if (accuracy < LEGEND_BREAKS_M[0]) return BAND_COLORS[0]
  if (accuracy < LEGEND_BREAKS_M[1]) return BAND_COLORS[1]
  if (accuracy <= LEGEND_BREAKS_M[2]) return BAND_COLORS[2]
  return BAND_COLORS[3]
}

export function legendEntries(): LegendEntry[] {
  return [
    { label: `< ${LEGEND_BREAKS_M[0]} m`, color: BAND_COLORS[0], highlighted: false },
    { label: `${LEGEND_BREAKS_M[0]}–${LEGEND_BREAKS_M[1]} m`, color: BAND_COLORS[1], highlighted: false },
    { label: `${LEGEND_BREAKS_M[1]}–${REQUIREMENT_M} m`, color: BAND_COLORS[2], highlighted: true },
    { label: `> ${REQUIREMENT_M} m (requirement)`, color: BAND_COLORS[3], highlighted: true },
    { label: 'unavailable', color: UNAVAILABLE_COLOR, highlighted: false },
  ]
}

export interface Projection {
  x(lon: number): number
  y(lat: number): number
}

export function makeProjection(
  extent: { latMin: number; latMax: number; lonMin: number; lonMax: number },
  width: number,
  height: number,
): Projection {
  const sx = width / (extent.lonMax - extent.lonMin)
  const sy = height / (extent.latMax - extent.latMin)
  return {
    x: (lon) => (lon - extent.lonMin) * sx,
    y: (lat) => (extent.latMax - lat) * sy, // screen y grows southward
  }
}

export function cellPath(feature: CellFeature, proj: Projection): string {
  const ring = feature.geometry.coordinates[0]
  const parts = ring.map(([lon, lat], i) => `${i === 0 ? 'M' : 'L'}${proj.x(lon).toFixed(2)},${proj.y(lat).toFixed(2)}`)
  return parts.join(' ') + ' Z'
}

export interface DeltaCell {
  row: number
  col: number
  delta_m: number | null // b - a; null when either side is unavailable
}

function sameGrid(a: AccuracyMap, b: AccuracyMap): boolean {
  if (a.features.length !== b.features.length) return false
  const last = a.features.length - 1
  if (last < 0) return true
  return (
    a.features[last].properties.row === b.features[last].properties.row &&
    a.features[last].properties.col === b.features[last].properties.col
  )
}

/** Signed per-cell accuracy difference b - a; negative means b improved. */
export function computeDelta(a: AccuracyMap, b: AccuracyMap): DeltaCell[] {
  if (!sameGrid(a, b)) {
    throw new Error('scenarios were computed on different region grids; recompute on a shared grid to compare')
  }
  const byCell = new Map<string, CellFeature>()
  for (const f of b.features) byCell.set(`${f.properties.row}:${f.properties.col}`, f)
  return a.features.map((fa) => {
    const fb = byCell.get(`${fa.properties.row}:${fa.properties.col}`)
    const va = fa.properties.accuracy_95_m
    const vb = fb?.properties.accuracy_95_m ?? null
    return {
      row: fa.properties.row,
      col: fa.properties.col,
      delta_m: va === null || vb === null ? null : vb - va,
    }
  })
}

/** Diverging color scale for deltas; white at zero. */
export function deltaColor(delta: number | null, scale_m = 5): string {
  if (delta === null) return UNAVAILABLE_COLOR
  const t = Math.max(-1, Math.min(1, delta / scale_m))
  if (t === 0) return '#ffffff'
  // blue = improved (negative), red = degraded (positive)
  const other = Math.round(255 * (1 - Math.abs(t)))
  return t < 0
    ? `rgb(${other},${other},255)`
    : `rgb(255,${other},${other})`
}

export function formatAccuracy(accuracy: number | null): string {
  return accuracy === null ? 'n/a' : `${accuracy.toFixed(2)} m`
}
