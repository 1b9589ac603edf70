// Transmitter-siting map client: drag/add/remove/toggle transmitters over
// an SVG accuracy choropleth, inspect per-cell diagnostics, and diff two
// computed scenarios.

import { createHttpApi, SimulatorApi } from './api'
import {
  accuracyColor,
  cellPath,
  computeDelta,
  deltaColor,
  formatAccuracy,
  legendEntries,
  makeProjection,
  Projection,
} from './heatmap'
import { DEBOUNCE_MS, OverlayUpdate, RecomputeController } from './recompute'
import {
  UiScenario,
  addTransmitter,
  defaultView,
  enabledCount,
  loadScenario,
  moveTransmitter,
  removeTransmitter,
  saveScenario,
  toggleTransmitter,
} from './scenario'
import type { AccuracyMap, CellFeature, ScenarioBody, Transmitter } from './types'

const API_BASE = localStorage.getItem('loransim.apiBase') ?? 'http://localhost:8000'
const STORAGE_KEY = 'loransim.scenario'
const WIDTH = 760
const HEIGHT = 760

const DEFAULT_BODY: ScenarioBody = {
  schema_version: 1,
  name: 'korea-4tx',
  region: { lat_min: 34.0, lat_max: 38.2, lon_min: 125.8, lon_max: 129.4, resolution_m: 7000 },
  conductivity_source: 'land_cover',
  landcover_path: 'korea_landcover.grid',
  noise_mode: 'constant',
  noise_constant_dbuvm: 52.0,
  jitter_mode: 'estimated',
  clock_mode: 'auto',
  transmitters: [
    tx('9930M', 'Pohang', 36.046, 128.8, 150, 9930, '9930', 0, 'master', 2.11),
    tx('9930W', 'Gwangju', 35.136, 126.99, 50, 9930, '9930', 11947, 'secondary', 3.21),
    tx('7430M', 'Rongcheng', 37.06, 122.32, 1000, 7430, '7430', 0, 'master', 2.13),
    tx('7430X', 'Xuancheng', 30.9, 118.89, 1000, 7430, '7430', 13460, 'secondary', 5.38),
  ],
}

function tx(
  id: string, name: string, lat: number, lon: number, erp: number, gri: number,
  chain: string, ed: number, role: 'master' | 'secondary', jitter: number,
): Transmitter {
  return {
    id, name, lat, lon, erp_kw: erp, gri_designator: gri, chain_id: chain,
    emission_delay_us: ed, role, jitter_m: jitter, enabled: true,
  }
}

interface AppState {
  ui: UiScenario
  scenarioId: string | null
  currentMap: AccuracyMap | null
  currentJobId: string | null
  compare: { otherId: string; otherMap: AccuracyMap } | null
  proj: Projection
}

const state: AppState = {
  ui: restore(),
  scenarioId: null,
  currentMap: null,
  currentJobId: null,
  compare: null,
  proj: makeProjection(restore().view.mapExtent, WIDTH, HEIGHT),
}

function restore(): UiScenario {
  const saved = localStorage.getItem(STORAGE_KEY)
  if (saved) {
    try {
      return loadScenario(saved)
    } catch {
      /* fall through to defaults */
    }
  }
  return { body: DEFAULT_BODY, view: defaultView(DEFAULT_BODY) }
}

function persist(): void {
  localStorage.setItem(STORAGE_KEY, saveScenario(state.ui))
}

const api: SimulatorApi = createHttpApi(API_BASE)
let controller: RecomputeController | null = null

const app = document.querySelector<HTMLDivElement>('#app')!
app.innerHTML = `
  <header>
    <h1>eLoran transmitter siting</h1>
    <span id="status" class="status">starting</span>
  </header>
  <div id="banner" class="banner hidden"></div>
  <main>
    <svg id="map" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}"></svg>
    <aside>
      <section id="legend"><h2>95% accuracy</h2></section>
      <section id="stations"><h2>Transmitters</h2><ul id="station-list"></ul>
        <button id="add-tx">Add transmitter (click map)</button>
      </section>
      <section id="inspect"><h2>Cell</h2><div id="cell-panel">click a cell</div></section>
      <section id="compare"><h2>Compare</h2>
        <input id="other-id" placeholder="other scenario id" />
        <button id="load-compare">Show delta</button>
        <button id="clear-compare">Clear</button>
        <div id="compare-note"></div>
      </section>
      <label>Overlay opacity
        <input id="opacity" type="range" min="0.1" max="1" step="0.05" />
      </label>
    </aside>
  </main>
`

const svg = document.getElementById('map') as unknown as SVGSVGElement
const statusEl = document.getElementById('status')!
const bannerEl = document.getElementById('banner')!
const cellPanel = document.getElementById('cell-panel')!
const stationList = document.getElementById('station-list')!
const opacityInput = document.getElementById('opacity') as HTMLInputElement
opacityInput.value = String(state.ui.view.overlayOpacity)

function showBanner(message: string): void {
  bannerEl.textContent = `${message} (click to dismiss)`
  bannerEl.classList.remove('hidden')
}
bannerEl.addEventListener('click', () => bannerEl.classList.add('hidden'))

function renderLegend(): void {
  const section = document.getElementById('legend')!
  section.querySelectorAll('.legend-row').forEach((el) => el.remove())
  for (const entry of legendEntries()) {
    const row = document.createElement('div')
    row.className = 'legend-row' + (entry.highlighted ? ' highlighted' : '')
    row.innerHTML = `<span class="swatch" style="background:${entry.color}"></span>${entry.label}`
    section.appendChild(row)
  }
}

function renderStations(): void {
  stationList.innerHTML = ''
  for (const t of state.ui.body.transmitters) {
    const li = document.createElement('li')
    li.innerHTML = `
      <label><input type="checkbox" data-toggle="${t.id}" ${t.enabled ? 'checked' : ''} />
      ${t.name} (${t.id})</label>
      <button data-remove="${t.id}" title="remove">x</button>`
    stationList.appendChild(li)
  }
  stationList.querySelectorAll<HTMLInputElement>('input[data-toggle]').forEach((input) => {
    input.addEventListener('change', () => {
      applyEdit(toggleTransmitter(state.ui.body, input.dataset.toggle!))
    })
  })
  stationList.querySelectorAll<HTMLButtonElement>('button[data-remove]').forEach((button) => {
    button.addEventListener('click', () => {
      try {
        applyEdit(removeTransmitter(state.ui.body, button.dataset.remove!))
      } catch (err) {
        showBanner(err instanceof Error ? err.message : String(err))
      }
    })
  })
  if (enabledCount(state.ui.body) < 3) {
    showBanner('fewer than 3 transmitters enabled: expect unavailable cells')
  }
}

function renderMap(): void {
  svg.innerHTML = ''
  const opacity = state.ui.view.overlayOpacity
  const cells = document.createElementNS('http://www.w3.org/2000/svg', 'g')
  if (state.currentMap) {
    const deltas = state.compare ? computeDelta(state.currentMap, state.compare.otherMap) : null
    const deltaByCell = deltas
      ? new Map(deltas.map((d) => [`${d.row}:${d.col}`, d.delta_m]))
      : null
    for (const feature of state.currentMap.features) {
      const p = feature.properties
      const path = document.createElementNS('http://www.w3.org/2000/svg', 'path')
      path.setAttribute('d', cellPath(feature, state.proj))
      const fill = deltaByCell
        ? deltaColor(deltaByCell.get(`${p.row}:${p.col}`) ?? null)
        : accuracyColor(p.accuracy_95_m, p.available)
      path.setAttribute('fill', fill)
      path.setAttribute('fill-opacity', String(opacity))
      path.setAttribute('stroke', '#ffffff22')
      if (!p.available && !deltaByCell) path.setAttribute('class', 'unavailable')
      path.addEventListener('click', () => inspectCell(feature))
      cells.appendChild(path)
    }
  }
  svg.appendChild(cells)
  renderTransmitterMarkers()
}

function renderTransmitterMarkers(): void {
  for (const t of state.ui.body.transmitters) {
    const x = state.proj.x(t.lon)
    const y = state.proj.y(t.lat)
    if (x < -30 || y < -30 || x > WIDTH + 30 || y > HEIGHT + 30) continue
    const marker = document.createElementNS('http://www.w3.org/2000/svg', 'circle')
    marker.setAttribute('cx', String(x))
    marker.setAttribute('cy', String(y))
    marker.setAttribute('r', '9')
    marker.setAttribute('class', `tx-marker ${t.enabled ? '' : 'disabled'}`)
    marker.setAttribute('data-tx', t.id)
    attachDrag(marker, t.id)
    svg.appendChild(marker)
    const label = document.createElementNS('http://www.w3.org/2000/svg', 'text')
    label.setAttribute('x', String(x + 12))
    label.setAttribute('y', String(y + 4))
    label.setAttribute('class', 'tx-label')
    label.textContent = t.name
    svg.appendChild(label)
  }
}

function attachDrag(marker: SVGCircleElement, txId: string): void {
  let dragging = false
  marker.addEventListener('pointerdown', (ev) => {
    dragging = true
    marker.setPointerCapture(ev.pointerId)
  })
  marker.addEventListener('pointermove', (ev) => {
    if (!dragging) return
    const point = svgPoint(ev)
    marker.setAttribute('cx', String(point.x))
    marker.setAttribute('cy', String(point.y))
    const { lat, lon } = unproject(point.x, point.y)
    applyEdit(moveTransmitter(state.ui.body, txId, round5(lat), round5(lon)), false)
  })
  marker.addEventListener('pointerup', () => {
    dragging = false
    renderMap()
  })
}

function svgPoint(ev: PointerEvent): { x: number; y: number } {
  const rect = svg.getBoundingClientRect()
  return { x: ev.clientX - rect.left, y: ev.clientY - rect.top }
}

function unproject(x: number, y: number): { lat: number; lon: number } {
  const e = state.ui.view.mapExtent
  return {
    lon: e.lonMin + (x / WIDTH) * (e.lonMax - e.lonMin),
    lat: e.latMax - (y / HEIGHT) * (e.latMax - e.latMin),
  }
}

function round5(v: number): number {
  return Math.round(v * 1e5) / 1e5
}

function inspectCell(feature: CellFeature): void {
  const p = feature.properties
  state.ui.view.selectedCell = { row: p.row, col: p.col }
  persist()
  if (!p.available) {
    cellPanel.innerHTML = `<p class="reason">unavailable: ${p.reason ?? 'unknown'}</p>`
    return
  }
  const ids = state.currentMap?.station_ids ?? []
  const rows = ids
    .map((id, i) => {
      const used = p.used[i] ? '' : ' class="excluded"'
      return `<tr${used}><td>${id}</td><td>${fmt(p.snr_db[i], 1)}</td>` +
        `<td>${fmt(p.sigma_m[i], 2)}</td><td>${fmt(p.azimuth_deg[i], 1)}</td></tr>`
    })
    .join('')
  cellPanel.innerHTML = `
    <p><strong>${formatAccuracy(p.accuracy_95_m)}</strong> (${p.n_stations} stations)</p>
    <table><tr><th>station</th><th>SNR dB</th><th>&sigma; m</th><th>az &deg;</th></tr>${rows}</table>`
}

function fmt(v: number | null, digits: number): string {
  return v === null ? '-' : v.toFixed(digits)
}

function applyEdit(body: ScenarioBody, rerenderNow = true): void {
  state.ui.body = body
  persist()
  if (rerenderNow) {
    renderStations()
    renderMap()
  }
  controller?.schedule(body)
}

function onOverlay(update: OverlayUpdate): void {
  state.currentMap = update.map
  state.currentJobId = update.jobId
  renderMap()
}

async function boot(): Promise<void> {
  renderLegend()
  renderStations()
  renderMap()
  try {
    const created = await api.createScenario(state.ui.body)
    state.scenarioId = created.id
    controller = new RecomputeController(api, created.id, {
      onOverlay,
      onStatus: (s) => (statusEl.textContent = s),
      onError: showBanner,
    })
    await controller.recomputeNow(state.ui.body)
  } catch (err) {
    showBanner(`service unreachable at ${API_BASE}: ${err instanceof Error ? err.message : err}`)
  }
}

document.getElementById('add-tx')!.addEventListener('click', () => {
  statusEl.textContent = 'click the map to place the new transmitter'
  const once = (ev: Event) => {
    const { lat, lon } = unproject(
      (ev as PointerEvent).clientX - svg.getBoundingClientRect().left,
      (ev as PointerEvent).clientY - svg.getBoundingClientRect().top,
    )
    const id = `TX${Date.now() % 100000}`
    try {
      applyEdit(
        addTransmitter(state.ui.body, tx(id, id, round5(lat), round5(lon), 100, 9930, '9930', 1000, 'secondary', 3.0)),
      )
    } catch (err) {
      showBanner(err instanceof Error ? err.message : String(err))
    }
    svg.removeEventListener('click', once)
  }
  svg.addEventListener('click', once)
})

document.getElementById('load-compare')!.addEventListener('click', async () => {
  const otherId = (document.getElementById('other-id') as HTMLInputElement).value.trim()
  if (!otherId) return
  try {
    const otherMap = await api.accuracyMap(otherId)
    if (state.currentMap) computeDelta(state.currentMap, otherMap) // validates grids
    state.compare = { otherId, otherMap }
    document.getElementById('compare-note')!.textContent =
      'blue: other scenario better, red: worse'
    renderMap()
  } catch (err) {
    showBanner(err instanceof Error ? err.message : String(err))
  }
})

document.getElementById('clear-compare')!.addEventListener('click', () => {
  state.compare = null
  document.getElementById('compare-note')!.textContent = ''
  renderMap()
})

opacityInput.addEventListener('input', () => {
  state.ui.view.overlayOpacity = Number(opacityInput.value)
  persist()
  renderMap()
})

export { DEBOUNCE_MS } // re-exported so the shell and tests agree on timing

void boot()
