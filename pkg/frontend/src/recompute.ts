// Edit -> debounced PUT + compute -> poll -> refresh loop. Every edit either
// produces a refreshed overlay or is superseded by a newer edit; results are
// stamped with their job id so a stale map can never be presented as current.

import type { SimulatorApi } from './api'
import type { AccuracyMap, ScenarioBody } from './types'

export const DEBOUNCE_MS = 400
export const POLL_INTERVAL_MS = 150

export interface OverlayUpdate {
  map: AccuracyMap
  jobId: string
  contentHash: string
}

export interface ControllerEvents {
  onOverlay(update: OverlayUpdate): void
  onStatus?(status: string): void
  onError?(message: string): void
}

interface Timers {
  setTimeout(fn: () => void, ms: number): unknown
  clearTimeout(handle: unknown): void
}

export class RecomputeController {
  private pendingBody: ScenarioBody | null = null
  private debounceHandle: unknown = null
  private generation = 0 // bumps on every schedule; stale polls abandon
  private inFlight = false

  constructor(
    private readonly api: SimulatorApi,
    private readonly scenarioId: string,
    private readonly events: ControllerEvents,
    private readonly timers: Timers = globalThis as unknown as Timers,
  ) {}

  /** Debounced entry point for all transmitter edits. */
  schedule(body: ScenarioBody): void {
    this.pendingBody = body
    this.generation += 1
    if (this.debounceHandle !== null) this.timers.clearTimeout(this.debounceHandle)
    this.debounceHandle = this.timers.setTimeout(() => {
      this.debounceHandle = null
      void this.flush()
    }, DEBOUNCE_MS)
  }

  /** Immediate recompute (initial load); still generation-guarded. */
  async recomputeNow(body: ScenarioBody): Promise<void> {
    this.pendingBody = body
    this.generation += 1
    await this.flush()
  }

  private async flush(): Promise<void> {
    if (this.pendingBody === null) return
    const body = this.pendingBody
    const generation = this.generation
    this.pendingBody = null
    this.inFlight = true
    try {
      const put = await this.api.putScenario(this.scenarioId, body)
      this.events.onStatus?.('computing')
      const { job_id } = await this.api.compute(this.scenarioId)
      const state = await this.pollJob(job_id, generation)
      if (state === 'superseded') return
      if (state !== 'done') {
        // cancelled jobs are the normal newest-wins outcome, not errors
        if (state !== 'cancelled') this.events.onError?.(`compute ${state}`)
        return
      }
      if (generation !== this.generation) return // a newer edit owns the overlay
      const map = await this.api.accuracyMap(this.scenarioId)
      if (generation !== this.generation) return
      this.events.onOverlay({ map, jobId: job_id, contentHash: put.content_hash })
      this.events.onStatus?.('up to date')
    } catch (err) {
      this.events.onError?.(err instanceof Error ? err.message : String(err))
    } finally {
      this.inFlight = false
    }
  }

  private async pollJob(jobId: string, generation: number): Promise<string> {
    for (;;) {
      if (generation !== this.generation) return 'superseded'
      const job = await this.api.job(jobId)
      if (job.state === 'done' || job.state === 'failed' || job.state === 'cancelled') {
        return job.state
      }
      this.events.onStatus?.(`computing ${(job.progress * 100).toFixed(0)}%`)
      await new Promise((resolve) => this.timers.setTimeout(() => resolve(null), POLL_INTERVAL_MS))
    }
  }

  get busy(): boolean {
    return this.inFlight || this.debounceHandle !== null
  }
}
