/** View-model for one run: the record stream plus the latest state view.
 *
 * Pure bookkeeping over server responses; no simulation logic lives here.
 * Records are buffered as they arrive and drained at the UI's own cadence,
 * so uneven timestep arrival shows as a catch-up counter instead of
 * flashing panels.
 */

import { validateRecord } from './schema.js';
import type { LogRecord, Metrics, StateView } from './types.js';

export class RunStore {
  records: LogRecord[] = [];
  view: StateView | null = null;
  status = 'created';
  metrics: Metrics | null = null;
  /** Records received but not yet surfaced by the render ticker. */
  private backlog: LogRecord[] = [];
  listeners: (() => void)[] = [];

  ingest(record: LogRecord): void {
    validateRecord(record);
    this.backlog.push(record);
  }

  /** Move up to `budget` buffered records into the visible log. */
  drain(budget = 50): number {
    const moved = this.backlog.splice(0, budget);
    this.records.push(...moved);
    if (moved.length) this.notify();
    return moved.length;
  }

  pendingCount(): number {
    return this.backlog.length;
  }

  lastSeq(): number {
    const last = this.backlog.length
      ? this.backlog[this.backlog.length - 1]
      : this.records[this.records.length - 1];
    return last ? last.seq : -1;
  }

  setView(view: StateView, status: string): void {
    this.view = view;
    this.status = status;
    this.notify();
  }

  setMetrics(metrics: Metrics): void {
    this.metrics = metrics;
    this.notify();
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  // --- derived views (pure functions of received data) ---

  maxTimestep(): number {
    const last = this.records[this.records.length - 1];
    return last ? last.timestep : 0;
  }

  recordsUpTo(step: number): LogRecord[] {
    return this.records.filter((r) => r.timestep <= step);
  }

  conversationTurns(): LogRecord[] {
    return this.records.filter((r) => r.kind === 'conversation_turn');
  }

  narrativeFor(agentId: number): string {
    if (!this.view) return '';
    const agent = this.view.agents.find((a) => a.id === agentId);
    return agent ? agent.narrative : '';
  }

  verbHistogram(): Record<string, number> {
    const counts: Record<string, number> = {};
    for (const record of this.records) {
      if (record.kind !== 'event_executed' || !record.data) continue;
      const verb = record.data['verb'];
      if (typeof verb === 'string') counts[verb] = (counts[verb] ?? 0) + 1;
    }
    return counts;
  }
}
