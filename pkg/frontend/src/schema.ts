/** Client-side mirror of the published log-record schema.
 *
 * Downloaded logs and streamed records are checked against this before the
 * UI trusts them; any drift from the service contract fails loudly.
 */

import type { LogRecord } from './types.js';

const KINDS = new Set([
  'decision',
  'event_executed',
  'conversation_turn',
  'validation',
  'success_check',
  'system',
]);

const SECTIONS: Record<string, Record<string, string>> = {
  agent: { id: 'number', name: 'string', role: 'string' },
  command: { action: 'string', rationale: 'string' },
  event: { type: 'string', duration: 'number', participants: 'object' },
  outcome: { success: 'boolean', reason: 'string' },
};

export function validateRecord(record: unknown): asserts record is LogRecord {
  if (typeof record !== 'object' || record === null) {
    throw new Error('log record must be an object');
  }
  const r = record as Record<string, unknown>;
  for (const field of ['timestep', 'seq']) {
    if (typeof r[field] !== 'number' || (r[field] as number) < 0) {
      throw new Error(`log record field ${field} must be a non-negative number`);
    }
  }
  if (typeof r.kind !== 'string' || !KINDS.has(r.kind)) {
    throw new Error(`unknown record kind ${String(r.kind)}`);
  }
  for (const [section, fields] of Object.entries(SECTIONS)) {
    const value = r[section];
    if (value === undefined || value === null) continue;
    if (typeof value !== 'object') throw new Error(`${section} must be an object`);
    for (const [key, type] of Object.entries(fields)) {
      const got = (value as Record<string, unknown>)[key];
      if (typeof got !== type) {
        throw new Error(`${section}.${key} must be ${type}`);
      }
    }
  }
  const known = new Set(['timestep', 'seq', 'kind', ...Object.keys(SECTIONS), 'data']);
  for (const key of Object.keys(r)) {
    if (!known.has(key)) throw new Error(`unknown log record field ${key}`);
  }
}

export function validateLogText(text: string): LogRecord[] {
  const records: LogRecord[] = [];
  for (const line of text.split('\n')) {
    if (!line.trim()) continue;
    const parsed = JSON.parse(line);
    validateRecord(parsed);
    records.push(parsed);
  }
  return records;
}
