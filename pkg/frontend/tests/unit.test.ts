/** Unit tests for the dependency-free logic modules. */

import assert from 'node:assert/strict';
import { test } from 'node:test';

import { radarPoints, polygonPath, radarSvg } from '../src/radar.js';
import { SSEParser } from '../src/sse.js';
import { validateRecord, validateLogText } from '../src/schema.js';
import { RunStore } from '../src/store.js';
import { assembleScenario, defaultForm, validateForm } from '../src/scenario_form.js';
import type { LogRecord } from '../src/types.js';

function record(partial: Partial<LogRecord>): LogRecord {
  return {
    timestep: 0,
    seq: 0,
    kind: 'system',
    data: { event: 'x' },
    ...partial,
  } as LogRecord;
}

test('radar renders five axes from trait scores', () => {
  const points = radarPoints([1, 1, 1, 1, 1], 0, 0, 10);
  assert.equal(points.length, 5);
  // First axis points straight up from the center.
  assert.ok(Math.abs(points[0][0]) < 1e-9);
  assert.ok(Math.abs(points[0][1] + 10) < 1e-9);
  // Zero scores collapse onto the center.
  for (const [x, y] of radarPoints([0, 0, 0, 0, 0], 3, 4, 10)) {
    assert.ok(Math.hypot(x - 3, y - 4) < 1e-9);
  }
  const svg = radarSvg([0.2, 0.4, 0.6, 0.8, 1.0]);
  assert.match(svg, /<svg/);
  assert.match(svg, /radar-shape/);
  assert.equal(polygonPath(points).split('L').length, 5);
});

test('sse parser assembles frames across chunk boundaries', () => {
  const parser = new SSEParser();
  assert.deepEqual(parser.push('id: 0\ndata: {"a"'), []);
  const frames = parser.push(': 1}\n\nevent: done\ndata: {}\n\n');
  assert.equal(frames.length, 2);
  assert.deepEqual(JSON.parse(frames[0].data), { a: 1 });
  assert.equal(frames[1].event, 'done');
});

test('schema validator accepts real records and rejects drift', () => {
  validateRecord(record({
    kind: 'decision',
    agent: { id: 2, name: 'A', role: 'Transporter' },
    command: { action: 'search', rationale: 'sweep' },
  }));
  assert.throws(() => validateRecord(record({ kind: 'mystery' })));
  assert.throws(() => validateRecord({ seq: 0, kind: 'system' }));
  assert.throws(() => validateRecord(record({ surprise: 1 } as never)));
  const lines = [
    JSON.stringify(record({ seq: 0 })),
    JSON.stringify(record({ seq: 1, timestep: 1 })),
  ].join('\n');
  assert.equal(validateLogText(lines).length, 2);
});

test('store scrubbing filters records up to a step', () => {
  const store = new RunStore();
  for (let step = 0; step < 5; step += 1) {
    store.ingest(record({ seq: step, timestep: step }));
  }
  assert.equal(store.records.length, 0); // buffered until drained
  assert.equal(store.pendingCount(), 5);
  store.drain(3);
  assert.equal(store.records.length, 3);
  store.drain();
  assert.equal(store.recordsUpTo(2).length, 3); // timesteps 0, 1, 2
  assert.equal(store.maxTimestep(), 4);
  assert.equal(store.lastSeq(), 4);
});

test('store verb histogram counts executed events only', () => {
  const store = new RunStore();
  store.ingest(record({
    seq: 0, kind: 'event_executed',
    agent: { id: 2, name: 'A', role: 'T' },
    event: { type: 'action', duration: 1, participants: [] },
    outcome: { success: true, reason: '' },
    data: { verb: 'move' },
  }));
  store.ingest(record({ seq: 1, kind: 'decision',
    agent: { id: 2, name: 'A', role: 'T' },
    command: { action: 'move to x', rationale: '' }, data: undefined }));
  store.drain();
  assert.deepEqual(store.verbHistogram(), { move: 1 });
});

test('scenario form assembles a valid document', () => {
  const form = defaultForm();
  assert.deepEqual(validateForm(form), []);
  const doc = assembleScenario(form);
  assert.equal(doc.schema_version, 1);
  assert.equal(doc.environment.width, 30);
  assert.equal(doc.entities[0].count, 35);
  assert.equal(doc.success[0].threshold, 35);
  form.width = 4;
  form.agents = [];
  const problems = validateForm(form);
  assert.ok(problems.some((p) => p.includes('8x8')));
  assert.ok(problems.some((p) => p.includes('agent')));
});
