/** Live run console: map canvas, timeline scrubber, event log, controls. */

import type { AppContext } from '../context.js';
import { el } from '../context.js';
import { agentColor, drawState } from '../map.js';
import { assembleScenario } from '../scenario_form.js';
import { followEvents } from '../sse.js';
import type { LogRecord } from '../types.js';

export function renderRunView(ctx: AppContext, root: HTMLElement): void {
  root.replaceChildren();
  const panel = el('div', 'panel run-grid');

  const left = el('div', 'run-left');
  const canvas = el('canvas', 'map-canvas') as HTMLCanvasElement;
  canvas.width = 600;
  canvas.height = 600;
  left.appendChild(canvas);

  const controls = el('div', 'button-row');
  const statusChip = el('span', 'chip', 'created');
  const backlogChip = el('span', 'chip backlog hidden', '');
  const startButton = el('button', 'primary', 'Start');
  const pauseButton = el('button', '', 'Pause');
  const resumeButton = el('button', '', 'Resume');
  const stepButton = el('button', '', 'Step');
  const downloadButton = el('button', '', 'Download Log');
  controls.append(startButton, pauseButton, resumeButton, stepButton,
    downloadButton, statusChip, backlogChip);
  left.appendChild(controls);

  const scrubWrap = el('div', 'scrub-row');
  const scrubber = el('input') as HTMLInputElement;
  scrubber.type = 'range';
  scrubber.min = '0';
  scrubber.max = '0';
  scrubber.value = '0';
  const scrubLabel = el('span', 'readout', 'live');
  scrubWrap.append(el('span', 'field-name', 'Timeline'), scrubber, scrubLabel);
  left.appendChild(scrubWrap);

  const right = el('div', 'run-right');
  const narrative = el('div', 'narrative');
  right.appendChild(el('h3', '', 'Narrative'));
  right.appendChild(narrative);
  right.appendChild(el('h3', '', 'Events'));
  const eventLog = el('div', 'event-log');
  right.appendChild(eventLog);
  right.appendChild(el('h3', '', 'Conversations'));
  const commPanel = el('div', 'comm-panel');
  right.appendChild(commPanel);

  panel.append(left, right);
  root.appendChild(panel);

  let scrubbing = false;
  scrubber.addEventListener('input', () => {
    scrubbing = Number(scrubber.value) < ctx.store.maxTimestep();
    scrubLabel.textContent = scrubbing ? `step ${scrubber.value}` : 'live';
    renderLog();
  });

  const renderLog = () => {
    const limit = scrubbing ? Number(scrubber.value) : Infinity;
    const visible = scrubbing
      ? ctx.store.recordsUpTo(limit as number)
      : ctx.store.records;
    eventLog.replaceChildren();
    for (const record of visible.slice(-80)) {
      eventLog.appendChild(renderRecord(record));
    }
    eventLog.scrollTop = eventLog.scrollHeight;
    commPanel.replaceChildren();
    const turns = visible.filter((r) => r.kind === 'conversation_turn');
    for (const turn of turns.slice(-30)) {
      const line = el('div', 'comm-line');
      const who = el('span', 'speaker', `${turn.agent?.name ?? '?'}: `);
      who.style.color = agentColor(turn.agent?.id ?? 2);
      line.appendChild(who);
      line.appendChild(el('span', '', String(turn.data?.['utterance'] ?? '')));
      commPanel.appendChild(line);
    }
    commPanel.scrollTop = commPanel.scrollHeight;
  };

  const refresh = () => {
    statusChip.textContent = ctx.store.status;
    statusChip.className = `chip status-${ctx.store.status}`;
    const pending = ctx.store.pendingCount();
    backlogChip.classList.toggle('hidden', pending === 0);
    backlogChip.textContent = pending ? `catching up: ${pending}` : '';
    if (ctx.store.view) {
      drawState(canvas, ctx.store.view);
      narrative.replaceChildren();
      for (const agent of ctx.store.view.agents) {
        const line = el('div', 'narrative-line');
        const chip = el('span', 'speaker', `${agent.name} `);
        chip.style.color = agentColor(agent.id);
        line.append(chip, el('span', '', agent.narrative));
        narrative.appendChild(line);
      }
    }
    if (!scrubbing) {
      scrubber.max = String(ctx.store.maxTimestep());
      scrubber.value = scrubber.max;
    }
    renderLog();
  };

  ctx.store.onChange(refresh);

  // Fixed-cadence drain keeps the panels smooth when records arrive in
  // bursts; the backlog chip shows how far behind the display is.
  const ticker = window.setInterval(async () => {
    ctx.store.drain(60);
    if (ctx.runId && ctx.store.status !== 'created') {
      try {
        const state = await ctx.api.state(ctx.runId);
        ctx.store.setView(state.view, state.status);
      } catch {
        /* transient poll failure */
      }
    }
  }, 250);
  window.addEventListener('beforeunload', () => window.clearInterval(ticker));

  const ensureRun = async (): Promise<string> => {
    if (ctx.runId) return ctx.runId;
    if (!ctx.scenarioId) {
      const created = await ctx.api.createScenario(assembleScenario(ctx.form));
      ctx.scenarioId = created.id;
    }
    const sim = await ctx.api.createSimulation(ctx.scenarioId, { seed: ctx.form.seed }, 5);
    ctx.runId = sim.id;
    ctx.ownerToken = sim.owner_token;
    ctx.stream = followEvents(
      (fromSeq) => ctx.api.eventsUrl(sim.id, fromSeq),
      (record: LogRecord) => ctx.store.ingest(record),
    );
    return sim.id;
  };

  const control = async (verb: string) => {
    const runId = await ensureRun();
    if (!ctx.ownerToken) return;
    await ctx.api.control(runId, ctx.ownerToken, verb);
    const state = await ctx.api.state(runId);
    ctx.store.setView(state.view, state.status);
  };

  startButton.addEventListener('click', () => void control('start'));
  pauseButton.addEventListener('click', () => void control('pause'));
  resumeButton.addEventListener('click', () => void control('resume'));
  stepButton.addEventListener('click', () => void control('step'));
  downloadButton.addEventListener('click', async () => {
    if (!ctx.runId) return;
    const text = await ctx.api.downloadLog(ctx.runId);
    const blob = new Blob([text], { type: 'application/x-ndjson' });
    const link = el('a') as HTMLAnchorElement;
    link.href = URL.createObjectURL(blob);
    link.download = `${ctx.runId}.jsonl`;
    link.click();
    URL.revokeObjectURL(link.href);
  });

  refresh();
}

function renderRecord(record: LogRecord): HTMLElement {
  const line = el('div', `log-line kind-${record.kind}`);
  line.appendChild(el('span', 'step', `t${record.timestep}`));
  const who = record.agent ? `${record.agent.name}` : 'engine';
  const chip = el('span', 'speaker', who);
  if (record.agent) chip.style.color = agentColor(record.agent.id);
  line.appendChild(chip);
  let text = record.kind;
  if (record.kind === 'decision' && record.command) {
    text = record.command.action;
  } else if (record.kind === 'event_executed' && record.outcome) {
    text = `${String(record.data?.['verb'] ?? 'event')} ` +
      (record.outcome.success ? 'done' : `failed: ${record.outcome.reason}`);
  } else if (record.kind === 'validation' && record.outcome) {
    text = record.outcome.success ? 'validated' :
      `rejected: ${record.outcome.reason}`;
  } else if (record.kind === 'conversation_turn') {
    text = String(record.data?.['utterance'] ?? '');
  } else if (record.kind === 'system') {
    text = String(record.data?.['event'] ?? 'system');
  } else if (record.kind === 'success_check') {
    text = record.outcome?.success ? 'goal met' : 'goal pending';
  }
  line.appendChild(el('span', 'what', text));
  return line;
}
