/** Results dashboard: mission stats, per-verb bars, per-agent table. */

import type { AppContext } from '../context.js';
import { el } from '../context.js';

export function renderResultsView(ctx: AppContext, root: HTMLElement): void {
  root.replaceChildren();
  const panel = el('div', 'panel');
  panel.appendChild(el('h2', '', 'Results'));

  const load = el('button', 'primary', 'Load Results');
  const body = el('div');
  load.addEventListener('click', async () => {
    if (!ctx.runId) return;
    const payload = await ctx.api.results(ctx.runId);
    ctx.store.setMetrics(payload.metrics);
    body.replaceChildren(renderMetrics(ctx));
  });
  panel.appendChild(load);
  panel.appendChild(body);
  if (ctx.store.metrics) body.appendChild(renderMetrics(ctx));
  root.appendChild(panel);
}

function renderMetrics(ctx: AppContext): HTMLElement {
  const metrics = ctx.store.metrics;
  const wrap = el('div');
  if (!metrics) return wrap;

  const header = el('div', 'stats-header');
  const team = metrics.team;
  for (const [label, value] of [
    ['Targets located', team.targets_located],
    ['Targets remaining', team.targets_remaining],
    ['Targets rescued', team.targets_rescued],
    ['Areas discovered', team.areas_discovered],
    ['Communication events', team.communication_events],
    ['Mission duration', team.duration_steps],
  ] as [string, number][]) {
    const stat = el('div', 'stat');
    stat.appendChild(el('div', 'stat-value', String(value)));
    stat.appendChild(el('div', 'stat-label', label));
    header.appendChild(stat);
  }
  wrap.appendChild(header);

  wrap.appendChild(el('h3', '', 'Actions by type'));
  const histogram = ctx.store.verbHistogram();
  const maxCount = Math.max(1, ...Object.values(histogram));
  const bars = el('div', 'bars');
  for (const verb of Object.keys(histogram).sort()) {
    const row = el('div', 'bar-row');
    row.appendChild(el('span', 'bar-label', verb));
    const bar = el('div', 'bar');
    bar.style.width = `${(histogram[verb] / maxCount) * 100}%`;
    row.appendChild(bar);
    row.appendChild(el('span', 'bar-count', String(histogram[verb])));
    bars.appendChild(row);
  }
  wrap.appendChild(bars);

  wrap.appendChild(el('h3', '', 'Per-agent'));
  const table = el('table', 'agent-table');
  const head = el('tr');
  for (const column of ['Agent', 'Steps taken', 'Comms initiated',
    'Rooms visited', 'Targets located']) {
    head.appendChild(el('th', '', column));
  }
  table.appendChild(head);
  for (const [agentId, stats] of Object.entries(metrics.per_agent)) {
    const row = el('tr');
    const name = ctx.store.view?.agents.find((a) => String(a.id) === agentId)?.name
      ?? `Agent-${agentId}`;
    row.appendChild(el('td', '', name));
    row.appendChild(el('td', '', String(stats.steps_taken)));
    row.appendChild(el('td', '', String(stats.communications_initiated)));
    row.appendChild(el('td', '', String(stats.rooms_visited)));
    row.appendChild(el('td', '', String(stats.targets_located)));
    table.appendChild(row);
  }
  wrap.appendChild(table);
  return wrap;
}
