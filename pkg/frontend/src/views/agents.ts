/** Agent cards with add/edit and the Big Five radar. */

import type { AppContext } from '../context.js';
import { el } from '../context.js';
import { radarSvg, TRAIT_AXES } from '../radar.js';
import type { AgentSpec } from '../types.js';

const TRAIT_KEYS = ['openness', 'conscientiousness', 'extraversion',
  'agreeableness', 'neuroticism'] as const;

export function renderAgentsView(ctx: AppContext, root: HTMLElement): void {
  root.replaceChildren();
  const panel = el('div', 'panel');
  const header = el('div', 'row');
  header.appendChild(el('h2', '', 'Team'));
  const counter = el('span', 'counter',
    `${ctx.form.agents.length} agents active`);
  header.appendChild(counter);
  const add = el('button', 'primary', 'Add Agent');
  add.addEventListener('click', () => {
    const n = ctx.form.agents.length + 1;
    ctx.form.agents.push({ name: `Transporter-${n}`, role: 'Transporter' });
    renderAgentsView(ctx, root);
  });
  header.appendChild(add);
  panel.appendChild(header);

  const grid = el('div', 'card-grid');
  ctx.form.agents.forEach((agent, index) => {
    grid.appendChild(agentCard(ctx, root, agent, index));
  });
  panel.appendChild(grid);
  root.appendChild(panel);
}

function traitScores(agent: AgentSpec): number[] {
  return TRAIT_KEYS.map((key) => agent[key] ?? 0.5);
}

function agentCard(ctx: AppContext, root: HTMLElement, agent: AgentSpec,
                   index: number): HTMLElement {
  const card = el('div', 'card');
  card.appendChild(el('h3', '', agent.name ?? `Agent ${index + 1}`));
  card.appendChild(el('div', 'role-chip', agent.role));
  const radar = el('div', 'radar-holder');
  radar.innerHTML = radarSvg(traitScores(agent));
  card.appendChild(radar);
  card.appendChild(el('p', 'backstory', agent.backstory ?? ''));

  const editor = el('div', 'editor hidden');
  const nameInput = el('input') as HTMLInputElement;
  nameInput.value = agent.name ?? '';
  nameInput.addEventListener('input', () => { agent.name = nameInput.value; });
  editor.appendChild(field('Name', nameInput));
  const roleInput = el('input') as HTMLInputElement;
  roleInput.value = agent.role;
  roleInput.addEventListener('input', () => { agent.role = roleInput.value; });
  editor.appendChild(field('Role', roleInput));
  const storyInput = el('textarea') as HTMLTextAreaElement;
  storyInput.rows = 2;
  storyInput.value = agent.backstory ?? '';
  storyInput.addEventListener('input', () => { agent.backstory = storyInput.value; });
  editor.appendChild(field('Backstory', storyInput));

  TRAIT_KEYS.forEach((key, axis) => {
    const input = el('input') as HTMLInputElement;
    input.type = 'range';
    input.min = '0';
    input.max = '1';
    input.step = '0.05';
    input.value = String(agent[key] ?? 0.5);
    input.addEventListener('input', () => {
      agent[key] = Number(input.value);
      radar.innerHTML = radarSvg(traitScores(agent));
    });
    editor.appendChild(field(TRAIT_AXES[axis], input));
  });

  const buttons = el('div', 'button-row');
  const edit = el('button', '', 'Edit Profile');
  edit.addEventListener('click', () => editor.classList.toggle('hidden'));
  const remove = el('button', 'danger', 'Remove');
  remove.addEventListener('click', () => {
    ctx.form.agents.splice(index, 1);
    renderAgentsView(ctx, root);
  });
  buttons.append(edit, remove);
  card.appendChild(buttons);
  card.appendChild(editor);
  return card;
}

function field(name: string, control: HTMLElement): HTMLElement {
  const wrap = el('label', 'field');
  wrap.appendChild(el('span', 'field-name', name));
  wrap.appendChild(control);
  return wrap;
}
