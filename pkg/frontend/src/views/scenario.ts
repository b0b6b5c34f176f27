/** Scenario editor: describe, enhance with review, tune the environment. */

import type { AppContext } from '../context.js';
import { el } from '../context.js';
import { assembleScenario, validateForm } from '../scenario_form.js';
import type { Goal } from '../types.js';

export function renderScenarioView(ctx: AppContext, root: HTMLElement,
                                   onSaved: () => void): void {
  root.replaceChildren();
  const panel = el('div', 'panel');
  panel.appendChild(el('h2', '', 'Scenario'));

  const titleInput = el('input') as HTMLInputElement;
  titleInput.value = ctx.form.title;
  titleInput.addEventListener('input', () => { ctx.form.title = titleInput.value; });
  panel.appendChild(labeled('Title', titleInput));

  const description = el('textarea') as HTMLTextAreaElement;
  description.rows = 5;
  description.value = ctx.form.description;
  description.addEventListener('input', () => { ctx.form.description = description.value; });
  panel.appendChild(labeled('Description', description));

  const goalList = el('ul', 'goal-list');
  const renderGoals = (goals: Goal[]) => {
    ctx.form.goals = goals;
    goalList.replaceChildren();
    for (const goal of goals) {
      const label = goal.count !== undefined
        ? `${goal.verb}: ${goal.object ?? ''} (count ${goal.count})`
        : `${goal.verb}: ${goal.object ?? ''}`;
      goalList.appendChild(el('li', 'goal', label));
    }
  };

  const enhanceButton = el('button', 'primary', 'Enhance Description');
  const modal = el('div', 'modal hidden');
  enhanceButton.addEventListener('click', async () => {
    enhanceButton.disabled = true;
    try {
      const scenarioId = await ensureScenario(ctx);
      const result = await ctx.api.enhance(scenarioId, ctx.form.description);
      modal.replaceChildren();
      modal.classList.remove('hidden');
      modal.appendChild(el('h3', '', 'Suggested description'));
      const before = ctx.form.description;
      modal.appendChild(el('pre', 'diff-old', before));
      modal.appendChild(el('pre', 'diff-new', result.enhanced));
      const goalsTitle = el('h4', '', 'Detected goals');
      modal.appendChild(goalsTitle);
      for (const goal of result.goals) {
        modal.appendChild(el('div', 'goal', `${goal.verb}: ${goal.object ?? ''}` +
          (goal.count !== undefined ? ` (count ${goal.count})` : '')));
      }
      const accept = el('button', 'primary', 'Accept');
      accept.addEventListener('click', () => {
        ctx.form.description = result.enhanced;
        description.value = result.enhanced;
        renderGoals(result.goals);
        modal.classList.add('hidden');
      });
      const reject = el('button', '', 'Reject');
      reject.addEventListener('click', () => {
        // Rejecting restores the prior text untouched.
        description.value = before;
        modal.classList.add('hidden');
      });
      const row = el('div', 'button-row');
      row.append(accept, reject);
      modal.appendChild(row);
    } finally {
      enhanceButton.disabled = false;
    }
  });
  panel.appendChild(enhanceButton);
  panel.appendChild(modal);
  renderGoals(ctx.form.goals);
  panel.appendChild(goalList);

  const sliders = el('div', 'slider-grid');
  sliders.appendChild(slider('Width', 8, 60, ctx.form.width, (v) => { ctx.form.width = v; }));
  sliders.appendChild(slider('Height', 8, 60, ctx.form.height, (v) => { ctx.form.height = v; }));
  sliders.appendChild(slider('Victims', 1, 50, ctx.form.victims, (v) => { ctx.form.victims = v; }));
  sliders.appendChild(slider('Max steps', 100, 3000, ctx.form.maxTimesteps,
    (v) => { ctx.form.maxTimesteps = v; }));
  const complexity = el('select') as HTMLSelectElement;
  for (const level of ['low', 'medium', 'high']) {
    const option = el('option', '', level) as HTMLOptionElement;
    option.value = level;
    complexity.appendChild(option);
  }
  complexity.value = ctx.form.complexity;
  complexity.addEventListener('change', () => {
    ctx.form.complexity = complexity.value as 'low' | 'medium' | 'high';
  });
  sliders.appendChild(labeled('Complexity', complexity));
  panel.appendChild(sliders);

  const problems = el('div', 'problems');
  const save = el('button', 'primary', 'Save Scenario');
  save.addEventListener('click', async () => {
    const issues = validateForm(ctx.form);
    problems.replaceChildren();
    if (issues.length) {
      for (const issue of issues) problems.appendChild(el('div', 'error', issue));
      return;
    }
    const created = await ctx.api.createScenario(assembleScenario(ctx.form));
    ctx.scenarioId = created.id;
    problems.appendChild(el('div', 'ok', `Saved as ${created.id}`));
    onSaved();
  });
  panel.appendChild(save);
  panel.appendChild(problems);
  root.appendChild(panel);
}

async function ensureScenario(ctx: AppContext): Promise<string> {
  if (ctx.scenarioId) return ctx.scenarioId;
  const created = await ctx.api.createScenario(assembleScenario(ctx.form));
  ctx.scenarioId = created.id;
  return created.id;
}

function labeled(text: string, control: HTMLElement): HTMLElement {
  const wrap = el('label', 'field');
  wrap.appendChild(el('span', 'field-name', text));
  wrap.appendChild(control);
  return wrap;
}

function slider(name: string, min: number, max: number, value: number,
                onChange: (v: number) => void): HTMLElement {
  const input = el('input') as HTMLInputElement;
  input.type = 'range';
  input.min = String(min);
  input.max = String(max);
  input.value = String(value);
  const readout = el('span', 'readout', String(value));
  input.addEventListener('input', () => {
    readout.textContent = input.value;
    onChange(Number(input.value));
  });
  const wrap = el('label', 'field');
  wrap.appendChild(el('span', 'field-name', name));
  wrap.appendChild(input);
  wrap.appendChild(readout);
  return wrap;
}
