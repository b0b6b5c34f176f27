/** App shell: tabbed navigation over the scenario/team/run/results views. */

import { AppContext, el } from './context.js';
import { renderAgentsView } from './views/agents.js';
import { renderInterviewView } from './views/interview.js';
import { renderResultsView } from './views/results.js';
import { renderRunView } from './views/run.js';
import { renderScenarioView } from './views/scenario.js';

const TABS = ['Scenario', 'Team', 'Run', 'Results', 'Interview'] as const;

function boot(): void {
  const base = (window as unknown as { TEAMSIM_API?: string }).TEAMSIM_API
    ?? 'http://127.0.0.1:8000';
  const ctx = new AppContext(base);
  const root = document.getElementById('app');
  if (!root) return;

  const nav = el('nav', 'tabs');
  const content = el('main', 'content');
  root.append(nav, content);

  const show = (tab: (typeof TABS)[number]) => {
    for (const button of Array.from(nav.children)) {
      button.classList.toggle('active', button.textContent === tab);
    }
    switch (tab) {
      case 'Scenario':
        renderScenarioView(ctx, content, () => show('Team'));
        break;
      case 'Team':
        renderAgentsView(ctx, content);
        break;
      case 'Run':
        renderRunView(ctx, content);
        break;
      case 'Results':
        renderResultsView(ctx, content);
        break;
      case 'Interview':
        renderInterviewView(ctx, content);
        break;
    }
  };

  for (const tab of TABS) {
    const button = el('button', 'tab', tab);
    button.addEventListener('click', () => show(tab));
    nav.appendChild(button);
  }
  show('Scenario');
}

if (typeof document !== 'undefined') {
  if (document.readyState === 'loading') {
    document.addEventListener('DOMContentLoaded', boot);
  } else {
    boot();
  }
}
