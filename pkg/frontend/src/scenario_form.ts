/** Assemble a scenario document from the editor's form state. */

import type { AgentSpec, Goal, ScenarioDoc } from './types.js';

export interface ScenarioForm {
  title: string;
  description: string;
  goals: Goal[];
  width: number;
  height: number;
  complexity: 'low' | 'medium' | 'high';
  seed: number;
  victims: number;
  maxTimesteps: number;
  agents: AgentSpec[];
}

export function defaultForm(): ScenarioForm {
  return {
    title: 'Rescue mission',
    description:
      'A search-and-rescue team must locate and rescue 35 victims scattered ' +
      'through a multi-room facility and bring them back to the Hospital room.',
    goals: [],
    width: 30,
    height: 30,
    complexity: 'low',
    seed: 7,
    victims: 35,
    maxTimesteps: 2000,
    agents: [
      { name: 'Transporter-1', role: 'Transporter' },
      { name: 'Transporter-2', role: 'Transporter' },
      { name: 'Transporter-3', role: 'Transporter' },
    ],
  };
}

export function validateForm(form: ScenarioForm): string[] {
  const problems: string[] = [];
  if (form.width < 8 || form.height < 8) {
    problems.push('grid must be at least 8x8');
  }
  if (form.agents.length === 0) problems.push('add at least one agent');
  if (form.victims < 1) problems.push('need at least one victim');
  if (form.maxTimesteps < 1) problems.push('duration must be positive');
  return problems;
}

export function assembleScenario(form: ScenarioForm): ScenarioDoc {
  return {
    schema_version: 1,
    title: form.title,
    description: form.description,
    goals: form.goals,
    environment: {
      width: form.width,
      height: form.height,
      complexity: form.complexity,
      seed: form.seed,
      regions: ['hospital'],
    },
    agents: form.agents,
    entities: [
      {
        name: 'Victim',
        kind: 'interactive',
        count: form.victims,
        avoid_regions: ['hospital'],
        attributes: { condition: 'stable' },
      },
      {
        name: 'Hospital Sign',
        kind: 'non_interactive',
        count: 1,
        region: 'hospital',
      },
    ],
    success: [
      {
        filter: { name_prefix: 'victim' },
        location: { region_tag: 'hospital' },
        op: '>=',
        threshold: form.victims,
      },
    ],
    max_timesteps: form.maxTimesteps,
  };
}
