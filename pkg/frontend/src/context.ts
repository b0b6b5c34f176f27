/** Shared mutable app context threaded through the views. */

import { ApiClient } from './api.js';
import { RunStore } from './store.js';
import type { ScenarioForm } from './scenario_form.js';
import { defaultForm } from './scenario_form.js';
import type { StreamHandle } from './sse.js';

export class AppContext {
  api: ApiClient;
  form: ScenarioForm = defaultForm();
  scenarioId: string | null = null;
  runId: string | null = null;
  ownerToken: string | null = null;
  stream: StreamHandle | null = null;
  store = new RunStore();
  interviewId: string | null = null;

  constructor(base: string) {
    this.api = new ApiClient(base);
  }

  resetRun(): void {
    if (this.stream) this.stream.stop();
    this.stream = null;
    this.store = new RunStore();
    this.runId = null;
    this.ownerToken = null;
    this.interviewId = null;
  }
}

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = '',
  text = '',
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}
