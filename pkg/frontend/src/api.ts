/** Typed client for the simulation service. All UI traffic goes through here. */

import type {
  Goal,
  InterviewReply,
  Metrics,
  ScenarioDoc,
  StateView,
  SurveyResult,
} from './types.js';

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      detail = typeof body.detail === 'string' ? body.detail : JSON.stringify(body.detail);
    } catch {
      /* no JSON body */
    }
    throw new ApiError(response.status, detail);
  }
  return response.json() as Promise<T>;
}

export class ApiClient {
  constructor(public base: string) {}

  createScenario(doc: ScenarioDoc): Promise<{ id: string; scenario: ScenarioDoc }> {
    return request(`${this.base}/scenarios`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(doc),
    });
  }

  getScenario(id: string): Promise<{ id: string; scenario: ScenarioDoc }> {
    return request(`${this.base}/scenarios/${id}`);
  }

  enhance(id: string, description: string): Promise<{ enhanced: string; goals: Goal[] }> {
    return request(`${this.base}/scenarios/${id}/enhance`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ description }),
    });
  }

  createSimulation(
    scenarioId: string,
    config: Record<string, unknown>,
    stepDelayMs = 0,
  ): Promise<{ id: string; owner_token: string; status: string }> {
    return request(`${this.base}/simulations`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({
        scenario_id: scenarioId,
        config,
        step_delay_ms: stepDelayMs,
      }),
    });
  }

  control(runId: string, token: string, verb: string): Promise<{ id: string; status: string }> {
    return request(`${this.base}/simulations/${runId}/control`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json', 'X-Owner-Token': token },
      body: JSON.stringify({ verb }),
    });
  }

  state(runId: string): Promise<{ id: string; status: string; view: StateView }> {
    return request(`${this.base}/simulations/${runId}/state`);
  }

  results(runId: string): Promise<{ id: string; status: string; metrics: Metrics }> {
    return request(`${this.base}/simulations/${runId}/results`);
  }

  async downloadLog(runId: string): Promise<string> {
    const response = await fetch(`${this.base}/simulations/${runId}/log`);
    if (!response.ok) throw new ApiError(response.status, response.statusText);
    return response.text();
  }

  eventsUrl(runId: string, fromSeq: number): string {
    return `${this.base}/simulations/${runId}/events?from=${fromSeq}`;
  }

  startInterview(
    runId: string,
    agentId: number,
    mode: 'guided' | 'custom',
  ): Promise<{ id: string; first_question: string | null }> {
    return request(`${this.base}/simulations/${runId}/interviews`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ agent_id: agentId, mode }),
    });
  }

  askNext(interviewId: string): Promise<InterviewReply> {
    return request(`${this.base}/interviews/${interviewId}/ask`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ next: true }),
    });
  }

  ask(interviewId: string, question: string): Promise<InterviewReply> {
    return request(`${this.base}/interviews/${interviewId}/ask`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ question }),
    });
  }

  survey(interviewId: string): Promise<SurveyResult> {
    return request(`${this.base}/interviews/${interviewId}/survey`, {
      method: 'POST',
    });
  }
}
