/** Payload shapes exchanged with the simulation service. */

export interface ScenarioDoc {
  schema_version: number;
  title: string;
  description: string;
  goals: Goal[];
  environment: {
    width: number;
    height: number;
    complexity: 'low' | 'medium' | 'high';
    seed: number;
    regions: string[];
  };
  agents: AgentSpec[];
  entities: EntitySpec[];
  success: SuccessClause[];
  max_timesteps: number;
}

export interface Goal {
  verb: string;
  object: string | null;
  count?: number;
}

export interface AgentSpec {
  name?: string;
  role: string;
  backstory?: string;
  openness?: number;
  conscientiousness?: number;
  extraversion?: number;
  agreeableness?: number;
  neuroticism?: number;
}

export interface EntitySpec {
  name: string;
  kind: 'interactive' | 'non_interactive';
  count: number;
  region?: string;
  avoid_regions?: string[];
  on_door?: boolean;
  attributes?: Record<string, string>;
}

export interface SuccessClause {
  filter: Record<string, string>;
  location?: Record<string, string | number | boolean>;
  op: string;
  threshold: number;
}

export interface LogRecord {
  timestep: number;
  seq: number;
  kind: string;
  agent?: { id: number; name: string; role: string };
  command?: { action: string; rationale: string };
  event?: { type: string; duration: number; participants: number[] };
  outcome?: { success: boolean; reason: string };
  data?: Record<string, unknown>;
}

export interface StateView {
  clock: number;
  status: string;
  matrix: { width: number; height: number; values: number[][] };
  agents: AgentView[];
  entities: EntityView[];
  conversations: ConversationView[];
  searched_regions: number[];
  regions: { id: number; name: string; rect: number[] }[];
  doors: number[][];
}

export interface AgentView {
  id: number;
  name: string;
  role: string;
  location: number[];
  region: number;
  status: string;
  inventory: string[];
  narrative: string;
}

export interface EntityView {
  id: string;
  name: string;
  kind: string;
  location: (string | number)[];
  state: Record<string, string>;
}

export interface ConversationView {
  conversation_id: number;
  initiator: number;
  participants: number[];
  transcript: { index: number; speaker: number; text: string; timestep: number }[];
  status: string;
  close_reason: string | null;
}

export interface Metrics {
  team: {
    targets_located: number;
    targets_remaining: number;
    targets_rescued: number;
    areas_discovered: number;
    communication_events: number;
    action_events: number;
    duration_steps: number;
  };
  per_agent: Record<string, PerAgentStats>;
}

export interface PerAgentStats {
  steps_taken: number;
  communications_initiated: number;
  rooms_visited: number;
  targets_located: number;
  action_counts: Record<string, number>;
}

export interface InterviewReply {
  rating: number | null;
  explanation: string;
  item?: number;
  question?: string;
}

export interface SurveyResult {
  agent_id: number;
  items: Record<string, { rating: number | null; explanation: string }>;
  dimensions: Record<string, number | null>;
  flags: string[];
}
