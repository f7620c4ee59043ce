// Payload shapes of the /v1 API (see docs/api.md in the repo root).

export type ModuleKind = "mcq" | "iq" | "live";
export type DifficultyLevel = 1 | 2 | 3;

export interface PromptOption {
  id: string;
  label: string;
}

export interface Prompt {
  step_id: string;
  module_kind: ModuleKind;
  module_index: number;
  step_index: number;
  text: string;
  options: PromptOption[];
  time_limit_s: number;
  difficulty: DifficultyLevel;
  hint: string | null;
  prompt_timestamp_s: number;
}

export interface StepResult {
  item_ref: string;
  module_kind: ModuleKind;
  completed: 0 | 1;
  correct: boolean;
  duration_s: number;
  difficulty_at_step: DifficultyLevel;
  chosen_id: string | null;
  position_matched?: 0 | 1;
}

export interface Outcome {
  step_result: StepResult | null;
  adaptation: { from: DifficultyLevel; to: DifficultyLevel } | null;
  session_finished: boolean;
}

export interface SubtaskMetrics {
  module_kind: ModuleKind;
  module_index: number;
  completion_rate: number;
  avg_task_time_s: number;
  success_rate: number;
  weighted_score: number;
  order_accuracy_x?: number;
  action_correctness_y?: number;
  vrtss?: number;
}

export interface SessionMetrics {
  session_id: string;
  per_subtask: SubtaskMetrics[];
  engagement_frequency: number;
  total_duration_s: number;
  final_difficulty: DifficultyLevel;
}

export interface SessionCreated {
  session_id: string;
  scenario_id: string;
  scenario_version: number;
  seed: number;
  next_seq: number;
  prompt: Prompt;
  server_elapsed_s: number;
}

export interface EventResponse {
  outcome: Outcome;
  next_seq: number;
  next_prompt: Prompt | null;
  metrics: SessionMetrics | null;
  server_elapsed_s: number;
}

export interface Tally {
  module_kind: ModuleKind;
  attempted: number;
  correct: number;
}

export interface Snapshot {
  session_id: string;
  scenario_id: string;
  scenario_version: number;
  seed: number;
  phase: "awaiting-answer" | "awaiting-prompt" | "awaiting-end" | "ended" | "awaiting-start";
  difficulty: DifficultyLevel;
  next_seq: number;
  prompt: Prompt | null;
  tallies: Tally[];
  metrics_available: boolean;
  server_elapsed_s: number;
}

export interface ScenarioListing {
  scenarios: { scenario_id: string; versions: number[] }[];
}

export interface OutgoingEvent {
  seq: number;
  kind: "answer_selected" | "target_interacted" | "action_performed";
  payload: Record<string, string>;
  timestamp_s: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly seq?: number,
  ) {
    super(message);
  }
}

/** Codes the client repairs by refetching session state and resyncing seq. */
export const RECOVERABLE_CODES = new Set([
  "sequence-gap",
  "protocol-violation",
  "time-regression",
  "situation-consumed",
  "option-not-presented",
]);
