import { SessionApi } from "./api.js";
import { Countdown } from "./countdown.js";
import {
  ApiError,
  DifficultyLevel,
  EventResponse,
  ModuleKind,
  Prompt,
  RECOVERABLE_CODES,
  SessionMetrics,
  Snapshot,
} from "./types.js";

export type Phase =
  | "idle"
  | "connecting"
  | "prompt"
  | "feedback"
  | "waiting-server"
  | "report"
  | "connection-error";

export interface TallyCounts {
  attempted: number;
  correct: number;
}

export interface DeltaCell {
  situationId: string;
  matched: boolean;
}

export interface Feedback {
  stepId: string;
  chosenId: string | null;
  correct: boolean;
  timedOut: boolean;
}

/** Everything the views render. Metric values are always service payloads;
 * the client never recomputes a score. */
export interface ViewState {
  phase: Phase;
  scenarioId: string | null;
  sessionId: string | null;
  seed: number | null;
  difficulty: DifficultyLevel;
  prompt: Prompt | null;
  countdownRemaining: number;
  inputEnabled: boolean;
  tallies: Partial<Record<ModuleKind, TallyCounts>>;
  deltaStrip: DeltaCell[];
  feedback: Feedback | null;
  adaptationNotice: string | null;
  report: SessionMetrics | null;
  error: { code: string; message: string } | null;
}

export interface ControllerOptions {
  now?: () => number; // seconds
  countdown?: Countdown;
  pollIntervalMs?: number;
  onChange?: (state: ViewState) => void;
  sleep?: (ms: number) => Promise<void>;
}

const freshState = (): ViewState => ({
  phase: "idle",
  scenarioId: null,
  sessionId: null,
  seed: null,
  difficulty: 2,
  prompt: null,
  countdownRemaining: 0,
  inputEnabled: false,
  tallies: {},
  deltaStrip: [],
  feedback: null,
  adaptationNotice: null,
  report: null,
  error: null,
});

export class SessionController {
  readonly state: ViewState = freshState();
  /** seqs this client actually submitted, in order (must be gapless). */
  readonly sentSeqs: number[] = [];

  private nextSeq = 0;
  private clockOffset = 0; // serverElapsed - clientNow, refreshed on every response
  private inflight = false;
  private readonly now: () => number;
  private readonly countdown: Countdown;
  private readonly pollIntervalMs: number;
  private readonly onChange: (state: ViewState) => void;
  private readonly sleep: (ms: number) => Promise<void>;

  constructor(private readonly api: SessionApi, options: ControllerOptions = {}) {
    this.now = options.now ?? (() => Date.now() / 1000);
    this.countdown = options.countdown ?? new Countdown(this.now);
    this.pollIntervalMs = options.pollIntervalMs ?? 250;
    this.onChange = options.onChange ?? (() => {});
    this.sleep = options.sleep ?? ((ms) => new Promise((resolve) => setTimeout(resolve, ms)));
  }

  private notify(): void {
    this.onChange(this.state);
  }

  private syncClock(serverElapsed: number): void {
    this.clockOffset = serverElapsed - this.now();
  }

  /** Client-relative session time, kept monotone against the open prompt. */
  private clientElapsed(): number {
    const estimated = this.now() + this.clockOffset;
    const floor = this.state.prompt?.prompt_timestamp_s ?? 0;
    return Math.max(estimated, floor);
  }

  async start(scenarioId: string, seed?: number): Promise<void> {
    this.state.phase = "connecting";
    this.state.scenarioId = scenarioId;
    this.state.error = null;
    this.notify();
    let created;
    try {
      created = await this.api.createSession(scenarioId, seed);
    } catch (error) {
      if (error instanceof ApiError) {
        this.state.phase = "connection-error";
        this.state.error = { code: error.code, message: error.message };
        this.notify();
        return;
      }
      throw error;
    }
    this.state.sessionId = created.session_id;
    this.state.seed = created.seed;
    this.nextSeq = created.next_seq;
    this.syncClock(created.server_elapsed_s);
    this.showPrompt(created.prompt);
  }

  private showPrompt(prompt: Prompt): void {
    this.state.prompt = prompt;
    this.state.difficulty = prompt.difficulty;
    this.state.phase = "prompt";
    this.state.inputEnabled = true;
    this.state.feedback = null;
    this.countdown.start(
      prompt.time_limit_s - Math.max(0, this.clientElapsed() - prompt.prompt_timestamp_s),
      (remaining) => {
        this.state.countdownRemaining = remaining;
        this.notify();
      },
      () => {
        void this.onCountdownExpired();
      },
    );
    this.notify();
  }

  /** Submit the trainee's choice for the current prompt. */
  async answer(choiceId: string): Promise<void> {
    const prompt = this.state.prompt;
    if (this.state.phase !== "prompt" || !this.state.inputEnabled || this.inflight || !prompt) {
      return;
    }
    let kind: "answer_selected" | "target_interacted" | "action_performed";
    let payload: Record<string, string>;
    if (prompt.module_kind === "mcq") {
      kind = "answer_selected";
      payload = { item_id: prompt.step_id, option_id: choiceId };
    } else if (prompt.module_kind === "iq") {
      kind = "target_interacted";
      payload = { item_id: prompt.step_id, target_id: choiceId };
    } else {
      kind = "action_performed";
      payload = { situation_id: prompt.step_id, action_id: choiceId };
    }
    const seq = this.nextSeq;
    const event = { seq, kind, payload, timestamp_s: this.clientElapsed() };

    this.inflight = true;
    this.state.inputEnabled = false;
    this.countdown.stop();
    this.notify();
    let response: EventResponse;
    try {
      response = await this.api.submitEvent(this.state.sessionId!, event);
    } catch (error) {
      this.inflight = false;
      if (error instanceof ApiError) {
        this.state.error = { code: error.code, message: error.message };
        this.notify();
        if (RECOVERABLE_CODES.has(error.code)) {
          await this.recoverFromSnapshot();
          return;
        }
        if (error.code === "connection-failed") {
          this.state.phase = "connection-error";
          this.notify();
          return;
        }
      }
      throw error;
    }
    this.inflight = false;
    this.sentSeqs.push(seq);
    await this.applyEventResponse(response);
  }

  private async applyEventResponse(response: EventResponse): Promise<void> {
    this.syncClock(response.server_elapsed_s);
    this.nextSeq = response.next_seq;
    const result = response.outcome.step_result;
    if (result) {
      this.recordResult(result.module_kind, result.correct, result.item_ref, result.chosen_id, result.position_matched);
    }
    const adaptation = response.outcome.adaptation;
    if (adaptation) {
      this.state.adaptationNotice = adaptation.to < adaptation.from ? "guidance added" : "challenge increased";
      this.state.difficulty = adaptation.to;
    } else {
      this.state.adaptationNotice = null;
    }
    if (response.outcome.session_finished) {
      await this.showReport();
      return;
    }
    // per-step feedback renders before the next prompt; advance() moves on
    this.state.phase = "feedback";
    this.pendingPrompt = response.next_prompt;
    this.notify();
  }

  private pendingPrompt: Prompt | null = null;

  /** Called by the view once the correct/incorrect flash has been shown. */
  advance(): void {
    if (this.state.phase !== "feedback") {
      return;
    }
    const prompt = this.pendingPrompt;
    this.pendingPrompt = null;
    if (prompt) {
      this.showPrompt(prompt);
    }
  }

  private recordResult(
    kind: ModuleKind,
    correct: boolean,
    stepId: string,
    chosenId: string | null,
    positionMatched?: 0 | 1,
  ): void {
    const tally = this.state.tallies[kind] ?? { attempted: 0, correct: 0 };
    tally.attempted += 1;
    if (correct) {
      tally.correct += 1;
    }
    this.state.tallies[kind] = tally;
    if (kind === "live" && positionMatched !== undefined) {
      this.state.deltaStrip.push({ situationId: stepId, matched: positionMatched === 1 });
    }
    this.state.feedback = { stepId, chosenId, correct, timedOut: chosenId === null };
  }

  private async showReport(): Promise<void> {
    // the report renders the metrics endpoint's payload verbatim
    const metrics = await this.api.getMetrics(this.state.sessionId!);
    this.countdown.stop();
    this.state.report = metrics;
    this.state.prompt = null;
    this.state.difficulty = metrics.final_difficulty;
    this.state.phase = "report";
    this.state.inputEnabled = false;
    this.notify();
  }

  /** Countdown hit zero: timeout authority is the server's, so freeze input
   * and poll until its StepTimedOut lands (or the session ends). */
  private async onCountdownExpired(): Promise<void> {
    if (this.state.phase !== "prompt") {
      return;
    }
    const expiredPrompt = this.state.prompt!;
    this.state.inputEnabled = false;
    this.state.phase = "waiting-server";
    this.state.countdownRemaining = 0;
    this.notify();
    for (;;) {
      let snapshot: Snapshot;
      try {
        snapshot = await this.api.getSession(this.state.sessionId!);
      } catch (error) {
        if (error instanceof ApiError && error.code === "connection-failed") {
          this.state.phase = "connection-error";
          this.state.error = { code: error.code, message: error.message };
          this.notify();
          return;
        }
        throw error;
      }
      if (snapshot.next_seq !== this.nextSeq || snapshot.phase === "ended") {
        this.markTimedOut(expiredPrompt);
        this.adoptSnapshot(snapshot, { flashFeedback: true });
        return;
      }
      await this.sleep(this.pollIntervalMs);
    }
  }

  private markTimedOut(prompt: Prompt): void {
    // a timed-out step is incomplete: it counts as attempted, never correct,
    // and a live step's position contributes a mismatch by protocol
    this.recordResult(
      prompt.module_kind,
      false,
      prompt.step_id,
      null,
      prompt.module_kind === "live" ? 0 : undefined,
    );
  }

  /** Resync seq, difficulty, tallies, and the open prompt from the service. */
  private async recoverFromSnapshot(): Promise<void> {
    const snapshot = await this.api.getSession(this.state.sessionId!);
    this.adoptSnapshot(snapshot);
  }

  private adoptSnapshot(snapshot: Snapshot, options: { flashFeedback?: boolean } = {}): void {
    this.syncClock(snapshot.server_elapsed_s);
    this.nextSeq = snapshot.next_seq;
    this.state.difficulty = snapshot.difficulty;
    for (const tally of snapshot.tallies) {
      this.state.tallies[tally.module_kind] = { attempted: tally.attempted, correct: tally.correct };
    }
    if (snapshot.phase === "ended" || snapshot.metrics_available) {
      void this.showReport();
      return;
    }
    if (snapshot.prompt) {
      if (options.flashFeedback) {
        this.state.phase = "feedback";
        this.pendingPrompt = snapshot.prompt;
        this.notify();
      } else {
        this.showPrompt(snapshot.prompt);
      }
    }
  }
}
