import { describe, expect, it } from "vitest";

import { SessionApi } from "../src/api.js";
import { SessionController } from "../src/controller.js";
import {
  ApiError,
  EventResponse,
  OutgoingEvent,
  Prompt,
  ScenarioListing,
  SessionCreated,
  SessionMetrics,
  Snapshot,
} from "../src/types.js";

function makePrompt(
  stepId: string,
  kind: Prompt["module_kind"],
  stepIndex: number,
  overrides: Partial<Prompt> = {},
): Prompt {
  return {
    step_id: stepId,
    module_kind: kind,
    module_index: kind === "mcq" ? 0 : 1,
    step_index: stepIndex,
    text: `prompt ${stepId}`,
    options: [
      { id: `${stepId}-right`, label: "right" },
      { id: `${stepId}-wrong`, label: "wrong" },
    ],
    time_limit_s: 30,
    difficulty: 2,
    hint: null,
    prompt_timestamp_s: 0,
    ...overrides,
  };
}

const METRICS: SessionMetrics = {
  session_id: "fake-session",
  per_subtask: [
    {
      module_kind: "mcq",
      module_index: 0,
      completion_rate: 1.0,
      avg_task_time_s: 4.0,
      success_rate: 0.5,
      weighted_score: 1.0,
    },
    {
      module_kind: "live",
      module_index: 1,
      completion_rate: 1.0,
      avg_task_time_s: 5.0,
      success_rate: 1.0,
      weighted_score: 2.0,
      order_accuracy_x: 0.5,
      action_correctness_y: 1.0,
      vrtss: 0.7036,
    },
  ],
  engagement_frequency: 0.1,
  total_duration_s: 40.0,
  final_difficulty: 2,
};

interface ScriptStep {
  prompt: Prompt;
  correct: boolean;
  positionMatched?: 0 | 1;
  adaptation?: { from: 1 | 2 | 3; to: 1 | 2 | 3 };
}

/** Deterministic stand-in for the service with real seq bookkeeping. */
class FakeApi implements SessionApi {
  submitted: OutgoingEvent[] = [];
  prescribedSeqs: number[] = [];
  serverSeq = 0;
  private stepIndex = 0;
  failNextWith: ApiError | null = null;
  snapshotOverride: Snapshot | null = null;

  constructor(private readonly script: ScriptStep[]) {}

  private emitServerEvents(count: number): void {
    this.serverSeq += count;
  }

  async listScenarios(): Promise<ScenarioListing> {
    return { scenarios: [{ scenario_id: "fake", versions: [1] }] };
  }

  async createSession(): Promise<SessionCreated> {
    this.emitServerEvents(2); // SessionStarted + PromptShown
    this.prescribedSeqs.push(this.serverSeq);
    return {
      session_id: "fake-session",
      scenario_id: "fake",
      scenario_version: 1,
      seed: 1234,
      next_seq: this.serverSeq,
      prompt: this.script[0].prompt,
      server_elapsed_s: 0.0,
    };
  }

  async submitEvent(_sessionId: string, event: OutgoingEvent): Promise<EventResponse> {
    if (this.failNextWith) {
      const error = this.failNextWith;
      this.failNextWith = null;
      throw error;
    }
    expect(event.seq).toBe(this.serverSeq);
    this.submitted.push(event);
    this.serverSeq += 1;
    const step = this.script[this.stepIndex];
    this.stepIndex += 1;
    const finished = this.stepIndex >= this.script.length;
    const next = finished ? null : this.script[this.stepIndex].prompt;
    if (!finished) {
      this.emitServerEvents(1); // next PromptShown
      this.prescribedSeqs.push(this.serverSeq);
    } else {
      this.emitServerEvents(1); // SessionEnded
    }
    return {
      outcome: {
        step_result: {
          item_ref: step.prompt.step_id,
          module_kind: step.prompt.module_kind,
          completed: 1,
          correct: step.correct,
          duration_s: event.timestamp_s,
          difficulty_at_step: step.prompt.difficulty,
          chosen_id: Object.values(event.payload)[1],
          ...(step.prompt.module_kind === "live" ? { position_matched: step.positionMatched ?? 1 } : {}),
        },
        adaptation: step.adaptation ?? null,
        session_finished: finished,
      },
      next_seq: this.serverSeq,
      next_prompt: next,
      metrics: finished ? METRICS : null,
      server_elapsed_s: event.timestamp_s,
    };
  }

  async getSession(): Promise<Snapshot> {
    if (this.snapshotOverride) {
      return this.snapshotOverride;
    }
    return {
      session_id: "fake-session",
      scenario_id: "fake",
      scenario_version: 1,
      seed: 1234,
      phase: "awaiting-answer",
      difficulty: this.script[this.stepIndex].prompt.difficulty,
      next_seq: this.serverSeq,
      prompt: this.script[this.stepIndex].prompt,
      tallies: [],
      metrics_available: false,
      server_elapsed_s: 1.0,
    };
  }

  async getMetrics(): Promise<SessionMetrics> {
    return METRICS;
  }
}

const SCRIPT: ScriptStep[] = [
  { prompt: makePrompt("m0", "mcq", 0), correct: true },
  { prompt: makePrompt("m1", "mcq", 1), correct: false, adaptation: { from: 2, to: 1 } },
  { prompt: makePrompt("s0", "live", 0, { difficulty: 1 }), correct: true, positionMatched: 1 },
  { prompt: makePrompt("s1", "live", 1, { difficulty: 1 }), correct: true, positionMatched: 0 },
];

async function playThrough(api: FakeApi): Promise<SessionController> {
  const controller = new SessionController(api);
  await controller.start("fake");
  while (controller.state.phase === "prompt" || controller.state.phase === "feedback") {
    if (controller.state.phase === "feedback") {
      controller.advance();
      continue;
    }
    await controller.answer(controller.state.prompt!.options[0].id);
  }
  return controller;
}

describe("SessionController", () => {
  it("starts a session and shows the first prompt", async () => {
    const controller = new SessionController(new FakeApi(SCRIPT));
    await controller.start("fake");
    expect(controller.state.phase).toBe("prompt");
    expect(controller.state.seed).toBe(1234);
    expect(controller.state.prompt?.step_id).toBe("m0");
    expect(controller.state.inputEnabled).toBe(true);
  });

  it("emits gapless, monotone seqs matching the service's prescription", async () => {
    const api = new FakeApi(SCRIPT);
    const controller = await playThrough(api);
    expect(controller.sentSeqs).toEqual(api.prescribedSeqs);
    for (let i = 1; i < controller.sentSeqs.length; i++) {
      expect(controller.sentSeqs[i]).toBeGreaterThan(controller.sentSeqs[i - 1]);
    }
    expect(controller.state.phase).toBe("report");
  });

  it("shows feedback before advancing to the next prompt", async () => {
    const api = new FakeApi(SCRIPT);
    const controller = new SessionController(api);
    await controller.start("fake");
    await controller.answer(controller.state.prompt!.options[0].id);
    expect(controller.state.phase).toBe("feedback");
    expect(controller.state.feedback).toEqual({
      stepId: "m0",
      chosenId: "m0-right",
      correct: true,
      timedOut: false,
    });
    controller.advance();
    expect(controller.state.phase).toBe("prompt");
    expect(controller.state.prompt?.step_id).toBe("m1");
  });

  it("tallies results and collects the live delta strip from service outcomes", async () => {
    const controller = await playThrough(new FakeApi(SCRIPT));
    expect(controller.state.tallies.mcq).toEqual({ attempted: 2, correct: 1 });
    expect(controller.state.tallies.live).toEqual({ attempted: 2, correct: 2 });
    expect(controller.state.deltaStrip).toEqual([
      { situationId: "s0", matched: true },
      { situationId: "s1", matched: false },
    ]);
  });

  it("announces difficulty changes with the adaptation notice", async () => {
    const api = new FakeApi(SCRIPT);
    const controller = new SessionController(api);
    await controller.start("fake");
    await controller.answer(controller.state.prompt!.options[0].id); // m0
    controller.advance();
    await controller.answer(controller.state.prompt!.options[0].id); // m1, adapts 2 -> 1
    expect(controller.state.adaptationNotice).toBe("guidance added");
    expect(controller.state.difficulty).toBe(1);
  });

  it("renders the report straight from the metrics payload", async () => {
    const controller = await playThrough(new FakeApi(SCRIPT));
    expect(controller.state.report).toEqual(METRICS);
    expect(controller.state.report?.per_subtask[1].vrtss).toBe(0.7036);
  });

  it("surfaces connection failures with a retryable error state", async () => {
    const api = new FakeApi(SCRIPT);
    api.createSession = async () => {
      throw new ApiError(0, "connection-failed", "no route to host");
    };
    const controller = new SessionController(api);
    await controller.start("fake");
    expect(controller.state.phase).toBe("connection-error");
    expect(controller.state.error?.code).toBe("connection-failed");
  });

  it("recovers from a stale seq by refetching session state", async () => {
    const api = new FakeApi(SCRIPT);
    const controller = new SessionController(api);
    await controller.start("fake");
    api.failNextWith = new ApiError(409, "sequence-gap", "events must arrive with consecutive seq", 99);
    await controller.answer(controller.state.prompt!.options[0].id);
    expect(controller.state.error?.code).toBe("sequence-gap");
    expect(controller.state.phase).toBe("prompt"); // snapshot re-adopted
    await controller.answer(controller.state.prompt!.options[0].id); // works after resync
    expect(api.submitted.length).toBe(1);
  });

  it("ignores double submissions while a request is in flight", async () => {
    const api = new FakeApi(SCRIPT);
    const controller = new SessionController(api);
    await controller.start("fake");
    const first = controller.answer(controller.state.prompt!.options[0].id);
    const second = controller.answer(controller.state.prompt!.options[1].id);
    await Promise.all([first, second]);
    expect(api.submitted.length).toBe(1);
  });

  it("freezes input on countdown expiry until the server's timeout arrives", async () => {
    const script: ScriptStep[] = [
      { prompt: makePrompt("m0", "mcq", 0, { time_limit_s: 0.05 }), correct: true },
      { prompt: makePrompt("m1", "mcq", 1), correct: true },
    ];
    const api = new FakeApi(script);
    const controller = new SessionController(api, { pollIntervalMs: 10 });
    await controller.start("fake");

    // while the server hasn't advanced, the client just waits with input off
    const waitingSnapshot: Snapshot = {
      session_id: "fake-session",
      scenario_id: "fake",
      scenario_version: 1,
      seed: 1234,
      phase: "awaiting-answer",
      difficulty: 2,
      next_seq: api.serverSeq,
      prompt: script[0].prompt,
      tallies: [],
      metrics_available: false,
      server_elapsed_s: 0.1,
    };
    api.snapshotOverride = waitingSnapshot;
    await new Promise((resolve) => setTimeout(resolve, 150));
    expect(controller.state.phase).toBe("waiting-server");
    expect(controller.state.inputEnabled).toBe(false);
    expect(controller.state.countdownRemaining).toBe(0);

    // the server registers the timeout (seq advances) and shows the next step
    api.snapshotOverride = {
      ...waitingSnapshot,
      next_seq: api.serverSeq + 2,
      prompt: script[1].prompt,
      tallies: [{ module_kind: "mcq", attempted: 1, correct: 0 }],
      server_elapsed_s: 0.2,
    };
    await new Promise((resolve) => setTimeout(resolve, 100));
    expect(controller.state.phase).toBe("feedback");
    expect(controller.state.feedback?.timedOut).toBe(true);
    expect(controller.state.tallies.mcq).toEqual({ attempted: 1, correct: 0 });
    controller.advance();
    expect(controller.state.phase).toBe("prompt");
    expect(controller.state.prompt?.step_id).toBe("m1");
  });
});
