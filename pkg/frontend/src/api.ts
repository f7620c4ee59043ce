import {
  ApiError,
  EventResponse,
  OutgoingEvent,
  ScenarioListing,
  SessionCreated,
  SessionMetrics,
  Snapshot,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** What the controller needs from the service; ApiClient is the real one. */
export interface SessionApi {
  listScenarios(): Promise<ScenarioListing>;
  createSession(scenarioId: string, seed?: number): Promise<SessionCreated>;
  getSession(sessionId: string): Promise<Snapshot>;
  submitEvent(sessionId: string, event: OutgoingEvent): Promise<EventResponse>;
  getMetrics(sessionId: string): Promise<SessionMetrics>;
}

/** Thin typed client over the /v1 endpoints; every failure becomes ApiError. */
export class ApiClient implements SessionApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (cause) {
      throw new ApiError(0, "connection-failed", `cannot reach the session service: ${cause}`);
    }
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      const error = body?.error ?? {};
      throw new ApiError(
        response.status,
        error.code ?? "unknown-error",
        error.message ?? `request failed with status ${response.status}`,
        error.seq,
      );
    }
    return body as T;
  }

  listScenarios(): Promise<ScenarioListing> {
    return this.request("/v1/scenarios");
  }

  createSession(scenarioId: string, seed?: number): Promise<SessionCreated> {
    return this.request("/v1/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(seed === undefined ? { scenario_id: scenarioId } : { scenario_id: scenarioId, seed }),
    });
  }

  getSession(sessionId: string): Promise<Snapshot> {
    return this.request(`/v1/sessions/${sessionId}`);
  }

  submitEvent(sessionId: string, event: OutgoingEvent): Promise<EventResponse> {
    return this.request(`/v1/sessions/${sessionId}/events`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(event),
    });
  }

  getMetrics(sessionId: string): Promise<SessionMetrics> {
    return this.request(`/v1/sessions/${sessionId}/metrics`);
  }
}
