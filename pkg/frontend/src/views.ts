import { ViewState } from "./controller.js";
import { SessionMetrics, SubtaskMetrics } from "./types.js";

const KIND_LABELS: Record<string, string> = {
  mcq: "Multiple choice",
  iq: "Interactive",
  live: "Live scenario",
};

const DIFFICULTY_LABELS: Record<number, string> = {
  1: "assisted",
  2: "standard",
  3: "challenge",
};

export interface Handlers {
  onAnswer: (choiceId: string) => void;
  onRetry: () => void;
  onAdvance: () => void;
}

function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

function talliesHtml(state: ViewState): string {
  const rows = Object.entries(state.tallies)
    .map(
      ([kind, tally]) =>
        `<span class="tally"><b>${KIND_LABELS[kind] ?? kind}</b> ${tally.correct}/${tally.attempted}</span>`,
    )
    .join(" ");
  return rows || '<span class="tally muted">no answers yet</span>';
}

function headerHtml(state: ViewState): string {
  const difficulty = `<span class="badge level-${state.difficulty}">${DIFFICULTY_LABELS[state.difficulty]}</span>`;
  const notice = state.adaptationNotice
    ? `<span class="adaptation">${escapeHtml(state.adaptationNotice)}</span>`
    : "";
  return `<header>
    <div class="score-strip">${talliesHtml(state)}</div>
    <div class="session-meta">${difficulty}${notice}</div>
  </header>`;
}

function promptHtml(state: ViewState): string {
  const prompt = state.prompt!;
  const options = prompt.options
    .map(
      (option) =>
        `<button class="option" data-choice="${escapeHtml(option.id)}" ${state.inputEnabled ? "" : "disabled"}>
          ${escapeHtml(option.label)}
        </button>`,
    )
    .join("");
  const hint = prompt.hint ? `<p class="hint">Hint: ${escapeHtml(prompt.hint)}</p>` : "";
  const seconds = state.countdownRemaining;
  return `<section class="prompt-card" data-kind="${prompt.module_kind}">
    <p class="kind-label">${KIND_LABELS[prompt.module_kind]}</p>
    <h2>${escapeHtml(prompt.text)}</h2>
    ${hint}
    <div class="options">${options}</div>
    <div class="countdown ${seconds < 5 ? "urgent" : ""}">
      <div class="countdown-bar" style="width:${Math.min(100, (seconds / prompt.time_limit_s) * 100)}%"></div>
      <span>${seconds.toFixed(1)}s</span>
    </div>
  </section>`;
}

function feedbackHtml(state: ViewState): string {
  const feedback = state.feedback!;
  const status = feedback.timedOut ? "timeout" : feedback.correct ? "correct" : "incorrect";
  const label = feedback.timedOut ? "Time ran out" : feedback.correct ? "Correct" : "Incorrect";
  return `<section class="feedback ${status}">
    <h2>${label}</h2>
    <button class="advance" data-advance>Continue</button>
  </section>`;
}

function deltaStripHtml(state: ViewState): string {
  if (state.deltaStrip.length === 0) {
    return "";
  }
  const cells = state.deltaStrip
    .map(
      (cell) =>
        `<span class="delta-cell ${cell.matched ? "match" : "mismatch"}" title="${escapeHtml(cell.situationId)}">
          ${cell.matched ? "1" : "0"}
        </span>`,
    )
    .join("");
  return `<div class="delta-strip"><p>Action order (1 = in position)</p>${cells}</div>`;
}

function subtaskRows(metrics: SessionMetrics): string {
  const cell = (subtask: SubtaskMetrics) => `
    <tr>
      <td>${KIND_LABELS[subtask.module_kind]}</td>
      <td>${(subtask.success_rate * 100).toFixed(2)}%</td>
      <td>${(subtask.completion_rate * 100).toFixed(2)}%</td>
      <td>${subtask.avg_task_time_s.toFixed(1)}s</td>
      <td>${subtask.vrtss !== undefined ? subtask.vrtss.toFixed(4) : "—"}</td>
    </tr>`;
  return metrics.per_subtask.map(cell).join("");
}

function reportHtml(state: ViewState): string {
  const metrics = state.report!;
  const live = metrics.per_subtask.find((subtask) => subtask.module_kind === "live");
  const gauge =
    live && live.vrtss !== undefined
      ? `<div class="gauge">
           <div class="gauge-fill" style="width:${(live.vrtss * 100).toFixed(1)}%"></div>
           <span class="gauge-label">VRTSS ${live.vrtss.toFixed(2)}</span>
         </div>`
      : "";
  return `<section class="report">
    <h2>Session report</h2>
    ${gauge}
    ${deltaStripHtml(state)}
    <table>
      <thead><tr><th>Subtask</th><th>Success</th><th>Completed</th><th>Avg time</th><th>VRTSS</th></tr></thead>
      <tbody>${subtaskRows(metrics)}</tbody>
    </table>
    <p class="muted">engagement ${metrics.engagement_frequency.toFixed(3)}/s ·
      duration ${metrics.total_duration_s.toFixed(1)}s ·
      final difficulty ${DIFFICULTY_LABELS[metrics.final_difficulty]}</p>
  </section>`;
}

export function render(root: HTMLElement, state: ViewState, handlers: Handlers): void {
  let body: string;
  switch (state.phase) {
    case "idle":
      body = '<p class="muted">Pick a scenario to begin.</p>';
      break;
    case "connecting":
      body = '<p class="muted">Connecting…</p>';
      break;
    case "connection-error":
      body = `<section class="error-banner">
        <p>Cannot reach the session service${state.error ? ` (${escapeHtml(state.error.code)})` : ""}.</p>
        <button data-retry>Retry</button>
      </section>`;
      break;
    case "prompt":
      body = headerHtml(state) + promptHtml(state);
      break;
    case "feedback":
      body = headerHtml(state) + feedbackHtml(state);
      break;
    case "waiting-server":
      body = headerHtml(state) + '<p class="muted">Time is up — waiting for the server…</p>';
      break;
    case "report":
      body = headerHtml(state) + reportHtml(state);
      break;
  }
  const errorBanner =
    state.error && state.phase !== "connection-error"
      ? `<div class="error-banner small">[${escapeHtml(state.error.code)}] ${escapeHtml(state.error.message)}</div>`
      : "";
  const footer =
    state.seed !== null
      ? `<footer class="muted">session ${escapeHtml(state.sessionId ?? "")} · seed ${state.seed}</footer>`
      : "";
  root.innerHTML = errorBanner + body + footer;

  for (const button of root.querySelectorAll<HTMLButtonElement>("button.option")) {
    button.addEventListener("click", () => handlers.onAnswer(button.dataset.choice!));
  }
  root.querySelector<HTMLButtonElement>("[data-retry]")?.addEventListener("click", handlers.onRetry);
  root.querySelector<HTMLButtonElement>("[data-advance]")?.addEventListener("click", handlers.onAdvance);
}
