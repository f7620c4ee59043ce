import { ApiClient } from "./api.js";
import { SessionController } from "./controller.js";
import { render } from "./views.js";

const FEEDBACK_FLASH_MS = 900;

async function boot(): Promise<void> {
  const root = document.querySelector<HTMLElement>("#app");
  const picker = document.querySelector<HTMLElement>("#scenario-picker");
  if (!root || !picker) {
    throw new Error("missing #app or #scenario-picker");
  }

  const api = new ApiClient("");
  let lastScenario: string | null = null;

  const controller = new SessionController(api, {
    onChange: (state) => {
      render(root, state, {
        onAnswer: (choiceId) => void controller.answer(choiceId),
        onRetry: () => {
          if (lastScenario) {
            void controller.start(lastScenario);
          }
        },
        onAdvance: () => controller.advance(),
      });
      if (state.phase === "feedback") {
        // auto-advance after the flash; the button remains as a fast path
        setTimeout(() => controller.advance(), FEEDBACK_FLASH_MS);
      }
    },
  });

  try {
    const listing = await api.listScenarios();
    if (listing.scenarios.length === 0) {
      picker.innerHTML = '<p class="muted">No scenarios uploaded yet.</p>';
      return;
    }
    picker.innerHTML = listing.scenarios
      .map(
        (scenario) =>
          `<button class="scenario" data-id="${scenario.scenario_id}">
             ${scenario.scenario_id} (v${Math.max(...scenario.versions)})
           </button>`,
      )
      .join("");
    for (const button of picker.querySelectorAll<HTMLButtonElement>("button.scenario")) {
      button.addEventListener("click", () => {
        lastScenario = button.dataset.id!;
        picker.innerHTML = "";
        void controller.start(lastScenario);
      });
    }
  } catch {
    picker.innerHTML = `<div class="error-banner">
      <p>Cannot reach the session service.</p><button data-retry-boot>Retry</button>
    </div>`;
    picker.querySelector("[data-retry-boot]")?.addEventListener("click", () => void boot());
  }
}

void boot();
