"""Synthetic trainees.

A profile drives a real session through the engine (never bypassing its
protocol): answers are correct with probability ``answer_accuracy``, live
situations are executed in the ground-truth order after seeded adjacent
transpositions (each position swaps forward with probability
``1 - sequencing_fidelity``), and per-step latencies come from a truncated
normal clipped to (0, time limit]; a draw at or above the limit becomes a
timeout. Everything is deterministic per (profile, scenario, seed).

Profile files are JSON; see ``docs/simulator.md``.
"""

from __future__ import annotations

import json
import random
import uuid
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

from . import engine as engine_mod
from .core import EventKind, ModuleKind, Scenario, SessionEvent
from .engine import EngineConfig, Prompt, Session, SessionMode
from .errors import DomainError
from .report import CohortReport, build_report
from .store import EventStore, TraceBundle

__all__ = ["LatencyModel", "TraineeProfile", "load_profile", "simulate", "run_cohort"]

_SIM_NAMESPACE = uuid.UUID("8f41be4e-20ce-4d8c-9e8f-3f3a2d2ab1aa")

_MIN_LATENCY_S = 0.05


@dataclass(frozen=True)
class LatencyModel:
    mean_s: float
    std_s: float = 0.0

    def __post_init__(self):
        if self.mean_s <= 0:
            raise DomainError("invalid-latency", "latency mean must be positive")
        if self.std_s < 0:
            raise DomainError("invalid-latency", "latency std must be >= 0")


_DEFAULT_LATENCY = {
    ModuleKind.MCQ: LatencyModel(12.0, 4.0),
    ModuleKind.IQ: LatencyModel(20.0, 8.0),
    ModuleKind.LIVE: LatencyModel(15.0, 6.0),
}


@dataclass(frozen=True)
class TraineeProfile:
    """Stand-in for a human trainee; probabilities are per-step."""

    name: str
    answer_accuracy: float
    sequencing_fidelity: float
    latency: dict[ModuleKind, LatencyModel] = field(default_factory=dict)
    seed: Optional[int] = None

    def __post_init__(self):
        if not self.name:
            raise DomainError("empty-id", "profile name must be non-empty")
        if not 0.0 <= self.answer_accuracy <= 1.0:
            raise DomainError("invalid-probability", "answer_accuracy must lie in [0,1]")
        if not 0.0 <= self.sequencing_fidelity <= 1.0:
            raise DomainError("invalid-probability", "sequencing_fidelity must lie in [0,1]")

    def latency_for(self, kind: ModuleKind) -> LatencyModel:
        return self.latency.get(kind, _DEFAULT_LATENCY[kind])


def load_profile(text: str) -> TraineeProfile:
    """Parse a profile definition file (JSON)."""
    raw = json.loads(text)
    latency = {
        ModuleKind(kind): LatencyModel(mean_s=float(spec["mean_s"]), std_s=float(spec.get("std_s", 0.0)))
        for kind, spec in raw.get("latency", {}).items()
    }
    return TraineeProfile(
        name=raw["name"],
        answer_accuracy=float(raw["answer_accuracy"]),
        sequencing_fidelity=float(raw["sequencing_fidelity"]),
        latency=latency,
        seed=raw.get("seed"),
    )


def _transposed_order(ids: Sequence[str], fidelity: float, rng: random.Random) -> list[str]:
    order = list(ids)
    for i in range(len(order) - 1):
        if rng.random() >= fidelity:
            order[i], order[i + 1] = order[i + 1], order[i]
    return order


def _draw_latency(
    model: LatencyModel, limit_s: float, accuracy: float, rng: random.Random
) -> tuple[float, bool]:
    """Clipped normal draw; over-limit draws may become timeouts.

    A draw at or beyond the limit times out with probability (1 - accuracy);
    otherwise the trainee answers exactly at the buzzer. A flawless profile
    therefore never times out, which keeps the perfect-trainee guarantees
    independent of the scenario's time limits.
    """
    raw = rng.gauss(model.mean_s, model.std_s)
    if raw >= limit_s:
        timed_out = rng.random() < 1.0 - accuracy
        return limit_s, timed_out
    return min(max(raw, _MIN_LATENCY_S), limit_s), False


class _Trainee:
    """Event-producing driver for one simulated session."""

    def __init__(self, profile: TraineeProfile, session: Session, rng: random.Random):
        self.profile = profile
        self.session = session
        self.rng = rng
        self.clock = 0.0
        self.live_plans: dict[int, list[str]] = {}

    def _emit(self, kind: EventKind, payload: dict[str, Any]) -> None:
        event = SessionEvent(
            session_id=self.session.session_id,
            seq=self.session.next_seq,
            timestamp_s=self.clock,
            kind=kind,
            payload=payload,
        )
        self.session.submit_event(event)

    def _live_plan(self, prompt: Prompt) -> list[str]:
        if prompt.module_index not in self.live_plans:
            module = self.session.scenario.modules[prompt.module_index]
            ids = [s.id for s in module.situations]
            self.live_plans[prompt.module_index] = _transposed_order(
                ids, self.profile.sequencing_fidelity, self.rng
            )
        return self.live_plans[prompt.module_index]

    def _choose_option(self, prompt: Prompt) -> str:
        module = self.session.scenario.modules[prompt.module_index]
        if prompt.module_kind is ModuleKind.MCQ:
            item = module.items[prompt.step_index]
            correct = {item.correct_option_id}
        else:
            item = module.items[prompt.step_index]
            correct = set(item.correct_target_ids)
        presented = [o.id for o in prompt.presented_options]
        right = [o for o in presented if o in correct]
        wrong = [o for o in presented if o not in correct]
        if not wrong or self.rng.random() < self.profile.answer_accuracy:
            return self.rng.choice(right)
        return self.rng.choice(wrong)

    def _perform_live(self, prompt: Prompt) -> dict[str, Any]:
        plan = self._live_plan(prompt)
        situation_id = plan.pop(0)
        module = self.session.scenario.modules[prompt.module_index]
        situation = next(s for s in module.situations if s.id == situation_id)
        wrong = [a.id for a in situation.action_options if a.id != situation.correct_action_id]
        if not wrong or self.rng.random() < self.profile.answer_accuracy:
            action = situation.correct_action_id
        else:
            action = self.rng.choice(wrong)
        return {"situation_id": situation_id, "action_id": action}

    def run(self) -> None:
        self._emit(
            EventKind.SESSION_STARTED,
            engine_mod.start_payload(self.session.scenario, self.session.seed),
        )
        while not self.session.finished_steps:
            prompt = self.session.next_prompt()
            self._emit(EventKind.PROMPT_SHOWN, prompt.payload())
            if prompt.hint is not None:
                self._emit(EventKind.HINT_SHOWN, {"step_id": prompt.step_id})
            model = self.profile.latency_for(prompt.module_kind)
            latency, timed_out = _draw_latency(
                model, prompt.time_limit_s, self.profile.answer_accuracy, self.rng
            )
            self.clock += latency
            if timed_out:
                if prompt.module_kind is ModuleKind.LIVE:
                    # the prompted situation's window has passed; drop it from the plan
                    plan = self._live_plan(prompt)
                    if prompt.step_id in plan:
                        plan.remove(prompt.step_id)
                self._emit(EventKind.STEP_TIMED_OUT, {"step_id": prompt.step_id})
            elif prompt.module_kind is ModuleKind.MCQ:
                self._emit(
                    EventKind.ANSWER_SELECTED,
                    {"item_id": prompt.step_id, "option_id": self._choose_option(prompt)},
                )
            elif prompt.module_kind is ModuleKind.IQ:
                self._emit(
                    EventKind.TARGET_INTERACTED,
                    {"item_id": prompt.step_id, "target_id": self._choose_option(prompt)},
                )
            else:
                self._emit(EventKind.ACTION_PERFORMED, self._perform_live(prompt))
        self._emit(EventKind.SESSION_ENDED, {})


def simulate(
    profile: TraineeProfile,
    scenario: Scenario,
    seed: Optional[int] = None,
    config: Optional[EngineConfig] = None,
    store: Optional[EventStore] = None,
) -> TraceBundle:
    """Run one synthetic session through the real engine and bundle its trace."""
    if seed is None:
        seed = profile.seed
    if seed is None:
        raise DomainError("missing-seed", "simulate needs a seed (argument or profile)")
    session_id = str(uuid.uuid5(_SIM_NAMESPACE, f"{profile.name}:{scenario.id}:v{scenario.version}:{seed}"))
    session = Session(
        scenario,
        seed,
        mode=SessionMode.REPLAY,
        config=config,
        session_id=session_id,
    )
    rng = random.Random(f"sim:{profile.name}:{seed}")
    _Trainee(profile, session, rng).run()
    metrics = session.finalize()
    bundle = TraceBundle(
        scenario_id=scenario.id,
        scenario_version=scenario.version,
        session_id=session.session_id,
        seed=seed,
        events=tuple(session.events),
        metrics=metrics,
    )
    if store is not None:
        store.put_scenario(scenario)
        store.save_bundle(bundle)
    return bundle


def run_cohort(
    profiles: Sequence[TraineeProfile],
    scenario: Scenario,
    n_per_profile: int,
    seed: int,
    store: EventStore,
    mu0: float = 0.5,
    config: Optional[EngineConfig] = None,
) -> CohortReport:
    """Simulate, persist, and report a cohort of synthetic sessions."""
    if n_per_profile < 1:
        raise DomainError("invalid-count", "n_per_profile must be >= 1")
    if not profiles:
        raise DomainError("invalid-count", "need at least one profile")
    master = random.Random(f"cohort:{seed}")
    for profile in profiles:
        for _ in range(n_per_profile):
            child_seed = master.getrandbits(63)
            simulate(profile, scenario, child_seed, config=config, store=store)
    return build_report(store, scenario_id=scenario.id, mu0=mu0, config=config)
