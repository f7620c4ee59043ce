"""Deterministic session state machine.

A session consumes a strictly ordered event stream (seq 0, 1, 2, ... with
non-decreasing timestamps), walks the scenario's modules step by step,
applies the difficulty-adaptation policy, and finalizes into metrics. The
engine owns no clock: timestamps arrive on events, so a live run and a
replay of its log are indistinguishable.

Protocol per session:

    SessionStarted
    then per step: PromptShown, [HintShown], terminal event
    finally SessionEnded

where the terminal event is AnswerSelected (MCQ), TargetInteracted (IQ),
ActionPerformed (live) or StepTimedOut (any module). Live modules allow the
performed action to address any situation whose window has not passed, which
is how out-of-order execution enters the order-accuracy metric.
"""

from __future__ import annotations

import random
import uuid
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional, Sequence

from . import scoring
from .core import (
    Difficulty,
    EventKind,
    INTERACTION_EVENT_KINDS,
    IqSet,
    LiveScenarioSpec,
    McqSet,
    ModuleKind,
    ModuleSpec,
    Scenario,
    SessionEvent,
    SessionMetrics,
    StepResult,
    SubtaskMetrics,
)
from .errors import DomainError, ProtocolError

__all__ = [
    "SessionMode",
    "EngineConfig",
    "AdaptationPolicy",
    "PromptOption",
    "Prompt",
    "StepOutcome",
    "Session",
    "create_session",
    "replay",
    "derived_session_id",
]

_SESSION_NAMESPACE = uuid.UUID("6c1f66fa-95b8-4f62-9e54-1db44c5e6b1d")


class SessionMode(str, Enum):
    LIVE = "live"
    REPLAY = "replay"


@dataclass(frozen=True)
class EngineConfig:
    """Adaptation and presentation knobs; defaults follow the shipped policy."""

    window_size: int = 3
    fast_fraction: float = 0.5  # "fast" answer: duration < fraction * time limit
    adapt_scope: str = "live"  # "live" or "all"
    initial_difficulty: Difficulty = Difficulty.CANONICAL
    # presentation time multiplier per difficulty level
    time_multipliers: tuple[float, float, float] = (1.0, 1.0, 0.75)

    def __post_init__(self):
        if self.window_size < 1:
            raise DomainError("invalid-config", "window_size must be >= 1")
        if not 0 < self.fast_fraction <= 1:
            raise DomainError("invalid-config", "fast_fraction must be in (0,1]")
        if self.adapt_scope not in ("live", "all"):
            raise DomainError("invalid-config", "adapt_scope must be 'live' or 'all'")

    def time_multiplier(self, level: Difficulty) -> float:
        return self.time_multipliers[int(level) - 1]


class AdaptationPolicy:
    """Unanimous-window hysteresis policy.

    With a full window of the last K scored steps: all failures drop the
    level by one, all fast successes raise it by one; anything mixed leaves
    it alone. The window clears whenever the level moves, so consecutive
    changes need K fresh steps of evidence.
    """

    def __init__(self, config: EngineConfig):
        self.config = config

    def evaluate(self, window: Sequence[tuple[bool, bool]], level: Difficulty) -> Optional[Difficulty]:
        """window holds (correct, fast) pairs, oldest first."""
        if len(window) < self.config.window_size:
            return None
        if all(not correct for correct, _ in window):
            lowered = max(1, int(level) - 1)
            return Difficulty(lowered) if lowered != int(level) else None
        if all(correct and fast for correct, fast in window):
            raised = min(3, int(level) + 1)
            return Difficulty(raised) if raised != int(level) else None
        return None


@dataclass(frozen=True)
class PromptOption:
    id: str
    label: str


@dataclass(frozen=True)
class Prompt:
    """What a trainee is shown for one step, after difficulty shaping."""

    step_id: str
    module_kind: ModuleKind
    module_index: int
    step_index: int
    text: str
    presented_options: tuple[PromptOption, ...]
    time_limit_s: float
    difficulty: Difficulty
    hint: Optional[str] = None

    def payload(self) -> dict[str, Any]:
        """The self-describing PromptShown payload recorded in event logs."""
        return {
            "step_id": self.step_id,
            "module_kind": self.module_kind.value,
            "module_index": self.module_index,
            "step_index": self.step_index,
            "difficulty": int(self.difficulty),
            "time_limit_s": self.time_limit_s,
            "presented_option_ids": [o.id for o in self.presented_options],
            "has_hint": self.hint is not None,
        }


@dataclass(frozen=True)
class StepOutcome:
    """Result of applying one event; step_result is set on terminal events only."""

    step_result: Optional[StepResult]
    adaptation_applied: Optional[tuple[Difficulty, Difficulty]]
    session_finished: bool


@dataclass
class _Plan:
    """Validated mutations for one event, applied only after all checks pass."""

    event: SessionEvent
    action: str  # start | prompt | hint | terminal | end
    step_result: Optional[StepResult] = None
    window_entry: Optional[tuple[bool, bool]] = None
    new_difficulty: Optional[Difficulty] = None
    consumed_situation: Optional[str] = None
    finished: bool = False


def derived_session_id(scenario: Scenario, seed: int) -> str:
    """Deterministic session id used outside Live mode."""
    return str(uuid.uuid5(_SESSION_NAMESPACE, f"{scenario.id}:v{scenario.version}:{seed}"))


def _module_kind(module: ModuleSpec) -> ModuleKind:
    if isinstance(module, McqSet):
        return ModuleKind.MCQ
    if isinstance(module, IqSet):
        return ModuleKind.IQ
    return ModuleKind.LIVE


class Session:
    """Single-writer session state machine; apply events serially in seq order."""

    def __init__(
        self,
        scenario: Scenario,
        seed: int,
        mode: SessionMode = SessionMode.LIVE,
        config: Optional[EngineConfig] = None,
        session_id: Optional[str] = None,
    ):
        if not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ProtocolError("invalid-seed", "seed must be a 64-bit unsigned integer", seed=seed)
        self.scenario = scenario
        self.seed = seed
        self.mode = SessionMode(mode)
        self.config = config or EngineConfig()
        self.policy = AdaptationPolicy(self.config)
        if session_id is not None:
            self.session_id = session_id
        elif self.mode is SessionMode.LIVE:
            self.session_id = str(uuid.uuid4())
        else:
            self.session_id = derived_session_id(scenario, seed)

        self.difficulty: Difficulty = self.config.initial_difficulty
        self.module_index = 0
        self.step_index = 0
        self.step_results: list[StepResult] = []
        self.events: list[SessionEvent] = []
        self.window: list[tuple[bool, bool]] = []
        self.started = False
        self.ended = False
        self._steps_done = False  # all steps resolved, awaiting SessionEnded
        self._prompt_open = False
        self._hint_shown = False
        self._prompt_shown_ts = 0.0
        # per live module: situations already performed or whose window passed
        self._consumed: dict[int, set[str]] = {}
        self._next_seq = 0
        self._last_ts = 0.0

    # -- read side ----------------------------------------------------------

    @property
    def next_seq(self) -> int:
        return self._next_seq

    @property
    def last_timestamp(self) -> float:
        return self._last_ts

    @property
    def cursor(self) -> tuple[int, int]:
        return (self.module_index, self.step_index)

    @property
    def finished_steps(self) -> bool:
        return self._steps_done

    def phase(self) -> str:
        if self.ended:
            return "ended"
        if not self.started:
            return "awaiting-start"
        if self._steps_done:
            return "awaiting-end"
        return "awaiting-answer" if self._prompt_open else "awaiting-prompt"

    def _current_module(self) -> ModuleSpec:
        return self.scenario.modules[self.module_index]

    def _live_open_situations(self):
        module = self._current_module()
        consumed = self._consumed.get(self.module_index, set())
        return [s for s in module.situations if s.id not in consumed]

    def next_prompt(self) -> Prompt:
        """Deterministic prompt for the current step.

        Pure with respect to session state: querying twice returns the same
        value, and the same (scenario, seed, history) always reproduces it.
        """
        if self.ended:
            raise ProtocolError("session-ended", "session has ended", session_id=self.session_id)
        if not self.started:
            raise ProtocolError("session-not-started", "submit SessionStarted first", session_id=self.session_id)
        if self._steps_done:
            raise ProtocolError("session-complete", "all steps resolved; awaiting SessionEnded", session_id=self.session_id)

        module = self._current_module()
        kind = _module_kind(module)
        if kind is ModuleKind.MCQ:
            item = module.items[self.step_index]
            options = [(o.id, o.text, o.distractor_rank, o.correct) for o in item.options]
            hint = None
            base_limit = item.time_limit_s
        elif kind is ModuleKind.IQ:
            item = module.items[self.step_index]
            options = [
                (t.id, t.label, 0, t.id in item.correct_target_ids) for t in item.targets
            ]
            hint = item.hint
            base_limit = item.time_limit_s
        else:
            item = self._live_open_situations()[0]
            options = [(a.id, a.label, a.distractor_rank, a.id == item.correct_action_id) for a in item.action_options]
            hint = item.hint
            base_limit = item.base_time_limit_s

        presented = self._shape_options(options, item.id)
        level = self.difficulty
        return Prompt(
            step_id=item.id,
            module_kind=kind,
            module_index=self.module_index,
            step_index=self.step_index,
            text=item.prompt,
            presented_options=tuple(presented),
            time_limit_s=base_limit * self.config.time_multiplier(level),
            difficulty=level,
            hint=hint if level is Difficulty.ASSISTED else None,
        )

    def _shape_options(self, options: list[tuple[str, str, int, bool]], step_id: str) -> list[PromptOption]:
        """Difficulty-filter then seed-shuffle (id, label, rank, protected) rows.

        Assisted level drops one distractor (highest rank first, later-listed
        first on ties); correct options are never dropped.
        """
        canonical = len(options)
        target = max(2, canonical - 1) if self.difficulty is Difficulty.ASSISTED else canonical
        kept = list(options)
        droppable = sorted(
            (i for i, o in enumerate(options) if not o[3]),
            key=lambda i: (options[i][2], i),
            reverse=True,
        )
        for i in droppable:
            if len(kept) <= target:
                break
            kept.remove(options[i])
        rng = random.Random(f"{self.seed}:{self.module_index}:{self.step_index}:{step_id}:{int(self.difficulty)}")
        rng.shuffle(kept)
        return [PromptOption(id=o[0], label=o[1]) for o in kept]

    # -- write side ----------------------------------------------------------

    def validate_event(self, event: SessionEvent) -> None:
        """Run every protocol check without changing any state."""
        self._validate(event)

    def submit_event(self, event: SessionEvent) -> StepOutcome:
        """Validate then apply one event. A rejected event changes nothing."""
        plan = self._validate(event)
        return self._apply(plan)

    def _validate(self, event: SessionEvent) -> _Plan:
        if self.ended:
            raise ProtocolError("session-ended", "session has ended", session_id=self.session_id, seq=event.seq)
        if event.session_id != self.session_id:
            raise ProtocolError(
                "session-mismatch", "event belongs to a different session",
                expected=self.session_id, got=event.session_id, seq=event.seq,
            )
        if event.seq != self._next_seq:
            raise ProtocolError("sequence-gap", "events must arrive with consecutive seq", expected=self._next_seq, seq=event.seq)
        if event.timestamp_s < self._last_ts:
            raise ProtocolError("time-regression", "timestamps must be non-decreasing", seq=event.seq, timestamp=event.timestamp_s, last=self._last_ts)

        if not self.started:
            if event.kind is not EventKind.SESSION_STARTED:
                raise ProtocolError("protocol-violation", "first event must be SessionStarted", seq=event.seq, kind=event.kind.value)
            if event.timestamp_s != 0.0:
                raise ProtocolError("invalid-timestamp", "SessionStarted must carry timestamp 0", seq=event.seq)
            payload = event.payload
            if payload.get("scenario_id") != self.scenario.id or payload.get("scenario_version") != self.scenario.version:
                raise ProtocolError(
                    "scenario-mismatch", "event log was recorded against a different scenario",
                    expected=f"{self.scenario.id}:v{self.scenario.version}",
                    got=f"{payload.get('scenario_id')}:v{payload.get('scenario_version')}", seq=event.seq,
                )
            if payload.get("seed") != self.seed:
                raise ProtocolError("seed-mismatch", "event log was recorded under a different seed", expected=self.seed, got=payload.get("seed"), seq=event.seq)
            return _Plan(event=event, action="start")

        if event.kind is EventKind.SESSION_STARTED:
            raise ProtocolError("protocol-violation", "session already started", seq=event.seq)

        if self._steps_done:
            if event.kind is not EventKind.SESSION_ENDED:
                raise ProtocolError("protocol-violation", "all steps resolved; only SessionEnded is allowed", seq=event.seq, kind=event.kind.value)
            return _Plan(event=event, action="end")

        if event.kind is EventKind.SESSION_ENDED:
            raise ProtocolError("protocol-violation", "session still has unresolved steps", seq=event.seq)

        if not self._prompt_open:
            if event.kind is not EventKind.PROMPT_SHOWN:
                raise ProtocolError("protocol-violation", "expected PromptShown for the current step", seq=event.seq, kind=event.kind.value)
            expected = self.next_prompt().payload()
            if event.payload != expected:
                raise ProtocolError(
                    "prompt-divergence",
                    "recorded prompt does not match the engine's deterministic prompt",
                    seq=event.seq, expected=expected, got=event.payload,
                )
            return _Plan(event=event, action="prompt")

        prompt = self.next_prompt()
        if event.kind is EventKind.HINT_SHOWN:
            if prompt.hint is None:
                raise ProtocolError("protocol-violation", "current step has no hint to show", seq=event.seq)
            if self._hint_shown:
                raise ProtocolError("protocol-violation", "hint already shown for this step", seq=event.seq)
            if event.payload.get("step_id") != prompt.step_id:
                raise ProtocolError("protocol-violation", "hint addresses a different step", seq=event.seq)
            return _Plan(event=event, action="hint")

        return self._validate_terminal(event, prompt)

    def _validate_terminal(self, event: SessionEvent, prompt: Prompt) -> _Plan:
        kind = prompt.module_kind
        expected_terminal = {
            ModuleKind.MCQ: EventKind.ANSWER_SELECTED,
            ModuleKind.IQ: EventKind.TARGET_INTERACTED,
            ModuleKind.LIVE: EventKind.ACTION_PERFORMED,
        }[kind]
        if event.kind not in (expected_terminal, EventKind.STEP_TIMED_OUT):
            raise ProtocolError(
                "protocol-violation", f"step takes {expected_terminal.value} or {EventKind.STEP_TIMED_OUT.value}",
                seq=event.seq, kind=event.kind.value,
            )

        duration = event.timestamp_s - self._prompt_shown_ts
        consumed_situation: Optional[str] = None

        completed = scoring.task_completion(event.kind)

        if event.kind is EventKind.STEP_TIMED_OUT:
            if event.payload.get("step_id") != prompt.step_id:
                raise ProtocolError("protocol-violation", "timeout addresses a different step", seq=event.seq)
            result = StepResult(
                item_ref=prompt.step_id,
                module_kind=kind,
                completed=completed,
                correct=False,
                duration_s=duration,
                difficulty_at_step=prompt.difficulty,
                chosen_id=None,
                position_matched=0 if kind is ModuleKind.LIVE else None,
            )
            if kind is ModuleKind.LIVE:
                consumed_situation = prompt.step_id  # its window has passed
        elif kind is ModuleKind.MCQ:
            item = self._current_module().items[self.step_index]
            if event.payload.get("item_id") != item.id:
                raise ProtocolError("protocol-violation", "answer addresses a different item", seq=event.seq, expected=item.id)
            chosen = event.payload.get("option_id")
            if chosen not in {o.id for o in prompt.presented_options}:
                raise ProtocolError("option-not-presented", "chosen option was not presented", seq=event.seq, option=chosen)
            result = StepResult(
                item_ref=item.id,
                module_kind=kind,
                completed=completed,
                correct=chosen == item.correct_option_id,
                duration_s=duration,
                difficulty_at_step=prompt.difficulty,
                chosen_id=chosen,
            )
        elif kind is ModuleKind.IQ:
            item = self._current_module().items[self.step_index]
            if event.payload.get("item_id") != item.id:
                raise ProtocolError("protocol-violation", "interaction addresses a different item", seq=event.seq, expected=item.id)
            chosen = event.payload.get("target_id")
            if chosen not in {o.id for o in prompt.presented_options}:
                raise ProtocolError("option-not-presented", "chosen target was not presented", seq=event.seq, target=chosen)
            result = StepResult(
                item_ref=item.id,
                module_kind=kind,
                completed=completed,
                correct=chosen in item.correct_target_ids,
                duration_s=duration,
                difficulty_at_step=prompt.difficulty,
                chosen_id=chosen,
            )
        else:
            module = self._current_module()
            sit_id = event.payload.get("situation_id")
            by_id = {s.id: s for s in module.situations}
            if sit_id not in by_id:
                raise ProtocolError("protocol-violation", "action addresses an unknown situation", seq=event.seq, situation=sit_id)
            if sit_id in self._consumed.get(self.module_index, set()):
                raise ProtocolError("situation-consumed", "situation was already performed or its window passed", seq=event.seq, situation=sit_id)
            situation = by_id[sit_id]
            chosen = event.payload.get("action_id")
            if chosen not in {a.id for a in situation.action_options}:
                raise ProtocolError("option-not-presented", "action is not an option of the addressed situation", seq=event.seq, action=chosen)
            ground_position = next(i for i, s in enumerate(module.situations) if s.id == sit_id)
            result = StepResult(
                item_ref=sit_id,
                module_kind=kind,
                completed=completed,
                correct=chosen == situation.correct_action_id,
                duration_s=duration,
                difficulty_at_step=prompt.difficulty,
                chosen_id=chosen,
                position_matched=1 if ground_position == self.step_index else 0,
            )
            consumed_situation = sit_id

        window_entry: Optional[tuple[bool, bool]] = None
        new_difficulty: Optional[Difficulty] = None
        if self.config.adapt_scope == "all" or kind is ModuleKind.LIVE:
            fast = result.completed == 1 and duration < self.config.fast_fraction * prompt.time_limit_s
            window_entry = (result.correct, fast)
            trial = (self.window + [window_entry])[-self.config.window_size:]
            new_difficulty = self.policy.evaluate(trial, self.difficulty)

        module = self._current_module()
        last_in_module = self.step_index + 1 >= len(module.items)
        finished = last_in_module and self.module_index + 1 >= len(self.scenario.modules)
        return _Plan(
            event=event,
            action="terminal",
            step_result=result,
            window_entry=window_entry,
            new_difficulty=new_difficulty,
            consumed_situation=consumed_situation,
            finished=finished,
        )

    def _apply(self, plan: _Plan) -> StepOutcome:
        event = plan.event
        self.events.append(event)
        self._next_seq = event.seq + 1
        self._last_ts = event.timestamp_s

        if plan.action == "start":
            self.started = True
            return StepOutcome(None, None, False)
        if plan.action == "end":
            self.ended = True
            return StepOutcome(None, None, True)
        if plan.action == "prompt":
            self._prompt_open = True
            self._hint_shown = False
            self._prompt_shown_ts = event.timestamp_s
            return StepOutcome(None, None, False)
        if plan.action == "hint":
            self._hint_shown = True
            return StepOutcome(None, None, False)

        # terminal
        result = plan.step_result
        self.step_results.append(result)
        if plan.consumed_situation is not None:
            self._consumed.setdefault(self.module_index, set()).add(plan.consumed_situation)
        adaptation = None
        if plan.window_entry is not None:
            self.window.append(plan.window_entry)
            self.window = self.window[-self.config.window_size:]
        if plan.new_difficulty is not None:
            adaptation = (self.difficulty, plan.new_difficulty)
            self.difficulty = plan.new_difficulty
            self.window.clear()

        module = self._current_module()
        if self.step_index + 1 < len(module.items):
            self.step_index += 1
        else:
            self.module_index += 1
            self.step_index = 0
            if self.module_index >= len(self.scenario.modules):
                self._steps_done = True
        self._prompt_open = False
        self._hint_shown = False
        return StepOutcome(result, adaptation, plan.finished)

    # -- finalize -------------------------------------------------------------

    def finalize(self) -> SessionMetrics:
        """Metrics for a fully ended session, computed via the scoring module."""
        if not self.ended:
            raise ProtocolError("session-active", "finalize needs an ended session", session_id=self.session_id)

        per_subtask: list[SubtaskMetrics] = []
        offset = 0
        for mi, module in enumerate(self.scenario.modules):
            kind = _module_kind(module)
            n = len(module.items)
            results = self.step_results[offset : offset + n]
            offset += n
            weights = {item.id: item.weight for item in module.items}
            completed_durations = [r.duration_s for r in results if r.completed == 1]
            avg_time = scoring.average_task_time(completed_durations) if completed_durations else 0.0
            fields: dict[str, Any] = {
                "module_kind": kind,
                "module_index": mi,
                "completion_rate": sum(r.completed for r in results) / n,
                "avg_task_time_s": avg_time,
                "success_rate": scoring.success_rate(sum(1 for r in results if r.correct), n),
                "weighted_score": scoring.weighted_score(
                    [(1.0 if r.correct else 0.0, weights[r.item_ref]) for r in results]
                ),
            }
            if kind is ModuleKind.LIVE:
                expected = [s.id for s in module.situations]
                performed = [r.item_ref if r.chosen_id is not None else "" for r in results]
                x = scoring.order_accuracy(expected, performed).x
                y = scoring.action_correctness(
                    module.situations,
                    {r.item_ref: r.chosen_id for r in results if r.chosen_id is not None},
                )
                fields.update(
                    order_accuracy_x=x,
                    action_correctness_y=y,
                    vrtss=scoring.vrtss(x, y),
                )
            per_subtask.append(SubtaskMetrics(**fields))

        total_duration = self.events[-1].timestamp_s if self.events else 0.0
        interactions = sum(1 for e in self.events if e.kind in INTERACTION_EVENT_KINDS)
        frequency = (
            scoring.engagement_frequency(interactions, total_duration) if total_duration > 0 else 0.0
        )
        return SessionMetrics(
            session_id=self.session_id,
            per_subtask=tuple(per_subtask),
            engagement_frequency=frequency,
            total_duration_s=total_duration,
            final_difficulty=self.difficulty,
        )


def create_session(
    scenario: Scenario,
    seed: int,
    mode: SessionMode = SessionMode.LIVE,
    config: Optional[EngineConfig] = None,
    session_id: Optional[str] = None,
) -> Session:
    """Fresh session at the first step, canonical difficulty, empty results."""
    return Session(scenario, seed, mode=mode, config=config, session_id=session_id)


def start_payload(scenario: Scenario, seed: int, wall_clock: Optional[str] = None) -> dict[str, Any]:
    """SessionStarted payload; wall_clock is the only place real time appears."""
    payload: dict[str, Any] = {
        "scenario_id": scenario.id,
        "scenario_version": scenario.version,
        "seed": seed,
    }
    if wall_clock is not None:
        payload["wall_clock"] = wall_clock
    return payload


def replay(
    scenario: Scenario,
    events: Sequence[SessionEvent],
    seed: Optional[int] = None,
    config: Optional[EngineConfig] = None,
) -> SessionMetrics:
    """Drive a complete recorded event log through a fresh session.

    Deterministic: yields exactly the metrics of the original run. The log
    carries its seed in the SessionStarted payload; passing ``seed`` asserts
    it matches.
    """
    if not events:
        raise ProtocolError("empty-log", "cannot replay an empty event log")
    first = events[0]
    if first.kind is not EventKind.SESSION_STARTED or first.seq != 0:
        raise ProtocolError("protocol-violation", "log must begin with SessionStarted at seq 0", seq=first.seq)
    log_seed = first.payload.get("seed")
    if not isinstance(log_seed, int):
        raise ProtocolError("protocol-violation", "SessionStarted payload lacks the session seed", seq=0)
    if seed is not None and seed != log_seed:
        raise ProtocolError("seed-mismatch", "log was recorded under a different seed", expected=log_seed, got=seed, seq=0)

    session = Session(
        scenario,
        log_seed,
        mode=SessionMode.REPLAY,
        config=config,
        session_id=first.session_id,
    )
    for event in events:
        session.submit_event(event)
    return session.finalize()
