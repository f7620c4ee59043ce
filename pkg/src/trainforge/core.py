"""Domain types for scenarios, sessions, events, and metric results.

Everything here is an immutable value: constructors validate their invariants
and raise :class:`~trainforge.errors.DomainError` on violation, so any value
that exists is well-formed. All types serialize to plain JSON-able dicts and
round-trip through ``*_to_dict`` / ``*_from_dict``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from enum import Enum, IntEnum
from typing import Any, Optional, Union

from .errors import DomainError

__all__ = [
    "Difficulty",
    "ModuleKind",
    "EventKind",
    "AnswerOption",
    "McqItem",
    "InteractionTarget",
    "IqItem",
    "ActionOption",
    "Situation",
    "McqSet",
    "IqSet",
    "LiveScenarioSpec",
    "ModuleSpec",
    "Scenario",
    "SessionEvent",
    "StepResult",
    "SubtaskMetrics",
    "SessionMetrics",
    "INTERACTION_EVENT_KINDS",
    "TERMINAL_EVENT_KINDS",
    "scenario_to_dict",
    "scenario_from_dict",
    "event_to_dict",
    "event_from_dict",
    "step_result_to_dict",
    "step_result_from_dict",
    "session_metrics_to_dict",
    "session_metrics_from_dict",
    "canonical_json",
]


class Difficulty(IntEnum):
    """Presentation difficulty: 1 = assisted, 2 = canonical, 3 = challenge."""

    ASSISTED = 1
    CANONICAL = 2
    CHALLENGE = 3


class ModuleKind(str, Enum):
    MCQ = "mcq"
    IQ = "iq"
    LIVE = "live"


class EventKind(str, Enum):
    SESSION_STARTED = "session_started"
    PROMPT_SHOWN = "prompt_shown"
    ANSWER_SELECTED = "answer_selected"
    TARGET_INTERACTED = "target_interacted"
    ACTION_PERFORMED = "action_performed"
    STEP_TIMED_OUT = "step_timed_out"
    HINT_SHOWN = "hint_shown"
    SESSION_ENDED = "session_ended"


# Trainee-initiated events; the numerator of engagement frequency.
INTERACTION_EVENT_KINDS = frozenset(
    {EventKind.ANSWER_SELECTED, EventKind.TARGET_INTERACTED, EventKind.ACTION_PERFORMED}
)

# Events that resolve the current step and produce a StepResult.
TERMINAL_EVENT_KINDS = frozenset(
    {
        EventKind.ANSWER_SELECTED,
        EventKind.TARGET_INTERACTED,
        EventKind.ACTION_PERFORMED,
        EventKind.STEP_TIMED_OUT,
    }
)


def _require(condition: bool, code: str, message: str, **context: Any) -> None:
    if not condition:
        raise DomainError(code, message, **context)


def _require_id(value: str, what: str) -> None:
    _require(isinstance(value, str) and value != "", "empty-id", f"{what} id must be a non-empty string")


def _unique_ids(ids: list[str], code: str, what: str) -> None:
    seen = set()
    for i in ids:
        if i in seen:
            raise DomainError(code, f"duplicate {what} id", id=i)
        seen.add(i)


@dataclass(frozen=True)
class AnswerOption:
    """One selectable MCQ answer. The correct option always has rank 0."""

    id: str
    text: str
    correct: bool
    distractor_rank: int = 0  # 0 = always shown; higher ranks dropped first at low difficulty

    def __post_init__(self):
        _require_id(self.id, "option")
        _require(self.distractor_rank >= 0, "invalid-rank", "distractor_rank must be >= 0", option=self.id)
        if self.correct:
            _require(self.distractor_rank == 0, "correct-rank", "correct option must have distractor_rank 0", option=self.id)


@dataclass(frozen=True)
class McqItem:
    id: str
    prompt: str
    options: tuple[AnswerOption, ...]
    time_limit_s: float
    weight: float = 1.0
    asset_refs: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        object.__setattr__(self, "asset_refs", tuple(self.asset_refs))
        _require_id(self.id, "item")
        _require(2 <= len(self.options) <= 6, "option-count", "MCQ items take 2 to 6 options", item=self.id, count=len(self.options))
        correct = [o for o in self.options if o.correct]
        _require(len(correct) != 0, "no-correct-option", "MCQ item has no correct option", item=self.id)
        _require(len(correct) == 1, "multiple-correct", "MCQ item has more than one correct option", item=self.id)
        _unique_ids([o.id for o in self.options], "duplicate-id", "option")
        _require(self.weight > 0, "invalid-weight", "weight must be positive", item=self.id)
        _require(self.time_limit_s > 0, "invalid-time-limit", "time_limit_s must be positive", item=self.id)

    @property
    def correct_option_id(self) -> str:
        return next(o.id for o in self.options if o.correct)


@dataclass(frozen=True)
class InteractionTarget:
    id: str
    label: str
    asset_ref: str = ""

    def __post_init__(self):
        _require_id(self.id, "target")


@dataclass(frozen=True)
class IqItem:
    id: str
    prompt: str
    targets: tuple[InteractionTarget, ...]
    correct_target_ids: frozenset[str]
    time_limit_s: float
    weight: float = 1.0
    hint: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "correct_target_ids", frozenset(self.correct_target_ids))
        _require_id(self.id, "item")
        _require(len(self.targets) >= 2, "target-count", "IQ items need at least 2 targets", item=self.id)
        _unique_ids([t.id for t in self.targets], "duplicate-id", "target")
        _require(len(self.correct_target_ids) > 0, "no-correct-target", "IQ item needs at least one correct target", item=self.id)
        known = {t.id for t in self.targets}
        for tid in sorted(self.correct_target_ids):
            _require(tid in known, "dangling-target", "correct_target_ids references unknown target", item=self.id, target=tid)
        _require(self.weight > 0, "invalid-weight", "weight must be positive", item=self.id)
        _require(self.time_limit_s > 0, "invalid-time-limit", "time_limit_s must be positive", item=self.id)


@dataclass(frozen=True)
class ActionOption:
    id: str
    label: str
    distractor_rank: int = 0

    def __post_init__(self):
        _require_id(self.id, "action")
        _require(self.distractor_rank >= 0, "invalid-rank", "distractor_rank must be >= 0", action=self.id)


@dataclass(frozen=True)
class Situation:
    """One step of a live scenario: a situation with one correct action.

    The ground-truth order of a situation is its position in the enclosing
    ``LiveScenarioSpec.situations`` list.
    """

    id: str
    prompt: str
    action_options: tuple[ActionOption, ...]
    correct_action_id: str
    base_time_limit_s: float
    weight: float = 1.0
    hint: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "action_options", tuple(self.action_options))
        _require_id(self.id, "situation")
        _require(
            2 <= len(self.action_options) <= 6,
            "action-count",
            "situations take 2 to 6 action options",
            situation=self.id,
            count=len(self.action_options),
        )
        _unique_ids([a.id for a in self.action_options], "duplicate-id", "action")
        by_id = {a.id: a for a in self.action_options}
        _require(
            self.correct_action_id in by_id,
            "dangling-correct-action",
            "correct_action_id not among action_options",
            situation=self.id,
            action=self.correct_action_id,
        )
        _require(
            by_id[self.correct_action_id].distractor_rank == 0,
            "correct-rank",
            "correct action must have distractor_rank 0",
            situation=self.id,
        )
        _require(self.weight > 0, "invalid-weight", "weight must be positive", situation=self.id)
        _require(self.base_time_limit_s > 0, "invalid-time-limit", "base_time_limit_s must be positive", situation=self.id)


@dataclass(frozen=True)
class McqSet:
    items: tuple[McqItem, ...]
    kind = ModuleKind.MCQ

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        _require(len(self.items) > 0, "empty-module", "MCQ module has no items")


@dataclass(frozen=True)
class IqSet:
    items: tuple[IqItem, ...]
    kind = ModuleKind.IQ

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        _require(len(self.items) > 0, "empty-module", "IQ module has no items")


@dataclass(frozen=True)
class LiveScenarioSpec:
    situations: tuple[Situation, ...]
    kind = ModuleKind.LIVE

    def __post_init__(self):
        object.__setattr__(self, "situations", tuple(self.situations))
        _require(len(self.situations) > 0, "empty-module", "live module has no situations")

    @property
    def items(self) -> tuple[Situation, ...]:
        return self.situations


ModuleSpec = Union[McqSet, IqSet, LiveScenarioSpec]


@dataclass(frozen=True)
class Scenario:
    id: str
    title: str
    modules: tuple[ModuleSpec, ...]
    version: int = 1

    def __post_init__(self):
        object.__setattr__(self, "modules", tuple(self.modules))
        _require_id(self.id, "scenario")
        _require(len(self.modules) > 0, "empty-scenario", "scenario needs at least one module", scenario=self.id)
        _require(isinstance(self.version, int) and self.version >= 1, "invalid-version", "version must be a positive integer", scenario=self.id)
        _unique_ids([item.id for mod in self.modules for item in mod.items], "duplicate-id", "item/situation")

    def step_count(self) -> int:
        return sum(len(m.items) for m in self.modules)


@dataclass(frozen=True)
class SessionEvent:
    """One timestamped, sequence-numbered record of a session's run.

    ``timestamp_s`` is seconds since session start; wall-clock time, when
    known, lives only in the SessionStarted payload.
    """

    session_id: str
    seq: int
    timestamp_s: float
    kind: EventKind
    payload: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        _require_id(self.session_id, "session")
        _require(isinstance(self.seq, int) and self.seq >= 0, "invalid-seq", "seq must be a non-negative integer")
        _require(
            isinstance(self.timestamp_s, (int, float)) and not isinstance(self.timestamp_s, bool) and self.timestamp_s >= 0 and math.isfinite(self.timestamp_s),
            "invalid-timestamp",
            "timestamp_s must be a finite non-negative number",
        )
        object.__setattr__(self, "timestamp_s", float(self.timestamp_s))
        object.__setattr__(self, "kind", EventKind(self.kind))


@dataclass(frozen=True)
class StepResult:
    """Outcome of one resolved step.

    ``completed`` and ``position_matched`` are 0/1 integers so metric sums
    read directly off the records.
    """

    item_ref: str
    module_kind: ModuleKind
    completed: int
    correct: bool
    duration_s: float
    difficulty_at_step: Difficulty
    chosen_id: Optional[str] = None
    position_matched: Optional[int] = None  # live modules only

    def __post_init__(self):
        object.__setattr__(self, "module_kind", ModuleKind(self.module_kind))
        object.__setattr__(self, "difficulty_at_step", Difficulty(self.difficulty_at_step))
        _require(self.completed in (0, 1), "invalid-completed", "completed must be 0 or 1")
        if self.completed == 0:
            _require(not self.correct, "incomplete-correct", "an incomplete step cannot be correct")
        _require(self.duration_s >= 0, "invalid-duration", "duration_s must be >= 0")
        if self.module_kind is ModuleKind.LIVE:
            _require(self.position_matched in (0, 1), "missing-position", "live steps must record position_matched as 0 or 1")
        else:
            _require(self.position_matched is None, "unexpected-position", "position_matched is live-only")


_VRTSS_TOL = 1e-12


def _vrtss_formula(x: float, y: float) -> float:
    return min(1.0, max(0.0, 0.3 * x + 0.2 * y + math.sqrt(0.25 * x * y)))


@dataclass(frozen=True)
class SubtaskMetrics:
    """Per-module metric block; the composite score fields exist only for live modules."""

    module_kind: ModuleKind
    completion_rate: float
    avg_task_time_s: float
    success_rate: float
    weighted_score: float
    module_index: int = 0
    order_accuracy_x: Optional[float] = None
    action_correctness_y: Optional[float] = None
    vrtss: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "module_kind", ModuleKind(self.module_kind))
        _require(0.0 <= self.completion_rate <= 1.0, "metric-out-of-range", "completion_rate outside [0,1]")
        _require(self.avg_task_time_s >= 0.0, "metric-out-of-range", "avg_task_time_s must be >= 0")
        _require(0.0 <= self.success_rate <= 1.0, "metric-out-of-range", "success_rate outside [0,1]")
        _require(self.weighted_score >= 0.0, "metric-out-of-range", "weighted_score must be >= 0")
        live = self.module_kind is ModuleKind.LIVE
        present = [self.order_accuracy_x, self.action_correctness_y, self.vrtss]
        if live:
            _require(all(v is not None for v in present), "missing-live-metrics", "live modules must carry X, Y and the composite score")
            _require(0.0 <= self.order_accuracy_x <= 1.0, "metric-out-of-range", "order accuracy outside [0,1]")
            _require(0.0 <= self.action_correctness_y <= 1.0, "metric-out-of-range", "action correctness outside [0,1]")
            expected = _vrtss_formula(self.order_accuracy_x, self.action_correctness_y)
            _require(
                abs(self.vrtss - expected) <= _VRTSS_TOL,
                "composite-mismatch",
                "composite score does not match its components",
                stored=self.vrtss,
                expected=expected,
            )
        else:
            _require(all(v is None for v in present), "unexpected-live-metrics", "X, Y and the composite score are live-only")


@dataclass(frozen=True)
class SessionMetrics:
    session_id: str
    per_subtask: tuple[SubtaskMetrics, ...]
    engagement_frequency: float  # interactions per second
    total_duration_s: float
    final_difficulty: Difficulty

    def __post_init__(self):
        object.__setattr__(self, "per_subtask", tuple(self.per_subtask))
        object.__setattr__(self, "final_difficulty", Difficulty(self.final_difficulty))
        _require_id(self.session_id, "session")
        _require(self.engagement_frequency >= 0.0, "metric-out-of-range", "engagement_frequency must be >= 0")
        _require(self.total_duration_s >= 0.0, "metric-out-of-range", "total_duration_s must be >= 0")


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _option_to_dict(o: AnswerOption) -> dict[str, Any]:
    return {"id": o.id, "text": o.text, "correct": o.correct, "distractor_rank": o.distractor_rank}


def _mcq_to_dict(it: McqItem) -> dict[str, Any]:
    return {
        "id": it.id,
        "prompt": it.prompt,
        "asset_refs": list(it.asset_refs),
        "options": [_option_to_dict(o) for o in it.options],
        "weight": it.weight,
        "time_limit_s": it.time_limit_s,
    }


def _iq_to_dict(it: IqItem) -> dict[str, Any]:
    d: dict[str, Any] = {
        "id": it.id,
        "prompt": it.prompt,
        "targets": [{"id": t.id, "label": t.label, "asset_ref": t.asset_ref} for t in it.targets],
        "correct_target_ids": sorted(it.correct_target_ids),
        "weight": it.weight,
        "time_limit_s": it.time_limit_s,
    }
    if it.hint is not None:
        d["hint"] = it.hint
    return d


def _situation_to_dict(s: Situation) -> dict[str, Any]:
    d: dict[str, Any] = {
        "id": s.id,
        "prompt": s.prompt,
        "action_options": [{"id": a.id, "label": a.label, "distractor_rank": a.distractor_rank} for a in s.action_options],
        "correct_action_id": s.correct_action_id,
        "weight": s.weight,
        "base_time_limit_s": s.base_time_limit_s,
    }
    if s.hint is not None:
        d["hint"] = s.hint
    return d


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    modules: list[dict[str, Any]] = []
    for mod in s.modules:
        if isinstance(mod, McqSet):
            modules.append({"kind": "mcq", "items": [_mcq_to_dict(i) for i in mod.items]})
        elif isinstance(mod, IqSet):
            modules.append({"kind": "iq", "items": [_iq_to_dict(i) for i in mod.items]})
        else:
            modules.append({"kind": "live", "situations": [_situation_to_dict(x) for x in mod.situations]})
    return {"id": s.id, "title": s.title, "version": s.version, "modules": modules}


def scenario_from_dict(d: dict[str, Any]) -> Scenario:
    """Build a Scenario from its dict form, enforcing every invariant.

    Raises DomainError on the first violation; for located diagnostics use
    :func:`trainforge.parser.parse_scenario` instead.
    """
    modules: list[ModuleSpec] = []
    for mod in d.get("modules", []):
        kind = mod.get("kind")
        if kind == "mcq":
            modules.append(
                McqSet(
                    tuple(
                        McqItem(
                            id=i["id"],
                            prompt=i.get("prompt", ""),
                            asset_refs=tuple(i.get("asset_refs", [])),
                            options=tuple(
                                AnswerOption(
                                    id=o["id"],
                                    text=o.get("text", ""),
                                    correct=bool(o.get("correct", False)),
                                    distractor_rank=int(o.get("distractor_rank", 0)),
                                )
                                for o in i.get("options", [])
                            ),
                            weight=float(i.get("weight", 1.0)),
                            time_limit_s=float(i["time_limit_s"]),
                        )
                        for i in mod.get("items", [])
                    )
                )
            )
        elif kind == "iq":
            modules.append(
                IqSet(
                    tuple(
                        IqItem(
                            id=i["id"],
                            prompt=i.get("prompt", ""),
                            targets=tuple(
                                InteractionTarget(id=t["id"], label=t.get("label", ""), asset_ref=t.get("asset_ref", ""))
                                for t in i.get("targets", [])
                            ),
                            correct_target_ids=frozenset(i.get("correct_target_ids", [])),
                            weight=float(i.get("weight", 1.0)),
                            time_limit_s=float(i["time_limit_s"]),
                            hint=i.get("hint"),
                        )
                        for i in mod.get("items", [])
                    )
                )
            )
        elif kind == "live":
            modules.append(
                LiveScenarioSpec(
                    tuple(
                        Situation(
                            id=s["id"],
                            prompt=s.get("prompt", ""),
                            action_options=tuple(
                                ActionOption(id=a["id"], label=a.get("label", ""), distractor_rank=int(a.get("distractor_rank", 0)))
                                for a in s.get("action_options", [])
                            ),
                            correct_action_id=s["correct_action_id"],
                            weight=float(s.get("weight", 1.0)),
                            base_time_limit_s=float(s["base_time_limit_s"]),
                            hint=s.get("hint"),
                        )
                        for s in mod.get("situations", [])
                    )
                )
            )
        else:
            raise DomainError("unknown-module-kind", "module kind must be mcq, iq or live", kind=kind)
    return Scenario(id=d.get("id", ""), title=d.get("title", ""), modules=tuple(modules), version=int(d.get("version", 1)))


def event_to_dict(e: SessionEvent) -> dict[str, Any]:
    return {
        "session_id": e.session_id,
        "seq": e.seq,
        "timestamp_s": e.timestamp_s,
        "kind": e.kind.value,
        "payload": dict(e.payload),
    }


def event_from_dict(d: dict[str, Any]) -> SessionEvent:
    return SessionEvent(
        session_id=d["session_id"],
        seq=d["seq"],
        timestamp_s=d["timestamp_s"],
        kind=EventKind(d["kind"]),
        payload=dict(d.get("payload", {})),
    )


def step_result_to_dict(r: StepResult) -> dict[str, Any]:
    d: dict[str, Any] = {
        "item_ref": r.item_ref,
        "module_kind": r.module_kind.value,
        "completed": r.completed,
        "correct": r.correct,
        "duration_s": r.duration_s,
        "difficulty_at_step": int(r.difficulty_at_step),
        "chosen_id": r.chosen_id,
    }
    if r.module_kind is ModuleKind.LIVE:
        d["position_matched"] = r.position_matched
    return d


def step_result_from_dict(d: dict[str, Any]) -> StepResult:
    return StepResult(
        item_ref=d["item_ref"],
        module_kind=ModuleKind(d["module_kind"]),
        completed=d["completed"],
        correct=d["correct"],
        duration_s=d["duration_s"],
        difficulty_at_step=Difficulty(d["difficulty_at_step"]),
        chosen_id=d.get("chosen_id"),
        position_matched=d.get("position_matched"),
    )


def _subtask_to_dict(m: SubtaskMetrics) -> dict[str, Any]:
    d: dict[str, Any] = {
        "module_kind": m.module_kind.value,
        "module_index": m.module_index,
        "completion_rate": m.completion_rate,
        "avg_task_time_s": m.avg_task_time_s,
        "success_rate": m.success_rate,
        "weighted_score": m.weighted_score,
    }
    if m.module_kind is ModuleKind.LIVE:
        d["order_accuracy_x"] = m.order_accuracy_x
        d["action_correctness_y"] = m.action_correctness_y
        d["vrtss"] = m.vrtss
    return d


def _subtask_from_dict(d: dict[str, Any]) -> SubtaskMetrics:
    return SubtaskMetrics(
        module_kind=ModuleKind(d["module_kind"]),
        module_index=d.get("module_index", 0),
        completion_rate=d["completion_rate"],
        avg_task_time_s=d["avg_task_time_s"],
        success_rate=d["success_rate"],
        weighted_score=d["weighted_score"],
        order_accuracy_x=d.get("order_accuracy_x"),
        action_correctness_y=d.get("action_correctness_y"),
        vrtss=d.get("vrtss"),
    )


def session_metrics_to_dict(m: SessionMetrics) -> dict[str, Any]:
    return {
        "session_id": m.session_id,
        "per_subtask": [_subtask_to_dict(s) for s in m.per_subtask],
        "engagement_frequency": m.engagement_frequency,
        "total_duration_s": m.total_duration_s,
        "final_difficulty": int(m.final_difficulty),
    }


def session_metrics_from_dict(d: dict[str, Any]) -> SessionMetrics:
    return SessionMetrics(
        session_id=d["session_id"],
        per_subtask=tuple(_subtask_from_dict(s) for s in d["per_subtask"]),
        engagement_frequency=d["engagement_frequency"],
        total_duration_s=d["total_duration_s"],
        final_difficulty=Difficulty(d["final_difficulty"]),
    )


def canonical_json(data: Any) -> str:
    """Deterministic JSON encoding: sorted keys, compact separators.

    Two equal values always produce byte-identical encodings, which is what
    replay/determinism checks compare.
    """
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
