from __future__ import annotations

from pathlib import Path

import pytest

from trainforge import engine as E
from trainforge.core import (
    ActionOption,
    AnswerOption,
    EventKind,
    InteractionTarget,
    IqItem,
    IqSet,
    LiveScenarioSpec,
    McqItem,
    McqSet,
    ModuleKind,
    Scenario,
    SessionEvent,
    Situation,
)
from trainforge.parser import parse_scenario

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def factory_scenario() -> Scenario:
    result = parse_scenario((FIXTURES / "factory-safety.scn").read_text(encoding="utf-8"))
    assert result.ok, result.diagnostics
    return result.scenario


def make_mcq(item_id: str, n_options: int = 4, weight: float = 1.0, time_limit: float = 30.0) -> McqItem:
    options = [AnswerOption(id=f"{item_id}-correct", text="right", correct=True)]
    options += [
        AnswerOption(id=f"{item_id}-wrong{i}", text=f"wrong {i}", correct=False, distractor_rank=i)
        for i in range(1, n_options)
    ]
    return McqItem(id=item_id, prompt=f"prompt {item_id}", options=tuple(options), weight=weight, time_limit_s=time_limit)


def make_iq(item_id: str, n_targets: int = 3, hint: str | None = "look left", time_limit: float = 30.0) -> IqItem:
    targets = tuple(InteractionTarget(id=f"{item_id}-t{i}", label=f"target {i}") for i in range(n_targets))
    return IqItem(
        id=item_id,
        prompt=f"prompt {item_id}",
        targets=targets,
        correct_target_ids=frozenset({f"{item_id}-t0"}),
        time_limit_s=time_limit,
        hint=hint,
    )


def make_situation(sit_id: str, n_actions: int = 4, time_limit: float = 20.0, hint: str | None = None) -> Situation:
    actions = [ActionOption(id=f"{sit_id}-ok", label="do the right thing")]
    actions += [
        ActionOption(id=f"{sit_id}-bad{i}", label=f"wrong move {i}", distractor_rank=i) for i in range(1, n_actions)
    ]
    return Situation(
        id=sit_id,
        prompt=f"situation {sit_id}",
        action_options=tuple(actions),
        correct_action_id=f"{sit_id}-ok",
        base_time_limit_s=time_limit,
        hint=hint,
    )


def live_only_scenario(n_situations: int = 6, scenario_id: str = "live-drill", time_limit: float = 20.0) -> Scenario:
    situations = tuple(make_situation(f"s{i}", time_limit=time_limit) for i in range(n_situations))
    return Scenario(id=scenario_id, title="live drill", modules=(LiveScenarioSpec(situations),), version=1)


def mixed_scenario(scenario_id: str = "mixed") -> Scenario:
    return Scenario(
        id=scenario_id,
        title="mixed drill",
        modules=(
            McqSet(tuple(make_mcq(f"m{i}") for i in range(3))),
            IqSet((make_iq("q0"), make_iq("q1", hint=None))),
            LiveScenarioSpec(tuple(make_situation(f"s{i}") for i in range(4))),
        ),
        version=1,
    )


class Driver:
    """Scripted event driver for engine tests; answers land `latency` seconds in."""

    def __init__(self, scenario: Scenario, seed: int = 42, config: E.EngineConfig | None = None):
        self.scenario = scenario
        self.session = E.Session(scenario, seed, mode=E.SessionMode.REPLAY, config=config)
        self.clock = 0.0

    def emit(self, kind: EventKind, payload: dict, at: float | None = None) -> E.StepOutcome:
        if at is not None:
            self.clock = at
        event = SessionEvent(
            session_id=self.session.session_id,
            seq=self.session.next_seq,
            timestamp_s=self.clock,
            kind=kind,
            payload=payload,
        )
        return self.session.submit_event(event)

    def start(self) -> None:
        self.emit(EventKind.SESSION_STARTED, E.start_payload(self.scenario, self.session.seed))

    def show_prompt(self) -> E.Prompt:
        prompt = self.session.next_prompt()
        self.emit(EventKind.PROMPT_SHOWN, prompt.payload())
        if prompt.hint is not None:
            self.emit(EventKind.HINT_SHOWN, {"step_id": prompt.step_id})
        return prompt

    def answer_current(self, correct: bool = True, latency: float = 5.0) -> E.StepOutcome:
        prompt = self.show_prompt()
        self.clock += latency
        module = self.scenario.modules[prompt.module_index]
        if prompt.module_kind is ModuleKind.MCQ:
            item = module.items[prompt.step_index]
            chosen = item.correct_option_id if correct else next(
                o.id for o in prompt.presented_options if o.id != item.correct_option_id
            )
            return self.emit(EventKind.ANSWER_SELECTED, {"item_id": item.id, "option_id": chosen})
        if prompt.module_kind is ModuleKind.IQ:
            item = module.items[prompt.step_index]
            chosen = (
                sorted(item.correct_target_ids)[0]
                if correct
                else next(o.id for o in prompt.presented_options if o.id not in item.correct_target_ids)
            )
            return self.emit(EventKind.TARGET_INTERACTED, {"item_id": item.id, "target_id": chosen})
        situation = next(s for s in module.situations if s.id == prompt.step_id)
        chosen = (
            situation.correct_action_id
            if correct
            else next(a.id for a in situation.action_options if a.id != situation.correct_action_id)
        )
        return self.emit(EventKind.ACTION_PERFORMED, {"situation_id": situation.id, "action_id": chosen})

    def perform(self, situation_id: str, correct: bool = True, latency: float = 5.0) -> E.StepOutcome:
        """Live module: address a specific situation, prompted or not."""
        prompt = self.show_prompt()
        assert prompt.module_kind is ModuleKind.LIVE
        self.clock += latency
        module = self.scenario.modules[prompt.module_index]
        situation = next(s for s in module.situations if s.id == situation_id)
        chosen = (
            situation.correct_action_id
            if correct
            else next(a.id for a in situation.action_options if a.id != situation.correct_action_id)
        )
        return self.emit(EventKind.ACTION_PERFORMED, {"situation_id": situation_id, "action_id": chosen})

    def timeout_current(self) -> E.StepOutcome:
        prompt = self.show_prompt()
        self.clock += prompt.time_limit_s
        return self.emit(EventKind.STEP_TIMED_OUT, {"step_id": prompt.step_id})

    def end(self):
        self.emit(EventKind.SESSION_ENDED, {})
        return self.session.finalize()

    def run_perfect(self, latency: float = 5.0):
        self.start()
        while not self.session.finished_steps:
            self.answer_current(correct=True, latency=latency)
        return self.end()


# -- acceptance reporting ----------------------------------------------------

def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion, labeled by test docstring."""
    lines = []
    for status, group in (("PASS", "passed"), ("FAIL", "failed"), ("FAIL", "error")):
        for report in terminalreporter.stats.get(group, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            item = nodeid.split("::")[-1]
            label = _ACCEPTANCE_LABELS.get(item, item)
            lines.append(f"{status}  {label}")
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in sorted(lines, key=lambda s: s.split(None, 1)[1]):
            terminalreporter.write_line(line)


_ACCEPTANCE_LABELS = {
    "test_c1_vrtss_formula_suite": "C1 composite-score formula suite",
    "test_c2_delta_matching_oracle_equivalence": "C2 delta-matching oracle equivalence",
    "test_c3_worked_live_scenario": "C3 worked live-scenario check",
    "test_c4_replay_determinism": "C4 replay determinism",
    "test_c5_adaptation_policy": "C5 adaptation policy",
    "test_c6_report_oracle_equality": "C6 report/oracle equality",
    "test_c7_table_shape_and_monotone_sanity": "C7 table-shape reproduction + simulator sanity",
    "test_c8_storage_crash_safety": "C8 storage crash safety",
    "test_c9_service_facade_equivalence": "C9 service facade equivalence",
}


# -- random scenario generation (hypothesis) ----------------------------------

def scenario_strategy():
    """Strategy over small valid scenarios spanning all module kinds."""
    from hypothesis import strategies as st

    def weights():
        return st.floats(0.25, 8.0, allow_nan=False, allow_infinity=False)

    def limits():
        return st.floats(1.0, 90.0, allow_nan=False, allow_infinity=False)

    @st.composite
    def mcq_item(draw, uid: str):
        n = draw(st.integers(2, 6))
        options = [AnswerOption(id=f"{uid}-correct", text="right", correct=True)]
        options += [
            AnswerOption(id=f"{uid}-w{i}", text=f"w{i}", correct=False, distractor_rank=draw(st.integers(0, 3)))
            for i in range(1, n)
        ]
        return McqItem(
            id=uid, prompt=f"p {uid}", options=tuple(options),
            weight=draw(weights()), time_limit_s=draw(limits()),
        )

    @st.composite
    def iq_item(draw, uid: str):
        n = draw(st.integers(2, 5))
        targets = tuple(InteractionTarget(id=f"{uid}-t{i}", label=f"t{i}") for i in range(n))
        n_correct = draw(st.integers(1, n))
        return IqItem(
            id=uid, prompt=f"p {uid}", targets=targets,
            correct_target_ids=frozenset(f"{uid}-t{i}" for i in range(n_correct)),
            weight=draw(weights()), time_limit_s=draw(limits()),
            hint=draw(st.none() | st.just(f"hint {uid}")),
        )

    @st.composite
    def situation(draw, uid: str):
        n = draw(st.integers(2, 6))
        actions = [ActionOption(id=f"{uid}-ok", label="ok")]
        actions += [
            ActionOption(id=f"{uid}-b{i}", label=f"b{i}", distractor_rank=draw(st.integers(0, 3)))
            for i in range(1, n)
        ]
        return Situation(
            id=uid, prompt=f"p {uid}", action_options=tuple(actions),
            correct_action_id=f"{uid}-ok", weight=draw(weights()),
            base_time_limit_s=draw(limits()),
            hint=draw(st.none() | st.just(f"hint {uid}")),
        )

    @st.composite
    def build(draw):
        n_modules = draw(st.integers(1, 3))
        modules = []
        serial = 0
        for mi in range(n_modules):
            kind = draw(st.sampled_from(["mcq", "iq", "live"]))
            count = draw(st.integers(1, 4))
            items = []
            for _ in range(count):
                uid = f"x{serial}"
                serial += 1
                if kind == "mcq":
                    items.append(draw(mcq_item(uid)))
                elif kind == "iq":
                    items.append(draw(iq_item(uid)))
                else:
                    items.append(draw(situation(uid)))
            if kind == "mcq":
                modules.append(McqSet(tuple(items)))
            elif kind == "iq":
                modules.append(IqSet(tuple(items)))
            else:
                modules.append(LiveScenarioSpec(tuple(items)))
        return Scenario(
            id=draw(st.sampled_from(["gen-a", "gen-b", "gen-c"])),
            title="generated",
            modules=tuple(modules),
            version=draw(st.integers(1, 5)),
        )

    return build()
