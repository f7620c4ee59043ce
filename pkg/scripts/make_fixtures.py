#!/usr/bin/env python3
"""Regenerate shipped trace fixtures.

Outputs are deterministic, so re-running keeps the files byte-identical:

    fixtures/mcq-fast.trace   hand-timed perfect run; MCQ durations
                              [15, 18, 20, 22, 25] (mean 20.0 s)
    fixtures/cohort-A/        store directory with five simulated sessions
                              from mixed profiles
"""

from __future__ import annotations

import shutil
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from trainforge import engine as E  # noqa: E402
from trainforge.core import (  # noqa: E402
    EventKind,
    ModuleKind,
    SessionEvent,
    canonical_json,
    event_to_dict,
)
from trainforge.parser import parse_scenario  # noqa: E402
from trainforge.simulator import TraineeProfile, simulate  # noqa: E402
from trainforge.store import EventStore  # noqa: E402

FIXTURES = ROOT / "fixtures"

MCQ_DURATIONS = [15.0, 18.0, 20.0, 22.0, 25.0]
IQ_DURATIONS = [30.0, 40.0, 50.0]
LIVE_DURATIONS = [10.0, 12.0, 14.0, 16.0, 18.0]

COHORT_PROFILES = [
    TraineeProfile(name="expert", answer_accuracy=0.95, sequencing_fidelity=0.95),
    TraineeProfile(name="competent", answer_accuracy=0.80, sequencing_fidelity=0.70),
    TraineeProfile(name="novice", answer_accuracy=0.55, sequencing_fidelity=0.50),
    TraineeProfile(name="struggling", answer_accuracy=0.35, sequencing_fidelity=0.40),
    TraineeProfile(name="erratic", answer_accuracy=0.60, sequencing_fidelity=0.30),
]
COHORT_SEEDS = [101, 202, 303, 404, 505]


def make_mcq_fast_trace(scenario) -> Path:
    session = E.Session(scenario, seed=2024, mode=E.SessionMode.REPLAY)
    clock = 0.0
    durations = {
        ModuleKind.MCQ: iter(MCQ_DURATIONS),
        ModuleKind.IQ: iter(IQ_DURATIONS),
        ModuleKind.LIVE: iter(LIVE_DURATIONS),
    }

    def emit(kind, payload):
        event = SessionEvent(
            session_id=session.session_id, seq=session.next_seq, timestamp_s=clock, kind=kind, payload=payload
        )
        session.submit_event(event)

    emit(EventKind.SESSION_STARTED, E.start_payload(scenario, 2024))
    while not session.finished_steps:
        prompt = session.next_prompt()
        emit(EventKind.PROMPT_SHOWN, prompt.payload())
        if prompt.hint is not None:
            emit(EventKind.HINT_SHOWN, {"step_id": prompt.step_id})
        clock += next(durations[prompt.module_kind])
        module = scenario.modules[prompt.module_index]
        if prompt.module_kind is ModuleKind.MCQ:
            item = module.items[prompt.step_index]
            emit(EventKind.ANSWER_SELECTED, {"item_id": item.id, "option_id": item.correct_option_id})
        elif prompt.module_kind is ModuleKind.IQ:
            item = module.items[prompt.step_index]
            emit(EventKind.TARGET_INTERACTED, {"item_id": item.id, "target_id": sorted(item.correct_target_ids)[0]})
        else:
            situation = next(s for s in module.situations if s.id == prompt.step_id)
            emit(EventKind.ACTION_PERFORMED, {"situation_id": situation.id, "action_id": situation.correct_action_id})
    emit(EventKind.SESSION_ENDED, {})
    session.finalize()

    path = FIXTURES / "mcq-fast.trace"
    path.write_text("".join(canonical_json(event_to_dict(e)) + "\n" for e in session.events), encoding="utf-8")
    return path


def make_cohort(scenario) -> Path:
    cohort_dir = FIXTURES / "cohort-A"
    if cohort_dir.exists():
        shutil.rmtree(cohort_dir)
    store = EventStore(cohort_dir)
    for profile, seed in zip(COHORT_PROFILES, COHORT_SEEDS):
        simulate(profile, scenario, seed, store=store)
    return cohort_dir


def main() -> None:
    scenario = parse_scenario((FIXTURES / "factory-safety.scn").read_text(encoding="utf-8")).scenario
    trace = make_mcq_fast_trace(scenario)
    print(f"wrote {trace}")
    cohort = make_cohort(scenario)
    sessions = sorted(p.name for p in (cohort / scenario.id).iterdir() if p.is_dir())
    print(f"wrote {cohort} with {len(sessions)} sessions")


if __name__ == "__main__":
    main()
