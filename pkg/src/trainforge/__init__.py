"""trainforge: headless adaptive training-scenario engine.

Scenarios (MCQ, interactive-question, and live action-sequence modules) run
as deterministic event-sourced sessions; a scoring module computes the full
metric suite including the composite session score; traces persist to an
append-only store that feeds cohort reports; an HTTP service exposes the
whole lifecycle to interactive clients.
"""

from .core import (
    Difficulty,
    EventKind,
    ModuleKind,
    Scenario,
    SessionEvent,
    SessionMetrics,
    StepResult,
    SubtaskMetrics,
)
from .engine import EngineConfig, Prompt, Session, SessionMode, StepOutcome, create_session, replay
from .errors import DomainError, MetricError, ProtocolError, StoreError, TrainforgeError
from .parser import ParseDiagnostic, ParseResult, parse_scenario, validate_scenario
from .report import CohortReport, build_report, render_text
from .simulator import TraineeProfile, run_cohort, simulate
from .store import EventStore, TraceBundle

__version__ = "0.1.0"

__all__ = [
    "Difficulty",
    "EventKind",
    "ModuleKind",
    "Scenario",
    "SessionEvent",
    "SessionMetrics",
    "StepResult",
    "SubtaskMetrics",
    "EngineConfig",
    "Prompt",
    "Session",
    "SessionMode",
    "StepOutcome",
    "create_session",
    "replay",
    "DomainError",
    "MetricError",
    "ProtocolError",
    "StoreError",
    "TrainforgeError",
    "ParseDiagnostic",
    "ParseResult",
    "parse_scenario",
    "validate_scenario",
    "CohortReport",
    "build_report",
    "render_text",
    "TraineeProfile",
    "run_cohort",
    "simulate",
    "EventStore",
    "TraceBundle",
    "__version__",
]
