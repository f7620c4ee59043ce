"""Append-only session persistence.

Layout (documented in ``docs/storage.md``)::

    <root>/
      <scenario-id>/
        scenario-v<version>.scn     canonical scenario text
        <session-id>/
          events.jsonl              one canonical-JSON event per line
          metrics.json              finalized SessionMetrics

Event lines are self-describing (session_id, seq, timestamp, kind, payload)
and appended one per write, so any crash leaves either a clean prefix of
whole records or one torn trailing record, which loading reports as a
corruption error with its byte offset.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .core import (
    EventKind,
    Scenario,
    SessionEvent,
    SessionMetrics,
    canonical_json,
    event_from_dict,
    event_to_dict,
    session_metrics_from_dict,
    session_metrics_to_dict,
)
from .errors import StoreError
from .parser import parse_scenario, scenario_to_text

__all__ = ["TraceBundle", "EventStore"]

_SCENARIO_FILE = re.compile(r"^scenario-v(\d+)\.scn$")


@dataclass(frozen=True)
class TraceBundle:
    """One session's complete ordered event log plus its finalized metrics."""

    scenario_id: str
    scenario_version: int
    session_id: str
    seed: int
    events: tuple[SessionEvent, ...]
    metrics: Optional[SessionMetrics] = None

    @property
    def complete(self) -> bool:
        return bool(self.events) and self.events[-1].kind is EventKind.SESSION_ENDED


def _bundle_header(events: Iterable[SessionEvent]) -> tuple[str, int, int]:
    first = next(iter(events))
    payload = first.payload
    return payload.get("scenario_id", ""), int(payload.get("scenario_version", 0)), int(payload.get("seed", 0))


class EventStore:
    """Filesystem-backed store for scenarios, event logs, and metrics.

    Appends to one session are serialized by the caller (sessions are
    single-writer); distinct sessions can append concurrently since they
    touch disjoint files.
    """

    def __init__(self, root: "Path | str"):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        # session_id -> session directory; filled lazily from disk
        self._dirs: dict[str, Path] = {}
        # session_id -> events already appended (idempotency window)
        self._events: dict[str, list[SessionEvent]] = {}

    # -- scenarios -----------------------------------------------------------

    def put_scenario(self, scenario: Scenario) -> None:
        """Store a scenario version; identical re-puts are no-ops."""
        directory = self.root / scenario.id
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"scenario-v{scenario.version}.scn"
        text = scenario_to_text(scenario)
        if path.exists():
            if path.read_text(encoding="utf-8") == text:
                return
            raise StoreError(
                "version-conflict",
                "a different scenario is already stored under this id and version",
                scenario_id=scenario.id,
                version=scenario.version,
            )
        path.write_text(text, encoding="utf-8")

    def scenario_versions(self, scenario_id: str) -> list[int]:
        directory = self.root / scenario_id
        if not directory.is_dir():
            return []
        versions = []
        for entry in directory.iterdir():
            match = _SCENARIO_FILE.match(entry.name)
            if match:
                versions.append(int(match.group(1)))
        return sorted(versions)

    def get_scenario(self, scenario_id: str, version: Optional[int] = None) -> Scenario:
        versions = self.scenario_versions(scenario_id)
        if not versions:
            raise StoreError("not-found", "unknown scenario", scenario_id=scenario_id)
        if version is None:
            version = versions[-1]
        elif version not in versions:
            raise StoreError("not-found", "unknown scenario version", scenario_id=scenario_id, version=version)
        path = self.root / scenario_id / f"scenario-v{version}.scn"
        result = parse_scenario(path.read_text(encoding="utf-8"))
        if not result.ok:
            raise StoreError("corrupt-scenario", "stored scenario no longer parses", scenario_id=scenario_id, version=version)
        return result.scenario

    def scenario_ids(self) -> list[str]:
        return sorted(
            entry.name
            for entry in self.root.iterdir()
            if entry.is_dir() and self.scenario_versions(entry.name)
        )

    # -- event logs ----------------------------------------------------------

    def _session_dir(self, session_id: str) -> Optional[Path]:
        cached = self._dirs.get(session_id)
        if cached is not None:
            return cached
        for scenario_dir in self.root.iterdir():
            candidate = scenario_dir / session_id
            if candidate.is_dir() and (candidate / "events.jsonl").exists():
                self._dirs[session_id] = candidate
                return candidate
        return None

    def _loaded(self, session_id: str) -> list[SessionEvent]:
        if session_id not in self._events:
            directory = self._session_dir(session_id)
            if directory is None:
                raise StoreError("not-found", "unknown session", session_id=session_id)
            self._events[session_id] = self._read_log(directory / "events.jsonl", session_id)
        return self._events[session_id]

    def _read_log(self, path: Path, session_id: str) -> list[SessionEvent]:
        data = path.read_bytes()
        events: list[SessionEvent] = []
        offset = 0
        while offset < len(data):
            newline = data.find(b"\n", offset)
            if newline == -1:
                raise StoreError(
                    "corrupt-record",
                    "event log ends mid-record (no record terminator)",
                    path=str(path),
                    offset=offset,
                )
            line = data[offset:newline]
            try:
                event = event_from_dict(json.loads(line.decode("utf-8")))
            except Exception:
                raise StoreError("corrupt-record", "event record does not decode", path=str(path), offset=offset)
            if event.session_id != session_id or event.seq != len(events):
                raise StoreError(
                    "corrupt-log",
                    "event record out of place",
                    path=str(path),
                    offset=offset,
                    seq=event.seq,
                    expected_seq=len(events),
                )
            events.append(event)
            offset = newline + 1
        return events

    def append_event(self, session_id: str, event: SessionEvent, durable: bool = True) -> None:
        """Durably append one event; idempotent on (session_id, seq).

        Re-appending the identical event is a no-op; a different event at an
        existing seq raises ``seq-conflict``.
        """
        if event.session_id != session_id:
            raise StoreError("session-mismatch", "event carries a different session id", session_id=session_id, got=event.session_id)

        if self._session_dir(session_id) is None:
            if event.seq != 0 or event.kind is not EventKind.SESSION_STARTED:
                raise StoreError("not-found", "session must begin with SessionStarted at seq 0", session_id=session_id, seq=event.seq)
            scenario_id = event.payload.get("scenario_id")
            if not scenario_id:
                raise StoreError("invalid-event", "SessionStarted payload lacks scenario_id", session_id=session_id)
            directory = self.root / scenario_id / session_id
            directory.mkdir(parents=True, exist_ok=True)
            (directory / "events.jsonl").touch()
            self._dirs[session_id] = directory
            self._events[session_id] = []

        existing = self._loaded(session_id)
        if event.seq < len(existing):
            if existing[event.seq] == event:
                return
            raise StoreError("seq-conflict", "a different event is already stored at this seq", session_id=session_id, seq=event.seq)
        if event.seq > len(existing):
            raise StoreError("seq-gap", "append would leave a hole in the log", session_id=session_id, seq=event.seq, expected=len(existing))

        path = self._dirs[session_id] / "events.jsonl"
        line = canonical_json(event_to_dict(event)) + "\n"
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            if durable:
                os.fsync(fh.fileno())
        existing.append(event)

    def append_events(self, session_id: str, events: Iterable[SessionEvent], durable: bool = True) -> None:
        """Append a batch with a single durability barrier at the end."""
        events = list(events)
        for event in events[:-1]:
            self.append_event(session_id, event, durable=False)
        if events:
            self.append_event(session_id, events[-1], durable=durable)

    # -- metrics and traces ----------------------------------------------------

    def save_metrics(self, session_id: str, metrics: SessionMetrics) -> None:
        directory = self._session_dir(session_id)
        if directory is None:
            raise StoreError("not-found", "unknown session", session_id=session_id)
        if metrics.session_id != session_id:
            raise StoreError("session-mismatch", "metrics carry a different session id", session_id=session_id)
        tmp = directory / "metrics.json.tmp"
        tmp.write_text(canonical_json(session_metrics_to_dict(metrics)) + "\n", encoding="utf-8")
        os.replace(tmp, directory / "metrics.json")

    def load_trace(self, session_id: str) -> TraceBundle:
        """The session's events in seq order plus stored metrics, if any."""
        events = list(self._loaded(session_id))
        if not events:
            raise StoreError("corrupt-log", "session log holds no events", session_id=session_id)
        scenario_id, version, seed = _bundle_header(events)
        metrics = None
        metrics_path = self._dirs[session_id] / "metrics.json"
        if metrics_path.exists():
            try:
                metrics = session_metrics_from_dict(json.loads(metrics_path.read_text(encoding="utf-8")))
            except Exception:
                raise StoreError("corrupt-record", "metrics file does not decode", path=str(metrics_path), offset=0)
        return TraceBundle(
            scenario_id=scenario_id,
            scenario_version=version,
            session_id=session_id,
            seed=seed,
            events=tuple(events),
            metrics=metrics,
        )

    def save_bundle(self, bundle: TraceBundle, durable: bool = True) -> None:
        self.append_events(bundle.session_id, bundle.events, durable=durable)
        if bundle.metrics is not None:
            self.save_metrics(bundle.session_id, bundle.metrics)

    def session_ids(self, scenario_id: Optional[str] = None) -> list[str]:
        found = []
        scenario_dirs = (
            [self.root / scenario_id] if scenario_id is not None else list(self.root.iterdir())
        )
        for scenario_dir in scenario_dirs:
            if not scenario_dir.is_dir():
                continue
            for entry in scenario_dir.iterdir():
                if entry.is_dir() and (entry / "events.jsonl").exists():
                    found.append(entry.name)
        return sorted(found)
