"""Scenario file (.scn) parsing and validation.

A scenario file is a UTF-8 JSON document; the schema is documented in
``docs/scenario-format.md``. Parsing never raises on bad input: every
problem becomes a :class:`ParseDiagnostic` with a location that indexes
into the source, either ``line L, column C`` for syntax errors or a JSON
path such as ``$.modules[0].items[2].options[1].correct`` for semantic ones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional

from . import core
from .core import Scenario
from .errors import DomainError

__all__ = ["Severity", "ParseDiagnostic", "ParseResult", "parse_scenario", "validate_scenario", "scenario_to_text"]


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: Severity
    location: str
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity.value}[{self.code}] at {self.location}: {self.message}"


@dataclass(frozen=True)
class ParseResult:
    """Outcome of a parse: a scenario iff no Error diagnostics were found."""

    scenario: Optional[Scenario]
    diagnostics: tuple[ParseDiagnostic, ...]

    @property
    def ok(self) -> bool:
        return self.scenario is not None

    @property
    def errors(self) -> tuple[ParseDiagnostic, ...]:
        return tuple(d for d in self.diagnostics if d.severity is Severity.ERROR)

    @property
    def warnings(self) -> tuple[ParseDiagnostic, ...]:
        return tuple(d for d in self.diagnostics if d.severity is Severity.WARNING)


_ROOT_FIELDS = {"id", "title", "version", "modules"}
_MODULE_FIELDS = {"kind", "items", "situations"}
_MCQ_FIELDS = {"id", "prompt", "asset_refs", "options", "weight", "time_limit_s"}
_OPTION_FIELDS = {"id", "text", "correct", "distractor_rank"}
_IQ_FIELDS = {"id", "prompt", "targets", "correct_target_ids", "weight", "time_limit_s", "hint"}
_TARGET_FIELDS = {"id", "label", "asset_ref"}
_SITUATION_FIELDS = {"id", "prompt", "action_options", "correct_action_id", "weight", "base_time_limit_s", "hint"}
_ACTION_FIELDS = {"id", "label", "distractor_rank"}


class _Walker:
    """Collects diagnostics while checking the raw JSON tree against the schema."""

    def __init__(self) -> None:
        self.diagnostics: list[ParseDiagnostic] = []

    def error(self, location: str, code: str, message: str) -> None:
        self.diagnostics.append(ParseDiagnostic(Severity.ERROR, location, code, message))

    def warn(self, location: str, code: str, message: str) -> None:
        self.diagnostics.append(ParseDiagnostic(Severity.WARNING, location, code, message))

    # -- field helpers ------------------------------------------------------

    def unknown_fields(self, obj: dict, known: set, path: str) -> None:
        for key in obj:
            if key not in known:
                self.warn(f"{path}.{key}", "unknown-field", f"unknown field {key!r} is ignored")

    def req_str(self, obj: dict, key: str, path: str) -> Optional[str]:
        if key not in obj:
            self.error(path, "missing-field", f"required field {key!r} is missing")
            return None
        value = obj[key]
        if not isinstance(value, str) or value == "":
            self.error(f"{path}.{key}", "invalid-type", f"{key!r} must be a non-empty string")
            return None
        return value

    def opt_str(self, obj: dict, key: str, path: str) -> Optional[str]:
        value = obj.get(key)
        if value is None:
            return None
        if not isinstance(value, str):
            self.error(f"{path}.{key}", "invalid-type", f"{key!r} must be a string")
            return None
        return value

    def opt_number(self, obj: dict, key: str, path: str, default: float) -> Optional[float]:
        if key not in obj:
            return default
        value = obj[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.error(f"{path}.{key}", "invalid-type", f"{key!r} must be a number")
            return None
        return float(value)

    def positive(self, value: Optional[float], key: str, path: str, code: str) -> Optional[float]:
        if value is None:
            return None
        if value <= 0:
            self.error(f"{path}.{key}", code, f"{key!r} must be positive, got {value}")
            return None
        return value

    def req_positive(self, obj: dict, key: str, path: str, code: str) -> Optional[float]:
        if key not in obj:
            self.error(path, "missing-field", f"required field {key!r} is missing")
            return None
        return self.positive(self.opt_number(obj, key, path, 0.0), key, path, code)

    def req_list(self, obj: dict, key: str, path: str) -> Optional[list]:
        if key not in obj:
            self.error(path, "missing-field", f"required field {key!r} is missing")
            return None
        value = obj[key]
        if not isinstance(value, list):
            self.error(f"{path}.{key}", "invalid-type", f"{key!r} must be a list")
            return None
        return value

    def rank(self, obj: dict, path: str) -> None:
        value = obj.get("distractor_rank", 0)
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            self.error(f"{path}.distractor_rank", "invalid-rank", "distractor_rank must be an integer >= 0")

    # -- schema walk --------------------------------------------------------

    def walk_root(self, raw: Any) -> None:
        if not isinstance(raw, dict):
            self.error("$", "invalid-document", "scenario document must be a JSON object")
            return
        self.unknown_fields(raw, _ROOT_FIELDS, "$")
        self.req_str(raw, "id", "$")
        version = raw.get("version", 1)
        if isinstance(version, bool) or not isinstance(version, int) or version < 1:
            self.error("$.version", "invalid-version", "version must be a positive integer")
        modules = self.req_list(raw, "modules", "$")
        if modules is None:
            return
        if len(modules) == 0:
            self.error("$.modules", "empty-scenario", "scenario needs at least one module")
        seen_item_ids: dict[str, str] = {}
        for mi, module in enumerate(modules):
            self.walk_module(module, f"$.modules[{mi}]", seen_item_ids)

    def walk_module(self, module: Any, path: str, seen_item_ids: dict[str, str]) -> None:
        if not isinstance(module, dict):
            self.error(path, "invalid-type", "module must be an object")
            return
        self.unknown_fields(module, _MODULE_FIELDS, path)
        kind = module.get("kind")
        if kind == "mcq" or kind == "iq":
            items = self.req_list(module, "items", path)
            if items is None:
                return
            if len(items) == 0:
                self.error(f"{path}.items", "empty-module", "module item list is empty")
            for ii, item in enumerate(items):
                item_path = f"{path}.items[{ii}]"
                if kind == "mcq":
                    self.walk_mcq_item(item, item_path, seen_item_ids)
                else:
                    self.walk_iq_item(item, item_path, seen_item_ids)
        elif kind == "live":
            situations = self.req_list(module, "situations", path)
            if situations is None:
                return
            if len(situations) == 0:
                self.error(f"{path}.situations", "empty-module", "live situation list is empty")
            for si, situation in enumerate(situations):
                self.walk_situation(situation, f"{path}.situations[{si}]", seen_item_ids)
        else:
            self.error(f"{path}.kind", "unknown-module-kind", f"module kind must be 'mcq', 'iq' or 'live', got {kind!r}")

    def record_item_id(self, item_id: Optional[str], path: str, seen: dict[str, str]) -> None:
        if item_id is None:
            return
        if item_id in seen:
            self.error(f"{path}.id", "duplicate-id", f"id {item_id!r} already used at {seen[item_id]}")
        else:
            seen[item_id] = path

    def walk_mcq_item(self, item: Any, path: str, seen_item_ids: dict[str, str]) -> None:
        if not isinstance(item, dict):
            self.error(path, "invalid-type", "MCQ item must be an object")
            return
        self.unknown_fields(item, _MCQ_FIELDS, path)
        self.record_item_id(self.req_str(item, "id", path), path, seen_item_ids)
        self.req_str(item, "prompt", path)
        refs = item.get("asset_refs", [])
        if not isinstance(refs, list) or any(not isinstance(r, str) for r in refs):
            self.error(f"{path}.asset_refs", "invalid-type", "asset_refs must be a list of strings")
        self.positive(self.opt_number(item, "weight", path, 1.0), "weight", path, "invalid-weight")
        self.req_positive(item, "time_limit_s", path, "invalid-time-limit")
        options = self.req_list(item, "options", path)
        if options is None:
            return
        if not 2 <= len(options) <= 6:
            self.error(f"{path}.options", "option-count", f"MCQ items take 2 to 6 options, got {len(options)}")
        seen_option_ids: dict[str, str] = {}
        correct_locations: list[str] = []
        for oi, option in enumerate(options):
            option_path = f"{path}.options[{oi}]"
            if not isinstance(option, dict):
                self.error(option_path, "invalid-type", "option must be an object")
                continue
            self.unknown_fields(option, _OPTION_FIELDS, option_path)
            oid = self.req_str(option, "id", option_path)
            if oid is not None:
                if oid in seen_option_ids:
                    self.error(f"{option_path}.id", "duplicate-id", f"option id {oid!r} already used")
                seen_option_ids[oid] = option_path
            self.rank(option, option_path)
            correct = option.get("correct", False)
            if not isinstance(correct, bool):
                self.error(f"{option_path}.correct", "invalid-type", "'correct' must be a boolean")
                continue
            if correct:
                correct_locations.append(f"{option_path}.correct")
                if option.get("distractor_rank", 0) != 0:
                    self.error(f"{option_path}.distractor_rank", "correct-rank", "the correct option must keep distractor_rank 0")
        if len(correct_locations) == 0:
            self.error(f"{path}.options", "no-correct-option", "exactly one option must be flagged correct")
        for extra in correct_locations[1:]:
            self.error(extra, "multiple-correct", "more than one option is flagged correct")

    def walk_iq_item(self, item: Any, path: str, seen_item_ids: dict[str, str]) -> None:
        if not isinstance(item, dict):
            self.error(path, "invalid-type", "IQ item must be an object")
            return
        self.unknown_fields(item, _IQ_FIELDS, path)
        self.record_item_id(self.req_str(item, "id", path), path, seen_item_ids)
        self.req_str(item, "prompt", path)
        self.opt_str(item, "hint", path)
        self.positive(self.opt_number(item, "weight", path, 1.0), "weight", path, "invalid-weight")
        self.req_positive(item, "time_limit_s", path, "invalid-time-limit")
        targets = self.req_list(item, "targets", path)
        target_ids: set[str] = set()
        if targets is not None:
            if len(targets) < 2:
                self.error(f"{path}.targets", "target-count", f"IQ items need at least 2 targets, got {len(targets)}")
            for ti, target in enumerate(targets):
                target_path = f"{path}.targets[{ti}]"
                if not isinstance(target, dict):
                    self.error(target_path, "invalid-type", "target must be an object")
                    continue
                self.unknown_fields(target, _TARGET_FIELDS, target_path)
                tid = self.req_str(target, "id", target_path)
                if tid is not None:
                    if tid in target_ids:
                        self.error(f"{target_path}.id", "duplicate-id", f"target id {tid!r} already used")
                    target_ids.add(tid)
        correct_ids = self.req_list(item, "correct_target_ids", path)
        if correct_ids is not None:
            if len(correct_ids) == 0:
                self.error(f"{path}.correct_target_ids", "no-correct-target", "at least one correct target id is required")
            for ci, cid in enumerate(correct_ids):
                if not isinstance(cid, str):
                    self.error(f"{path}.correct_target_ids[{ci}]", "invalid-type", "target ids must be strings")
                elif targets is not None and cid not in target_ids:
                    self.error(f"{path}.correct_target_ids[{ci}]", "dangling-target", f"unknown target id {cid!r}")

    def walk_situation(self, situation: Any, path: str, seen_item_ids: dict[str, str]) -> None:
        if not isinstance(situation, dict):
            self.error(path, "invalid-type", "situation must be an object")
            return
        self.unknown_fields(situation, _SITUATION_FIELDS, path)
        self.record_item_id(self.req_str(situation, "id", path), path, seen_item_ids)
        self.req_str(situation, "prompt", path)
        self.opt_str(situation, "hint", path)
        self.positive(self.opt_number(situation, "weight", path, 1.0), "weight", path, "invalid-weight")
        self.req_positive(situation, "base_time_limit_s", path, "invalid-time-limit")
        actions = self.req_list(situation, "action_options", path)
        action_ranks: dict[str, Any] = {}
        if actions is not None:
            if not 2 <= len(actions) <= 6:
                self.error(f"{path}.action_options", "action-count", f"situations take 2 to 6 action options, got {len(actions)}")
            elif len(actions) != 4:
                self.warn(f"{path}.action_options", "noncanonical-action-count", f"canonical situations present 4 actions, got {len(actions)}")
            for ai, action in enumerate(actions):
                action_path = f"{path}.action_options[{ai}]"
                if not isinstance(action, dict):
                    self.error(action_path, "invalid-type", "action option must be an object")
                    continue
                self.unknown_fields(action, _ACTION_FIELDS, action_path)
                aid = self.req_str(action, "id", action_path)
                self.rank(action, action_path)
                if aid is not None:
                    if aid in action_ranks:
                        self.error(f"{action_path}.id", "duplicate-id", f"action id {aid!r} already used")
                    action_ranks[aid] = action.get("distractor_rank", 0)
        correct_id = self.req_str(situation, "correct_action_id", path)
        if correct_id is not None and actions is not None:
            if correct_id not in action_ranks:
                self.error(f"{path}.correct_action_id", "dangling-correct-action", f"correct_action_id {correct_id!r} not among action_options")
            elif action_ranks[correct_id] != 0:
                self.error(f"{path}.correct_action_id", "correct-rank", "the correct action must keep distractor_rank 0")


def parse_scenario(source: "str | bytes") -> ParseResult:
    """Parse scenario file text into a Scenario, or into located diagnostics."""
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            diag = ParseDiagnostic(Severity.ERROR, f"byte {exc.start}", "invalid-encoding", "scenario files must be UTF-8 text")
            return ParseResult(None, (diag,))
    try:
        raw = json.loads(source)
    except json.JSONDecodeError as exc:
        diag = ParseDiagnostic(
            Severity.ERROR, f"line {exc.lineno}, column {exc.colno}", "syntax-error", exc.msg
        )
        return ParseResult(None, (diag,))

    walker = _Walker()
    walker.walk_root(raw)
    if any(d.severity is Severity.ERROR for d in walker.diagnostics):
        return ParseResult(None, tuple(walker.diagnostics))

    try:
        scenario = core.scenario_from_dict(raw)
    except DomainError as exc:
        # The walk mirrors every constructor invariant, so this is a parser
        # bug if it ever fires; surface it as a located diagnostic anyway.
        walker.error("$", exc.code, exc.message)
        return ParseResult(None, tuple(walker.diagnostics))
    return ParseResult(scenario, tuple(walker.diagnostics))


def validate_scenario(scenario: Scenario) -> list[ParseDiagnostic]:
    """Cross-reference checks for an already-constructed Scenario.

    Empty iff the value satisfies every invariant; useful for values built
    or mutated outside the parser.
    """
    walker = _Walker()
    walker.walk_root(core.scenario_to_dict(scenario))
    return list(walker.diagnostics)


def scenario_to_text(scenario: Scenario) -> str:
    """Canonical .scn rendering; parsing it back yields an equal Scenario."""
    return json.dumps(core.scenario_to_dict(scenario), indent=2, ensure_ascii=False) + "\n"
