"""Cohort report building and rendering.

A cohort report summarizes many stored sessions: per-metric descriptive
statistics (count / mean / std / min / 25% / 50% / 75% / max) plus a
per-subtask summary block (composite-score mean, std and p-value, and the
success-rate percentage). Stored metrics are never trusted: every number is
recomputed from the raw event logs by replay, and sessions whose stored
metrics disagree are flagged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import engine, scoring
from .core import ModuleKind, SessionMetrics, canonical_json, session_metrics_to_dict
from .errors import MetricError, TrainforgeError
from .scoring import CohortColumnStats
from .store import EventStore

__all__ = ["SubtaskSummary", "CohortReport", "build_report", "render_text"]

# Table-style column headings per module kind.
_KIND_HEADINGS = {ModuleKind.MCQ: "MCQ", ModuleKind.IQ: "Interactive", ModuleKind.LIVE: "LiveScenario"}
_KIND_ORDER = [ModuleKind.MCQ, ModuleKind.IQ, ModuleKind.LIVE]
_STAT_ROWS = ["count", "mean", "std", "min", "25%", "50%", "75%", "max"]


@dataclass(frozen=True)
class SubtaskSummary:
    """One column of the per-subtask block; composite fields are live-only."""

    module_kind: ModuleKind
    session_count: int
    success_rate: float  # cohort mean of per-session rates, as a fraction
    vrtss_mean: Optional[float] = None
    vrtss_std: Optional[float] = None
    vrtss_p_value: Optional[float] = None


@dataclass(frozen=True)
class CohortReport:
    session_ids: tuple[str, ...]
    columns: dict[str, CohortColumnStats]
    subtasks: dict[str, SubtaskSummary]  # keyed by ModuleKind value
    mu0: float
    footnotes: tuple[str, ...] = ()
    mismatched_sessions: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "session_ids": list(self.session_ids),
            "columns": {
                name: {
                    "count": s.count,
                    "mean": s.mean,
                    "std": s.std,
                    "min": s.min,
                    "q25": s.q25,
                    "q50": s.q50,
                    "q75": s.q75,
                    "max": s.max,
                }
                for name, s in self.columns.items()
            },
            "subtasks": {
                kind: {
                    "session_count": row.session_count,
                    "success_rate": row.success_rate,
                    "success_rate_pct": scoring.format_percent(row.success_rate),
                    "vrtss_mean": row.vrtss_mean,
                    "vrtss_std": row.vrtss_std,
                    "vrtss_p_value": row.vrtss_p_value,
                }
                for kind, row in self.subtasks.items()
            },
            "mu0": self.mu0,
            "footnotes": list(self.footnotes),
            "mismatched_sessions": list(self.mismatched_sessions),
        }


def _session_kind_values(metrics: SessionMetrics) -> dict[ModuleKind, dict[str, float]]:
    """Per-kind session values: unweighted mean over the session's modules of that kind."""
    grouped: dict[ModuleKind, list] = {}
    for subtask in metrics.per_subtask:
        grouped.setdefault(subtask.module_kind, []).append(subtask)
    values: dict[ModuleKind, dict[str, float]] = {}
    for kind, subtasks in grouped.items():
        n = len(subtasks)
        row = {
            "success_rate": sum(s.success_rate for s in subtasks) / n,
            "completion_rate": sum(s.completion_rate for s in subtasks) / n,
            "avg_task_time_s": sum(s.avg_task_time_s for s in subtasks) / n,
            "weighted_score": sum(s.weighted_score for s in subtasks) / n,
        }
        if kind is ModuleKind.LIVE:
            row["order_accuracy_x"] = sum(s.order_accuracy_x for s in subtasks) / n
            row["action_correctness_y"] = sum(s.action_correctness_y for s in subtasks) / n
            row["vrtss"] = sum(s.vrtss for s in subtasks) / n
        values[kind] = row
    return values


def build_report(
    store: EventStore,
    scenario_id: Optional[str] = None,
    version: Optional[int] = None,
    mu0: float = 0.5,
    config: Optional[engine.EngineConfig] = None,
) -> CohortReport:
    """Recompute every matching session from its raw events and summarize."""
    footnotes: list[str] = []
    mismatched: list[str] = []
    skipped = 0
    recomputed: list[SessionMetrics] = []
    session_ids: list[str] = []

    for session_id in store.session_ids(scenario_id):
        bundle = store.load_trace(session_id)
        if scenario_id is not None and bundle.scenario_id != scenario_id:
            continue
        if version is not None and bundle.scenario_version != version:
            continue
        if not bundle.complete:
            skipped += 1
            continue
        scenario = store.get_scenario(bundle.scenario_id, bundle.scenario_version)
        try:
            metrics = engine.replay(scenario, bundle.events, config=config)
        except TrainforgeError:
            skipped += 1
            continue
        if bundle.metrics is not None and canonical_json(session_metrics_to_dict(bundle.metrics)) != canonical_json(
            session_metrics_to_dict(metrics)
        ):
            mismatched.append(session_id)
        recomputed.append(metrics)
        session_ids.append(session_id)

    if not recomputed:
        raise MetricError("empty-cohort", "no complete sessions match the filter", scenario_id=scenario_id)
    if skipped:
        footnotes.append(f"{skipped} incomplete or unreplayable session(s) excluded")
    if mismatched:
        footnotes.append(f"stored metrics disagreed with recomputation for: {', '.join(sorted(mismatched))}")

    per_session_kinds = [_session_kind_values(m) for m in recomputed]

    column_values: dict[str, list[float]] = {}
    for kind in _KIND_ORDER:
        rows = [k[kind] for k in per_session_kinds if kind in k]
        if not rows:
            continue
        prefix = kind.value
        for metric in rows[0]:
            column_values[f"{prefix}_{metric}"] = [row[metric] for row in rows]
    column_values["engagement_per_s"] = [m.engagement_frequency for m in recomputed]
    column_values["engagement_per_min"] = [m.engagement_frequency * 60.0 for m in recomputed]
    column_values["total_duration_s"] = [m.total_duration_s for m in recomputed]

    columns = {name: scoring.cohort_stats(values) for name, values in column_values.items()}

    subtasks: dict[str, SubtaskSummary] = {}
    for kind in _KIND_ORDER:
        rows = [k[kind] for k in per_session_kinds if kind in k]
        if not rows:
            continue
        success = sum(r["success_rate"] for r in rows) / len(rows)
        summary = SubtaskSummary(module_kind=kind, session_count=len(rows), success_rate=success)
        if kind is ModuleKind.LIVE:
            vrtss_values = [r["vrtss"] for r in rows]
            stats = scoring.cohort_stats(vrtss_values)
            if stats.count == 1:
                footnotes.append("singleton cohort: composite-score std reported as 0")
            p_value: Optional[float] = None
            try:
                _, p_value = scoring.one_sample_t_test(vrtss_values, mu0)
            except MetricError:
                footnotes.append("composite-score p-value unavailable (degenerate sample)")
            summary = SubtaskSummary(
                module_kind=kind,
                session_count=len(rows),
                success_rate=success,
                vrtss_mean=stats.mean,
                vrtss_std=stats.std,
                vrtss_p_value=p_value,
            )
        subtasks[kind.value] = summary

    return CohortReport(
        session_ids=tuple(session_ids),
        columns=columns,
        subtasks=subtasks,
        mu0=mu0,
        footnotes=tuple(footnotes),
        mismatched_sessions=tuple(sorted(mismatched)),
    )


def _fmt(value: float) -> str:
    return f"{value:.4f}"


def render_text(report: CohortReport) -> str:
    """Aligned text tables: descriptive stats, then the per-subtask block."""
    lines: list[str] = []
    lines.append(f"Cohort report over {len(report.session_ids)} session(s)")
    lines.append("")

    names = list(report.columns)
    label_width = max(len(n) for n in names) + 2
    stat_width = 10
    header = " " * label_width + "".join(f"{s:>{stat_width}}" for s in _STAT_ROWS)
    lines.append(header)
    for name in names:
        s = report.columns[name]
        cells = [f"{s.count:d}", _fmt(s.mean), _fmt(s.std), _fmt(s.min), _fmt(s.q25), _fmt(s.q50), _fmt(s.q75), _fmt(s.max)]
        lines.append(f"{name:<{label_width}}" + "".join(f"{c:>{stat_width}}" for c in cells))
    lines.append("")

    kinds = [k for k in _KIND_ORDER if k.value in report.subtasks]
    col_width = 14
    lines.append(f"Subtask summary (t-test mu0 = {report.mu0}):")
    lines.append(" " * 18 + "".join(f"{_KIND_HEADINGS[k]:>{col_width}}" for k in kinds))

    def row(label: str, cell_for) -> str:
        cells = []
        for kind in kinds:
            value = cell_for(report.subtasks[kind.value])
            cells.append(f"{value:>{col_width}}")
        return f"{label:<18}" + "".join(cells)

    lines.append(row("VRTSS mean", lambda r: _fmt(r.vrtss_mean) if r.vrtss_mean is not None else "n/a"))
    lines.append(row("VRTSS std", lambda r: _fmt(r.vrtss_std) if r.vrtss_std is not None else "n/a"))
    lines.append(row("VRTSS P-Value", lambda r: _fmt(r.vrtss_p_value) if r.vrtss_p_value is not None else "n/a"))
    lines.append(row("Success Rate (%)", lambda r: scoring.format_percent(r.success_rate)))

    if report.footnotes:
        lines.append("")
        lines.append("Notes:")
        for note in report.footnotes:
            lines.append(f"  - {note}")
    return "\n".join(lines) + "\n"
