"""Pure metric computations: completion, timing, success, weighted score,
positional order matching, action correctness, the composite session score,
engagement frequency, and cohort descriptive statistics.

Everything here is stateless; callers own aggregation and persistence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from scipy.special import betainc

from .core import EventKind, Situation, TERMINAL_EVENT_KINDS
from .errors import MetricError

__all__ = [
    "OrderMatchResult",
    "CohortColumnStats",
    "task_completion",
    "average_task_time",
    "success_rate",
    "weighted_score",
    "order_accuracy",
    "action_correctness",
    "vrtss",
    "engagement_frequency",
    "cohort_stats",
    "one_sample_t_test",
    "format_percent",
]


@dataclass(frozen=True)
class OrderMatchResult:
    """Positional match bits against the ground-truth order, and their mean."""

    matches: tuple[int, ...]
    x: float

    def __post_init__(self):
        if self.matches and abs(self.x - sum(self.matches) / len(self.matches)) > 1e-12:
            raise MetricError("inconsistent-order-result", "x must equal mean of matches")


@dataclass(frozen=True)
class CohortColumnStats:
    """count / mean / std / min / 25% / 50% / 75% / max for one metric column."""

    count: int
    mean: float
    std: float
    min: float
    q25: float
    q50: float
    q75: float
    max: float

    def __post_init__(self):
        if self.count < 1:
            raise MetricError("empty-cohort", "stats need at least one value")
        if not (self.min <= self.q25 <= self.q50 <= self.q75 <= self.max):
            raise MetricError("inconsistent-order-result", "quartiles must be ordered")


def task_completion(terminal_kind: Optional[EventKind]) -> int:
    """Completion bit for a finished step.

    1 iff the step reached a submitted answer/action, regardless of whether it
    was correct; timeouts and abandonment (no terminal event) count 0.
    """
    if terminal_kind is None:
        return 0
    if terminal_kind not in TERMINAL_EVENT_KINDS:
        raise MetricError("not-terminal", "event kind does not finish a step", kind=terminal_kind.value)
    return 0 if terminal_kind is EventKind.STEP_TIMED_OUT else 1


def average_task_time(durations: Sequence[float]) -> float:
    """Arithmetic mean of per-task durations in seconds."""
    if len(durations) == 0:
        raise MetricError("no-completed-tasks", "cannot average an empty duration list")
    for d in durations:
        if d < 0:
            raise MetricError("invalid-duration", "durations must be >= 0", duration=d)
    return sum(durations) / len(durations)


def success_rate(successes: int, attempts: int) -> float:
    """Fraction of successful tasks among attempts, in [0,1]."""
    if attempts == 0:
        raise MetricError("no-attempts", "success rate is undefined with zero attempts")
    if successes < 0 or attempts < 0 or successes > attempts:
        raise MetricError("invalid-counts", "need 0 <= successes <= attempts", successes=successes, attempts=attempts)
    return successes / attempts


def weighted_score(step_scores: Iterable[tuple[float, float]]) -> float:
    """Sum of score * weight over steps; an empty input scores 0."""
    total = 0.0
    for score, weight in step_scores:
        if weight <= 0:
            raise MetricError("invalid-weight", "weights must be positive", weight=weight)
        if score < 0:
            raise MetricError("invalid-score", "scores must be >= 0", score=score)
        total += score * weight
    return total


def order_accuracy(expected: Sequence[str], performed: Sequence[str]) -> OrderMatchResult:
    """Strictly positional sequence match.

    ``matches[i]`` is 1 iff ``performed`` has an element at position ``i``
    equal to ``expected[i]``. Missing positions count 0; surplus performed
    elements beyond the ground-truth length are ignored. No alignment or
    edit-distance handling: a single transposition costs both positions.
    """
    if len(expected) == 0:
        raise MetricError("empty-ground-truth", "expected order must be non-empty")
    matches = tuple(
        1 if i < len(performed) and performed[i] == expected[i] else 0
        for i in range(len(expected))
    )
    return OrderMatchResult(matches=matches, x=sum(matches) / len(expected))


def action_correctness(
    situations: Sequence[Situation],
    performed_actions: Mapping[str, str],
) -> float:
    """Fraction of situations whose chosen action was the correct one.

    Situations with no recorded action count as incorrect.
    """
    if len(situations) == 0:
        raise MetricError("empty-ground-truth", "need at least one situation")
    hits = sum(1 for s in situations if performed_actions.get(s.id) == s.correct_action_id)
    return hits / len(situations)


def vrtss(x: float, y: float) -> float:
    """Composite session score: 0.3*X + 0.2*Y + sqrt(0.25*X*Y).

    The linear terms bias the score towards order correctness; the geometric
    term couples the two and keeps the total in [0,1]. The clamp below only
    absorbs floating-point roundoff.
    """
    if not (0.0 <= x <= 1.0) or not (0.0 <= y <= 1.0):
        raise MetricError("metric-out-of-range", "X and Y must lie in [0,1]", x=x, y=y)
    return min(1.0, max(0.0, 0.3 * x + 0.2 * y + math.sqrt(0.25 * x * y)))


def engagement_frequency(interaction_count: int, session_duration_s: float) -> float:
    """Interactions per second over the whole session."""
    if session_duration_s <= 0:
        raise MetricError("invalid-duration", "session duration must be positive", duration=session_duration_s)
    if interaction_count < 0:
        raise MetricError("invalid-counts", "interaction count must be >= 0")
    return interaction_count / session_duration_s


def _quantile(sorted_values: Sequence[float], q: float) -> float:
    # Linear interpolation between closest ranks (the numpy "linear" method).
    pos = (len(sorted_values) - 1) * q
    lo = math.floor(pos)
    hi = math.ceil(pos)
    if lo == hi:
        return sorted_values[lo]
    frac = pos - lo
    return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo])


def cohort_stats(values: Sequence[float]) -> CohortColumnStats:
    """Descriptive statistics for one metric across a cohort.

    Std is the sample standard deviation (n-1 denominator); a singleton
    cohort reports std 0 so single-session reports still render.
    """
    if len(values) == 0:
        raise MetricError("empty-cohort", "cannot summarize an empty cohort")
    xs = sorted(float(v) for v in values)
    n = len(xs)
    mean = sum(xs) / n
    if n > 1:
        std = math.sqrt(sum((v - mean) ** 2 for v in xs) / (n - 1))
    else:
        std = 0.0
    return CohortColumnStats(
        count=n,
        mean=mean,
        std=std,
        min=xs[0],
        q25=_quantile(xs, 0.25),
        q50=_quantile(xs, 0.50),
        q75=_quantile(xs, 0.75),
        max=xs[-1],
    )


def one_sample_t_test(values: Sequence[float], mu0: float) -> tuple[float, float]:
    """Two-sided one-sample t-test of mean(values) against ``mu0``.

    Returns (t statistic, p value) with n-1 degrees of freedom. The p value
    comes from the regularized incomplete beta form of the Student-t survival
    function.
    """
    n = len(values)
    if n < 2:
        raise MetricError("degenerate-sample", "t-test needs at least two values", n=n)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    if var == 0.0:
        raise MetricError("degenerate-sample", "t-test needs nonzero sample variance")
    t = (mean - mu0) / math.sqrt(var / n)
    df = n - 1
    # two-sided p = I_{df/(df+t^2)}(df/2, 1/2)
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return t, min(1.0, max(0.0, p))


def format_percent(fraction: float) -> str:
    """Render a [0,1] fraction the way reports print success rates: 0.4 -> '40.00%'."""
    return f"{fraction * 100:.2f}%"
