"""Threshold alarms that fire after N consecutive violating samples."""

from __future__ import annotations

import enum
import logging
import math
import operator
from dataclasses import dataclass, replace
from typing import Iterable, Optional

from .metrics import MetricPoint, MetricStore, SeriesKey, UnknownSeries

logger = logging.getLogger(__name__)


class StaleSample(ValueError):
    pass


class Action(str, enum.Enum):
    SCALE_OUT = "scale_out"
    SCALE_IN = "scale_in"


class Status(str, enum.Enum):
    OK = "OK"
    ALARM = "ALARM"


_COMPARATORS = {">": operator.gt, "<": operator.lt}


@dataclass(frozen=True)
class AlarmDefinition:
    id: str
    metric: SeriesKey
    comparator: str
    threshold: float
    required_periods: int = 3
    action: Action = Action.SCALE_OUT

    def __post_init__(self):
        if self.comparator not in _COMPARATORS:
            raise ValueError(f"comparator must be '>' or '<', got {self.comparator!r}")
        if self.required_periods < 1:
            raise ValueError("required_periods must be >= 1")
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")
        object.__setattr__(self, "action", Action(self.action))

    def violated_by(self, value: float) -> bool:
        return _COMPARATORS[self.comparator](value, self.threshold)


@dataclass(frozen=True)
class AlarmState:
    definition_id: str
    consecutive_violations: int = 0
    status: Status = Status.OK
    last_evaluated: int = -1


@dataclass(frozen=True)
class Notification:
    alarm_id: str
    action: Action
    timestamp: int


def evaluate(
    state: AlarmState, definition: AlarmDefinition, sample: MetricPoint
) -> tuple[AlarmState, Optional[Notification]]:
    """Pure state transition for one sample.

    A violation extends the current run; anything else resets it. When the run
    reaches ``required_periods`` one notification is emitted and the counter
    starts over, so a sustained violation fires once per full run.
    """
    if sample.timestamp <= state.last_evaluated:
        raise StaleSample(
            f"alarm {definition.id}: sample t={sample.timestamp} not after {state.last_evaluated}"
        )
    if not definition.violated_by(sample.value):
        return replace(state, consecutive_violations=0, status=Status.OK, last_evaluated=sample.timestamp), None
    count = state.consecutive_violations + 1
    if count >= definition.required_periods:
        note = Notification(definition.id, definition.action, sample.timestamp)
        return replace(state, consecutive_violations=0, status=Status.ALARM, last_evaluated=sample.timestamp), note
    return replace(state, consecutive_violations=count, status=Status.OK, last_evaluated=sample.timestamp), None


class AlarmEvaluator:
    """Evaluates a set of alarms against the newest sample of their metrics.

    Call :meth:`poll` once per sample period. A metric with no sample newer
    than the last evaluation is skipped and its counter is left untouched.
    ``offsets`` lets a metric be read ahead of the clock, for forecasts that
    are stamped at their target time.
    """

    def __init__(
        self,
        definitions: Iterable[AlarmDefinition],
        store: MetricStore,
        offsets: dict[SeriesKey, int] | None = None,
    ):
        self.definitions = sorted(definitions, key=lambda d: d.id)
        ids = [d.id for d in self.definitions]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate alarm ids: {ids}")
        self.store = store
        self.states = {d.id: AlarmState(d.id) for d in self.definitions}
        self.offsets = dict(offsets or {})

    def _sample(self, d: AlarmDefinition, now: int | None) -> MetricPoint | None:
        try:
            if now is None:
                return self.store.latest(d.metric)
            last = self.states[d.id].last_evaluated
            horizon = now + self.offsets.get(d.metric, 0)
            if horizon <= last:
                return None
            pts = self.store.query(d.metric, last + 1, horizon).points
            return pts[-1] if pts else None
        except UnknownSeries:
            return None

    def poll(self, now: int | None = None) -> list[Notification]:
        notes = []
        for d in self.definitions:
            sample = self._sample(d, now)
            state = self.states[d.id]
            if sample is None or sample.timestamp <= state.last_evaluated:
                logger.debug("alarm %s: no new sample at %s", d.id, now)
                continue
            self.states[d.id], note = evaluate(state, d, sample)
            if note is not None:
                notes.append(note)
        return notes


def evaluate_stream(
    definitions: Iterable[AlarmDefinition],
    store: MetricStore,
    schedule: Iterable[int],
    offsets: dict[SeriesKey, int] | None = None,
) -> list[Notification]:
    """Run an evaluator over a fixed schedule of evaluation instants."""
    ev = AlarmEvaluator(definitions, store, offsets)
    out = []
    for now in schedule:
        out.extend(ev.poll(now))
    return out
