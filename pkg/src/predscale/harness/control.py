"""The elasticity control loop run once per metric period."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

from ..alarm import Action, AlarmDefinition, AlarmEvaluator, Notification
from ..forecast.pipeline import PREDICTED_AVG, ForecastConfig, InsufficientWindow, forecast_cluster_average
from ..metrics import MetricStore, SeriesKey
from ..orchestrator import ActionOutcome, Orchestrator, OrchestratorConfig
from ..sim import cpu_key
from .report import ActivationTiming
from .scenario import AlarmConfig

logger = logging.getLogger(__name__)

ACTUAL_AVG = SeriesKey("cpu.avg")
ACTUAL_SUM = SeriesKey("cpu.sum")
CLUSTER_SIZE = SeriesKey("cluster.size")
CLUSTER_ACTIVE = SeriesKey("cluster.active")


def alarm_definitions(policy: str, cfg: AlarmConfig) -> list[AlarmDefinition]:
    """Scale-out watches the forecast (or the actual average for ``static``);
    scale-in always watches the actual average."""
    out_metric = ACTUAL_AVG if policy == "static" else PREDICTED_AVG
    return [
        AlarmDefinition("scale-in", ACTUAL_AVG, "<", cfg.scale_in_threshold, cfg.periods, Action.SCALE_IN),
        AlarmDefinition("scale-out", out_metric, ">", cfg.scale_out_threshold, cfg.periods, Action.SCALE_OUT),
    ]


@dataclass(frozen=True)
class Decision:
    notification: Notification
    outcome: ActionOutcome


class ControlLoop:
    """Glue between the metric store, forecaster, alarms and orchestrator.

    ``forecaster`` is ``None`` for the reactive policy.
    """

    def __init__(
        self,
        policy: str,
        forecaster,
        forecast_cfg: ForecastConfig,
        alarm_cfg: AlarmConfig,
        orchestrator_cfg: OrchestratorConfig,
        store: MetricStore,
        clock=time.perf_counter,
    ):
        self.policy = policy
        self.forecaster = forecaster
        self.fcfg = forecast_cfg
        self.store = store
        self.orchestrator = Orchestrator(orchestrator_cfg)
        self.evaluator = AlarmEvaluator(
            alarm_definitions(policy, alarm_cfg), store, offsets={PREDICTED_AVG: forecast_cfg.horizon_seconds}
        )
        self.decisions: list[Decision] = []
        self.timings: list[ActivationTiming] = []
        self._clock = clock

    # sim.Controller protocol -------------------------------------------------

    def active_ids(self, now: int) -> list[str]:
        self.orchestrator.tick(now)
        return [i.id for i in self.orchestrator.active()]

    def on_period(self, now: int) -> None:
        self.orchestrator.tick(now)
        active = [i.id for i in self.orchestrator.active()]
        self._record_actuals(now, active)
        if self.forecaster is not None and active:
            self._forecast(now, active)
        for note in self.evaluator.poll(now):
            outcome = self.orchestrator.handle(note.action, now)
            self.decisions.append(Decision(note, outcome))
            logger.info("t=%d %s -> %s %s", now, note.alarm_id, outcome.outcome.value, outcome.instance_ids)
        self.store.put(CLUSTER_SIZE, now, self.orchestrator.state.size)
        self.store.put(CLUSTER_ACTIVE, now, self.orchestrator.state.active_count)

    # -------------------------------------------------------------------------

    def _record_actuals(self, now: int, active: list[str]) -> None:
        samples = []
        for key in self.store.keys("cpu.percent"):
            p = self.store.latest(key)
            if p is not None and p.timestamp == now:
                samples.append(p.value)
        if samples:
            self.store.put(ACTUAL_AVG, now, sum(samples) / len(samples))
        keys = [cpu_key(i) for i in active if cpu_key(i) in self.store]
        if keys:
            agg = self.store.aggregate_sum(keys, now, now, self.fcfg.sample_period)
            if agg.points:
                self.store.put(ACTUAL_SUM, now, agg.points[-1].value)

    def _forecast(self, now: int, active: list[str]) -> None:
        t0 = self._clock()
        keys = [cpu_key(i) for i in active if cpu_key(i) in self.store]
        if not keys:
            return
        period = self.fcfg.sample_period
        window = self.store.aggregate_sum(keys, now - (self.fcfg.window - 1) * period, now, period)
        t1 = self._clock()
        try:
            # forecast and write-back are timed apart, so ingest separately
            point = forecast_cluster_average(window, len(active), self.forecaster, self.fcfg)
        except InsufficientWindow:
            logger.debug("t=%d: %d samples, forecasting suppressed", now, len(window))
            return
        t2 = self._clock()
        self.store.ingest(PREDICTED_AVG, point)
        t3 = self._clock()
        self.timings.append(ActivationTiming((t1 - t0) * 1e3, (t2 - t1) * 1e3, (t3 - t2) * 1e3))

    @property
    def effective_scale_outs(self) -> list[ActionOutcome]:
        return [
            o for o in self.orchestrator.effective_actions if o.action is Action.SCALE_OUT
        ]
