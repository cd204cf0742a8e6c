"""Run a scenario end to end and write its artifact directory."""

from __future__ import annotations

import csv
import json
import logging
from importlib import resources
from pathlib import Path

import numpy as np

from ..forecast import modelio
from ..forecast.pipeline import PREDICTED_AVG, LinearForecaster, NeuralForecaster
from ..metrics import MetricStore
from ..sim import CPU_METRIC, simulate
from ..trace import WorkloadTrace
from .control import ACTUAL_AVG, ACTUAL_SUM, CLUSTER_ACTIVE, CLUSTER_SIZE, ControlLoop
from .report import overhead_report, percentile_report, write_overhead, write_percentiles
from .scenario import Scenario

logger = logging.getLogger(__name__)

# files whose content depends on wall-clock time
NONDETERMINISTIC = frozenset({"overhead.csv"})


def packaged_model_path(kind: str) -> Path:
    return Path(str(resources.files("predscale.models").joinpath(f"{kind}.txt")))


def make_forecaster(scenario: Scenario):
    if scenario.policy == "static":
        return None
    if scenario.policy == "lr":
        return LinearForecaster()
    path = scenario.model or packaged_model_path(scenario.policy)
    params = modelio.load(path)
    if params.kind != scenario.policy:
        raise ValueError(f"model file {path} holds a {params.kind} model, policy is {scenario.policy}")
    return NeuralForecaster(params, scenario.forecast.scale)


def run(scenario: Scenario) -> Path:
    if scenario.mode == "live":
        from .live import run_live

        return run_live(scenario)
    return run_sim(scenario)


def run_sim(scenario: Scenario) -> Path:
    trace = WorkloadTrace.load(scenario.trace, scenario.segment_seconds)
    store = MetricStore()
    loop = make_control_loop(scenario, store)
    result = simulate(trace, loop, scenario.sim, store=store)
    extra = {
        "requests_injected": result.injected,
        "requests_completed": result.completed,
        "requests_queued_at_end": result.queued_at_end,
    }
    offered = trace.per_second()[: result.duration] * scenario.sim.threads * scenario.sim.per_request_cost
    return write_artifacts(scenario, store, loop, result.responses, offered / scenario.sim.instance_capacity, extra)


def make_control_loop(scenario: Scenario, store: MetricStore) -> ControlLoop:
    return ControlLoop(
        scenario.policy,
        make_forecaster(scenario),
        scenario.forecast,
        scenario.alarm,
        scenario.orchestrator,
        store,
    )


def write_artifacts(scenario: Scenario, store: MetricStore, loop: ControlLoop, responses, offered_load: np.ndarray, extra: dict) -> Path:
    """Write every CSV plus ``summary.json``.

    ``offered_load`` is per-second demand in units of one instance's capacity.
    """
    out = Path(scenario.output)
    out.mkdir(parents=True, exist_ok=True)
    write_store_csvs(out, store)
    write_actions(out / "actions.csv", loop)
    responses.to_csv(out / "responses.csv")

    window = responses.window(scenario.report.window_start * 60, scenario.report.window_end * 60)
    if len(responses):
        columns = {"full": percentile_report(responses)}
        if len(window):
            columns = {"window": percentile_report(window), **columns}
        write_percentiles(out / "percentiles.csv", columns)
    if loop.timings:
        write_overhead(out / "overhead.csv", overhead_report(loop.timings), scenario.policy)

    over = np.nonzero(offered_load > 2.0)[0]
    scale_outs = loop.effective_scale_outs
    first = scale_outs[0] if scale_outs else None
    summary = {
        "mode": scenario.mode,
        "policy": scenario.policy,
        "seed": scenario.seed,
        "duration_s": int(offered_load.size),
        "first_scale_out_s": first.timestamp if first else None,
        "first_scale_out_serving_s": (first.timestamp + scenario.orchestrator.boot_delay) if first else None,
        "offered_load_above_2x_capacity_s": int(over[0]) if over.size else None,
        "effective_actions": [
            {"t": o.timestamp, "action": o.action.value, "instances": list(o.instance_ids)}
            for o in loop.orchestrator.effective_actions
        ],
        "report_window_min": [scenario.report.window_start, scenario.report.window_end],
        **extra,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    logger.info("%s run finished: %s", scenario.policy, out)
    return out


def write_store_csvs(out: Path, store: MetricStore) -> None:
    with open(out / "cpu_instances.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "instance_id", "value"])
        rows = []
        for key in store.keys(CPU_METRIC):
            for p in store.query(key, 0, 2**62).points:
                rows.append((p.timestamp, key.dim("instance_id"), p.value))
        for t, iid, v in sorted(rows):
            w.writerow([t, iid, repr(v)])
    for key, name in ((ACTUAL_SUM, "cpu_sum.csv"), (ACTUAL_AVG, "cpu_avg.csv"), (PREDICTED_AVG, "pred_avg.csv")):
        if key in store:
            store.to_csv(key, out / name)
    if CLUSTER_SIZE in store:
        size = store.query(CLUSTER_SIZE, 0, 2**62).points
        active = store.query(CLUSTER_ACTIVE, 0, 2**62).points
        with open(out / "cluster_size.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["timestamp", "size", "active"])
            for s, a in zip(size, active):
                w.writerow([s.timestamp, int(s.value), int(a.value)])


def write_actions(path: Path, loop: ControlLoop) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "alarm_id", "action", "outcome", "instance_ids"])
        for d in loop.decisions:
            o = d.outcome
            w.writerow([o.timestamp, d.notification.alarm_id, o.action.value, o.outcome.value, " ".join(o.instance_ids)])
