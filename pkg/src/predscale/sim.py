"""Deterministic 1-second-step simulator of a load-balanced instance fleet.

Each instance is a FIFO fluid queue. Per second it receives the requests of
the client sessions routed to it, spread evenly over the second, and drains
``instance_capacity`` CPU-seconds of backlog. Per-request response times are
the work queued ahead of the request divided by capacity, plus its own
service time.

Client behaviour follows a session model: every client thread sends the
trace rate, its total request budget is split into ``sessions`` equal
contiguous chunks, and each chunk is routed round-robin as a unit.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator, Protocol, Sequence

import numpy as np

from .metrics import MetricPoint, MetricStore, SeriesKey
from .trace import WorkloadTrace

logger = logging.getLogger(__name__)

CPU_METRIC = "cpu.percent"


def cpu_key(instance_id: str) -> SeriesKey:
    return SeriesKey.of(CPU_METRIC, instance_id=instance_id)


class ConfigError(ValueError):
    pass


class NoActiveInstance(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    per_request_cost: float = 0.01  # CPU-seconds
    instance_capacity: float = 1.0  # CPU-seconds per second
    metric_period: int = 60
    threads: int = 6
    sessions: int = 1000
    rng_seed: int = 0

    def __post_init__(self):
        if self.per_request_cost <= 0 or self.instance_capacity <= 0:
            raise ConfigError("per_request_cost and instance_capacity must be positive")
        if self.metric_period <= 0 or self.threads < 1 or self.sessions < 1:
            raise ConfigError(f"invalid simulator config {self!r}")

    @property
    def service_time(self) -> float:
        return self.per_request_cost / self.instance_capacity


# ---------------------------------------------------------------------------
# Round-robin session routing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SessionRouterState:
    next_index: int = 0


def route_session(router: SessionRouterState, active: Sequence[str]) -> tuple[str, SessionRouterState]:
    if not active:
        raise NoActiveInstance("no active instance to route a session to")
    idx = router.next_index % len(active)
    return active[idx], replace(router, next_index=(idx + 1) % len(active))


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResponseRecord:
    send_ts: float
    completion_ts: float
    response_ms: float
    instance_id: str


@dataclass
class ResponseLog:
    """Column store of response records, ordered by injection."""

    send_ts: np.ndarray
    completion_ts: np.ndarray
    instance_idx: np.ndarray
    instance_ids: list[str]

    @property
    def response_ms(self) -> np.ndarray:
        return (self.completion_ts - self.send_ts) * 1000.0

    def __len__(self) -> int:
        return int(self.send_ts.shape[0])

    def __iter__(self) -> Iterator[ResponseRecord]:
        rt = self.response_ms
        for k in range(len(self)):
            yield ResponseRecord(
                float(self.send_ts[k]),
                float(self.completion_ts[k]),
                float(rt[k]),
                self.instance_ids[self.instance_idx[k]],
            )

    def window(self, t_start: float, t_end: float) -> "ResponseLog":
        """Records whose send time falls in ``[t_start, t_end)``."""
        m = (self.send_ts >= t_start) & (self.send_ts < t_end)
        return ResponseLog(self.send_ts[m], self.completion_ts[m], self.instance_idx[m], self.instance_ids)

    def to_csv(self, path: str | Path) -> None:
        rt = self.response_ms
        with open(path, "w", newline="") as fh:
            fh.write("send_ts,completion_ts,response_ms,instance_id\n")
            ids = self.instance_ids
            fh.writelines(
                f"{s:.6f},{c:.6f},{r:.6f},{ids[i]}\n"
                for s, c, r, i in zip(self.send_ts.tolist(), self.completion_ts.tolist(), rt.tolist(), self.instance_idx.tolist())
            )

    @classmethod
    def from_csv(cls, path: str | Path) -> "ResponseLog":
        send, comp, idx = [], [], []
        ids: dict[str, int] = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                send.append(float(row["send_ts"]))
                comp.append(float(row["completion_ts"]))
                idx.append(ids.setdefault(row["instance_id"], len(ids)))
        return cls(np.asarray(send), np.asarray(comp), np.asarray(idx, dtype=np.int64), list(ids))


@dataclass
class SimResult:
    responses: ResponseLog
    injected: int
    completed: int
    queued_at_end: int
    work_arrived: float  # CPU-s delivered to instances, requeues included
    work_processed: float
    work_dropped: float  # backlog discarded with terminated instances (requests are requeued)
    backlog_at_end: float
    duration: int
    emissions: list[tuple[SeriesKey, MetricPoint]]
    max_work_imbalance: float  # worst |arrived - processed - dropped - backlog| over all steps


# ---------------------------------------------------------------------------
# Controller hooks
# ---------------------------------------------------------------------------


class Controller(Protocol):
    def active_ids(self, now: int) -> list[str]:
        """Instances that may receive traffic during second ``now``."""

    def on_period(self, now: int) -> None:
        """Called at each metric boundary after the CPU samples are stored."""


class FixedCluster:
    """A controller that never scales."""

    def __init__(self, ids: Iterable[str] = ("vm-001", "vm-002")):
        self.ids = sorted(ids)

    def active_ids(self, now: int) -> list[str]:
        return self.ids

    def on_period(self, now: int) -> None:
        pass


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


class _Instance:
    __slots__ = ("id", "idx", "backlog", "processed", "pending")

    def __init__(self, iid: str, idx: int):
        self.id = iid
        self.idx = idx
        self.backlog = 0.0
        self.processed = 0.0  # CPU-s in the current metric period
        # (chunk number, last completion time) of chunks that may still be queued
        self.pending: list[tuple[int, float]] = []


def arrival_counts(trace: WorkloadTrace, threads: int, duration: int, rng: np.random.Generator) -> np.ndarray:
    """Integer requests per thread per second, shape ``(threads, duration)``.

    Fractional rates are carried over between seconds; each thread starts
    with a random phase in [0, 1).
    """
    rates = trace.per_second()[:duration]
    phase = rng.uniform(0.0, 1.0, size=threads)
    cum = np.floor(phase[:, None] + np.cumsum(rates)[None, :] + 1e-9)
    prev = np.concatenate([np.floor(phase + 1e-9)[:, None], cum[:, :-1]], axis=1)
    return (cum - prev).astype(np.int64)


def sample_cpu(processed: float, capacity: float, period: int) -> float:
    """Interval-average CPU percent from CPU-seconds processed in a period."""
    return 100.0 * min(1.0, max(0.0, processed / (capacity * period)))


def simulate(
    trace: WorkloadTrace,
    controller: Controller | None = None,
    sim: SimConfig = SimConfig(),
    duration: int | None = None,
    store: MetricStore | None = None,
) -> SimResult:
    """Run the fleet against ``trace`` for ``duration`` seconds.

    At each metric boundary the per-instance CPU samples are written to
    ``store`` (``cpu.percent{instance_id=...}``) and ``controller.on_period``
    runs. Instances that disappear from ``controller.active_ids`` are treated
    as terminated: their queued requests go back to the balancer.
    """
    if duration is None:
        duration = trace.duration
    if duration <= 0 or duration > trace.duration:
        raise ConfigError(f"duration {duration}s outside the trace's {trace.duration}s")
    if duration % sim.metric_period:
        raise ConfigError(f"duration {duration}s is not a whole number of {sim.metric_period}s periods")
    controller = controller or FixedCluster()
    store = store if store is not None else MetricStore()
    rng = np.random.default_rng(sim.rng_seed)

    cost, cap = sim.per_request_cost, sim.instance_capacity
    counts = arrival_counts(trace, sim.threads, duration, rng)
    budgets = counts.sum(axis=1)
    # session j of thread k covers request numbers [bounds[k][j], bounds[k][j+1])
    bounds = [np.floor(np.arange(sim.sessions + 1) * b / sim.sessions).astype(np.int64) for b in budgets]
    sent = np.zeros(sim.threads, dtype=np.int64)
    session_no = np.zeros(sim.threads, dtype=np.int64)
    session_target: list[str | None] = [None] * sim.threads

    router = SessionRouterState()
    instances: dict[str, _Instance] = {}
    id_list: list[str] = []
    chunks_send: list[np.ndarray] = []
    chunks_comp: list[np.ndarray] = []
    chunks_inst: list[np.ndarray] = []
    emissions: list[tuple[SeriesKey, MetricPoint]] = []

    injected = 0
    work_arrived = work_processed = work_dropped = 0.0
    imbalance = 0.0

    def instance(iid: str) -> _Instance:
        inst = instances.get(iid)
        if inst is None:
            if iid not in id_list:
                id_list.append(iid)
            inst = instances[iid] = _Instance(iid, id_list.index(iid))
        return inst

    def enqueue(inst: _Instance, now: int, send: np.ndarray, arrive: np.ndarray) -> None:
        """Queue requests arriving at ``arrive`` (sorted) on ``inst``."""
        nonlocal work_arrived
        n = send.shape[0]
        if n == 0:
            return
        # work ahead of request j = backlog + j*cost - capacity * (time since second start)
        j = np.arange(n)
        ahead = np.maximum(0.0, inst.backlog + j * cost - cap * (arrive - now))
        comp = arrive + (ahead + cost) / cap
        chunks_send.append(send)
        chunks_comp.append(comp)
        chunks_inst.append(np.full(n, inst.idx, dtype=np.int64))
        inst.pending.append((len(chunks_comp) - 1, float(comp[-1])))
        inst.backlog += n * cost
        work_arrived += n * cost

    for now in range(duration + 1):
        if now % sim.metric_period == 0 and now > 0:
            for iid in sorted(instances):
                inst = instances[iid]
                point = MetricPoint(now, sample_cpu(inst.processed, cap, sim.metric_period))
                store.ingest(cpu_key(iid), point)
                emissions.append((cpu_key(iid), point))
                inst.processed = 0.0
            controller.on_period(now)
        if now == duration:
            break

        active = list(controller.active_ids(now))
        requeue_send: list[np.ndarray] = []
        for iid in sorted(set(instances) - set(active)):
            gone = instances.pop(iid)
            work_dropped += gone.backlog
            for c, last in gone.pending:
                if last <= now:
                    continue
                m = chunks_comp[c] > now
                requeue_send.append(chunks_send[c][m])
                keep = ~m
                chunks_send[c] = chunks_send[c][keep]
                chunks_comp[c] = chunks_comp[c][keep]
                chunks_inst[c] = chunks_inst[c][keep]
            for k in range(sim.threads):
                if session_target[k] == iid:
                    session_target[k] = None
        for iid in active:
            instance(iid)

        if requeue_send:
            send = np.sort(np.concatenate(requeue_send))
            target, router = route_session(router, active)
            enqueue(instances[target], now, send, np.full(send.shape[0], float(now)))

        # new arrivals this second, grouped per target instance
        per_target: dict[str, int] = {}
        for k in range(sim.threads):
            n = int(counts[k, now])
            while n > 0:
                if session_target[k] is None or sent[k] >= bounds[k][session_no[k] + 1]:
                    if session_target[k] is not None:
                        session_no[k] += 1
                    while bounds[k][session_no[k] + 1] <= sent[k]:
                        session_no[k] += 1  # empty sessions
                    session_target[k], router = route_session(router, active)
                take = min(n, int(bounds[k][session_no[k] + 1] - sent[k]))
                per_target[session_target[k]] = per_target.get(session_target[k], 0) + take
                sent[k] += take
                n -= take
        for iid in sorted(per_target):
            n = per_target[iid]
            offsets = now + np.arange(n) / n
            injected += n
            enqueue(instances[iid], now, offsets.copy(), offsets)

        for iid in sorted(instances):
            inst = instances[iid]
            done = min(cap, inst.backlog)
            inst.backlog -= done
            if inst.backlog < 1e-12:
                inst.backlog = 0.0
            inst.processed += done
            work_processed += done
            inst.pending = [(c, last) for c, last in inst.pending if last > now + 1]
        queued = sum(i.backlog for i in instances.values())
        imbalance = max(imbalance, abs(work_arrived - work_processed - work_dropped - queued))

    send = np.concatenate(chunks_send) if chunks_send else np.empty(0)
    comp = np.concatenate(chunks_comp) if chunks_comp else np.empty(0)
    inst_idx = np.concatenate(chunks_inst) if chunks_inst else np.empty(0, dtype=np.int64)
    order = np.argsort(send, kind="stable")
    log = ResponseLog(send[order], comp[order], inst_idx[order], id_list)
    completed = int(np.count_nonzero(log.completion_ts <= duration))
    backlog = sum(i.backlog for i in instances.values())
    return SimResult(
        responses=log,
        injected=injected,
        completed=completed,
        queued_at_end=len(log) - completed,
        work_arrived=work_arrived,
        work_processed=work_processed,
        work_dropped=work_dropped,
        backlog_at_end=backlog,
        duration=duration,
        emissions=emissions,
        max_work_imbalance=imbalance,
    )
