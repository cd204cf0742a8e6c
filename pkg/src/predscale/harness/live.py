"""Live mode: the control loop drives real server processes on loopback."""

from __future__ import annotations

import logging
import subprocess
import sys
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import psutil

from ..loadgen.client import ClientConfig, ClientResult, Target, TargetList, run_client
from ..metrics import MetricStore
from ..orchestrator import Phase
from ..sim import cpu_key
from ..trace import WorkloadTrace
from .runner import make_control_loop, write_artifacts
from .scenario import Scenario

logger = logging.getLogger(__name__)


class ServerStartError(RuntimeError):
    pass


@dataclass
class _Server:
    proc: subprocess.Popen
    ps: psutil.Process
    target: Target
    stop_at: float | None = None


class ServerFleet:
    """One ``predscale.loadgen.server`` process per orchestrator instance."""

    def __init__(self, cost: float, host: str = "127.0.0.1", start_timeout: float = 30.0):
        self.cost = cost
        self.host = host
        self.start_timeout = start_timeout
        self.servers: dict[str, _Server] = {}

    def start(self, iid: str) -> Target:
        proc = subprocess.Popen(
            [sys.executable, "-m", "predscale.loadgen.server", "--host", self.host, "--port", "0", "--cost", repr(self.cost)],
            stdout=subprocess.PIPE,
            text=True,
        )
        line = _readline(proc, self.start_timeout)
        if not line.startswith("PORT "):
            proc.kill()
            raise ServerStartError(f"server for {iid} did not report a port (got {line!r})")
        target = Target(iid, self.host, int(line.split()[1]))
        ps = psutil.Process(proc.pid)
        ps.cpu_percent(None)  # prime the interval counter
        self.servers[iid] = _Server(proc, ps, target)
        logger.info("started %s on port %d", iid, target.port)
        return target

    def cpu_percent(self, iid: str) -> float:
        try:
            return min(100.0, max(0.0, self.servers[iid].ps.cpu_percent(None)))
        except psutil.Error:
            return 0.0

    def schedule_stop(self, iid: str, at: float) -> None:
        srv = self.servers.get(iid)
        if srv is not None and srv.stop_at is None:
            srv.stop_at = at

    def reap(self, now: float) -> None:
        for iid, srv in list(self.servers.items()):
            if srv.stop_at is not None and now >= srv.stop_at:
                self._stop(srv)
                del self.servers[iid]

    def stop_all(self) -> None:
        for srv in self.servers.values():
            self._stop(srv)
        self.servers.clear()

    @staticmethod
    def _stop(srv: _Server) -> None:
        srv.proc.terminate()
        try:
            srv.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            srv.proc.kill()
            srv.proc.wait()


def _readline(proc: subprocess.Popen, timeout: float) -> str:
    out: list[str] = []
    t = threading.Thread(target=lambda: out.append(proc.stdout.readline()), daemon=True)
    t.start()
    t.join(timeout)
    return out[0].strip() if out else ""


def run_live(scenario: Scenario) -> Path:
    """Run the trace in real time; the control loop acts on period boundaries.

    An instance's server process starts when the orchestrator creates it, but
    its port only joins the client's target list once the boot delay has
    elapsed. Terminated instances leave the target list at once and their
    process is stopped after ``live.drain_timeout`` seconds.
    """
    live = scenario.live
    trace = WorkloadTrace.load(scenario.trace, scenario.segment_seconds)
    period = scenario.forecast.sample_period
    store = MetricStore()
    loop = make_control_loop(scenario, store)
    fleet = ServerFleet(live.per_request_cost, live.host)
    targets = TargetList()
    result: list[ClientResult] = []
    try:
        _reconcile(loop, fleet, targets, 0, 0.0, live.drain_timeout)
        ccfg = ClientConfig(
            threads=live.threads, sessions=live.sessions, payload_bytes=live.payload_bytes,
            drain_timeout=live.drain_timeout, seed=scenario.seed,
        )
        start_ns = time.monotonic_ns() + 200_000_000
        client = threading.Thread(target=lambda: result.append(run_client(trace, targets, ccfg, start_ns)), name="loadgen")
        client.start()
        start = start_ns / 1e9
        for now in range(1, trace.duration + 1):
            delay = start + now - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            if now % period == 0:
                for iid in list(fleet.servers):
                    store.put(cpu_key(iid), now, fleet.cpu_percent(iid))
                loop.on_period(now)
            else:
                loop.active_ids(now)
            _reconcile(loop, fleet, targets, now, time.monotonic(), live.drain_timeout)
        client.join()
    finally:
        fleet.stop_all()

    res = result[0]
    offered = trace.per_second() * live.threads * live.per_request_cost
    extra = {
        "requests_scheduled": res.scheduled,
        "requests_sent": res.sent,
        "replies_received": len(res.responses),
        "replies_lost": res.lost,
        "requests_unsent": res.unsent,
        "connect_failures": res.connect_failures,
        "sent_per_segment": res.sent_per_segment(scenario.segment_seconds, len(trace.rates)).tolist(),
        "expected_per_segment": [r * scenario.segment_seconds * live.threads for r in trace.rates],
    }
    return write_artifacts(scenario, store, loop, res.responses, np.asarray(offered), extra)


def _reconcile(loop, fleet: ServerFleet, targets: TargetList, now: int, wall: float, drain: float) -> None:
    state = loop.orchestrator.state
    for inst in state.instances:
        if inst.phase is Phase.TERMINATED:
            fleet.schedule_stop(inst.id, wall + drain)
        elif inst.id not in fleet.servers:
            fleet.start(inst.id)
    active = [i.id for i in loop.orchestrator.active()]
    targets.set([fleet.servers[i].target for i in active if i in fleet.servers])
    fleet.reap(wall)
