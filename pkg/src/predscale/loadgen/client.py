"""Open-loop, rate-paced, session-oriented TCP load client.

Each thread owns an asyncio loop. Its request budget for the whole trace is
cut into ``sessions`` contiguous chunks; every chunk opens a fresh connection
to the next target in round-robin order. Requests go out at their scheduled
instant whether or not earlier replies have arrived.
"""

from __future__ import annotations

import asyncio
import logging
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from ..sim import ResponseLog, arrival_counts
from ..trace import WorkloadTrace
from .protocol import encode, read_frame

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Target:
    label: str
    host: str
    port: int


class TargetList:
    """Thread-safe round-robin list of server addresses that may change at runtime."""

    def __init__(self, targets=()):
        self._lock = threading.Lock()
        self._targets: list[Target] = list(targets)
        self._next = 0

    def set(self, targets) -> None:
        with self._lock:
            self._targets = list(targets)

    def snapshot(self) -> list[Target]:
        with self._lock:
            return list(self._targets)

    def next(self) -> Target | None:
        with self._lock:
            if not self._targets:
                return None
            t = self._targets[self._next % len(self._targets)]
            self._next += 1
            return t


@dataclass(frozen=True)
class ClientConfig:
    threads: int = 6
    sessions: int = 1000
    payload_bytes: int = 16
    connect_attempts: int = 5
    drain_timeout: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.threads < 1 or self.sessions < 1:
            raise ValueError("threads and sessions must be >= 1")


@dataclass
class ClientResult:
    responses: ResponseLog
    scheduled: int
    sent: int
    lost: int  # sent but never answered
    unsent: int  # no reachable target
    connect_failures: int
    send_ts: np.ndarray = field(repr=False)  # every send, seconds from start

    def sent_per_segment(self, segment_seconds: int, n_segments: int) -> np.ndarray:
        idx = np.floor(self.send_ts / segment_seconds).astype(np.int64)
        idx = idx[(idx >= 0) & (idx < n_segments)]
        return np.bincount(idx, minlength=n_segments)


def send_schedule(counts: np.ndarray) -> np.ndarray:
    """Send offsets in seconds: ``counts[s]`` requests evenly spread over second ``s``."""
    secs = np.repeat(np.arange(counts.size), counts)
    within = np.concatenate([np.arange(n) / n for n in counts if n]) if counts.sum() else np.empty(0)
    return secs + within


@dataclass
class _ThreadLog:
    records: list = field(default_factory=list)  # (send_ns, recv_ns, label)
    sends: list = field(default_factory=list)
    lost: int = 0
    unsent: int = 0
    connect_failures: int = 0


class _Session:
    def __init__(self, target: Target, reader, writer, log: _ThreadLog):
        self.target = target
        self.reader = reader
        self.writer = writer
        self.log = log
        self.outstanding = 0
        self.closing = False
        self.done = asyncio.Event()
        self.task = asyncio.ensure_future(self._read())

    async def _read(self) -> None:
        try:
            while not (self.closing and self.outstanding == 0):
                ts, _ = await read_frame(self.reader)
                self.log.records.append((ts, time.monotonic_ns(), self.target.label))
                self.outstanding -= 1
        except (asyncio.IncompleteReadError, ConnectionError, OSError):
            pass
        finally:
            self.log.lost += self.outstanding
            self.outstanding = 0
            self.writer.close()
            self.done.set()

    def finish(self) -> None:
        self.closing = True
        if self.outstanding == 0:
            self.task.cancel()
            self.writer.close()
            self.done.set()


async def _open(targets: TargetList, cfg: ClientConfig, log: _ThreadLog) -> _Session | None:
    for _ in range(cfg.connect_attempts):
        t = targets.next()
        if t is None:
            await asyncio.sleep(0.05)
            continue
        try:
            reader, writer = await asyncio.open_connection(t.host, t.port)
            return _Session(t, reader, writer, log)
        except OSError as exc:
            log.connect_failures += 1
            logger.debug("connect to %s failed: %s", t, exc)
    return None


async def _thread_main(offsets: np.ndarray, n_sessions: int, targets: TargetList, cfg: ClientConfig, start_ns: int, log: _ThreadLog):
    payload = b"\0" * cfg.payload_bytes
    sessions = []
    for chunk in np.array_split(np.arange(offsets.size), min(n_sessions, max(offsets.size, 1))):
        if chunk.size == 0:
            continue
        sess = None
        for k in chunk:
            delay = (start_ns + int(offsets[k] * 1e9) - time.monotonic_ns()) / 1e9
            if delay > 0:
                await asyncio.sleep(delay)
            while True:
                if sess is None:
                    sess = await _open(targets, cfg, log)
                    if sess is None:
                        log.unsent += 1
                        break
                    sessions.append(sess)
                if sess.done.is_set():  # peer went away; retry on a new session
                    sess = None
                    continue
                ts = time.monotonic_ns()
                try:
                    sess.writer.write(encode(ts, payload))
                except (ConnectionError, OSError):
                    sess.finish()
                    sess = None
                    continue
                sess.outstanding += 1
                log.sends.append(ts)
                break
        if sess is not None:
            sess.finish()
    pending = [s.done.wait() for s in sessions if not s.done.is_set()]
    if pending:
        await asyncio.wait([asyncio.ensure_future(p) for p in pending], timeout=cfg.drain_timeout)
    for s in sessions:
        if not s.done.is_set():
            s.task.cancel()
            try:
                await s.task
            except asyncio.CancelledError:
                pass


def run_client(trace: WorkloadTrace, targets: TargetList, cfg: ClientConfig = ClientConfig(), start_ns: int | None = None) -> ClientResult:
    """Drive ``trace`` (requests/s per thread) against ``targets``; blocks until done."""
    counts = arrival_counts(trace, cfg.threads, trace.duration, np.random.default_rng(cfg.seed))
    logs = [_ThreadLog() for _ in range(cfg.threads)]
    start_ns = start_ns if start_ns is not None else time.monotonic_ns() + 50_000_000

    def worker(i: int) -> None:
        asyncio.run(_thread_main(send_schedule(counts[i]), cfg.sessions, targets, cfg, start_ns, logs[i]))

    threads = [threading.Thread(target=worker, args=(i,), name=f"loadgen-{i}") for i in range(cfg.threads)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    records = sorted(r for log in logs for r in log.records)
    labels: dict[str, int] = {}
    idx = np.array([labels.setdefault(r[2], len(labels)) for r in records], dtype=np.int64)
    send = np.array([(r[0] - start_ns) / 1e9 for r in records])
    recv = np.array([(r[1] - start_ns) / 1e9 for r in records])
    sends = np.sort(np.array([(s - start_ns) / 1e9 for log in logs for s in log.sends]))
    return ClientResult(
        responses=ResponseLog(send, recv, idx, list(labels)),
        scheduled=int(counts.sum()),
        sent=int(sends.size),
        lost=sum(log.lost for log in logs),
        unsent=sum(log.unsent for log in logs),
        connect_failures=sum(log.connect_failures for log in logs),
        send_ts=sends,
    )
