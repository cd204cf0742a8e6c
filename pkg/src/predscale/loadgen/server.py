"""TCP server that burns a fixed amount of CPU per request.

Run as ``python3 -m predscale.loadgen.server --cost 0.002 --port 0``; the
bound port is printed on stdout as ``PORT <n>`` once the server listens.
"""

from __future__ import annotations

import argparse
import asyncio
import logging
import signal
import sys
import time

from .protocol import encode, read_frame

logger = logging.getLogger(__name__)


def _spin(n: int) -> int:
    x = 0
    for i in range(n):
        x ^= i
    return x


def calibrate(target_s: float = 0.05, rounds: int = 3) -> float:
    """Busy-loop iterations per CPU second, best of ``rounds``."""
    n = 10_000
    while True:
        t = time.process_time()
        _spin(n)
        dt = time.process_time() - t
        if dt >= target_s:
            break
        n *= 2
    best = 0.0
    for _ in range(rounds):
        t = time.process_time()
        _spin(n)
        dt = time.process_time() - t
        best = max(best, n / max(dt, 1e-9))
    return best


class BurnServer:
    def __init__(self, cost: float, iters_per_s: float | None = None):
        if cost < 0:
            raise ValueError("cost must be >= 0")
        self.cost = cost
        self.iters_per_s = iters_per_s or calibrate()
        # spin in ~100 us chunks so the CPU clock is checked often but cheaply
        self.chunk = max(1, int(self.iters_per_s * 1e-4))
        self.served = 0
        self._server: asyncio.base_events.Server | None = None

    def burn(self) -> None:
        """Consume ``cost`` seconds of this thread's CPU time."""
        t0 = time.thread_time()
        while time.thread_time() - t0 < self.cost:
            _spin(self.chunk)

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            while True:
                ts, _ = await read_frame(reader)
                self.burn()
                writer.write(encode(ts))
                self.served += 1
                await writer.drain()
        except (asyncio.IncompleteReadError, ConnectionError):
            pass
        finally:
            writer.close()

    async def start(self, host: str = "127.0.0.1", port: int = 0) -> int:
        try:
            self._server = await asyncio.start_server(self._handle, host, port)
        except OSError as exc:
            raise OSError(f"cannot bind {host}:{port}: {exc}") from exc
        return self._server.sockets[0].getsockname()[1]

    async def serve_forever(self) -> None:
        assert self._server is not None
        async with self._server:
            await self._server.serve_forever()

    def close(self) -> None:
        if self._server is not None:
            self._server.close()


async def _main(args) -> None:
    srv = BurnServer(args.cost)
    port = await srv.start(args.host, args.port)
    print(f"PORT {port}", flush=True)
    logger.info("listening on %s:%d, %.0f loop iterations per CPU second", args.host, port, srv.iters_per_s)
    loop = asyncio.get_running_loop()
    for sig in (signal.SIGTERM, signal.SIGINT):
        loop.add_signal_handler(sig, srv.close)
    try:
        await srv.serve_forever()
    except asyncio.CancelledError:
        pass


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description="CPU-burning echo server")
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=0)
    ap.add_argument("--cost", type=float, default=0.002, help="CPU seconds per request")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr)
    asyncio.run(_main(args))


if __name__ == "__main__":
    main()
