"""Length-prefixed request/reply frames.

Request: 4-byte big-endian payload length, 8-byte big-endian send timestamp
in nanoseconds, then the payload. The reply has the same layout with an empty
payload and the request's timestamp echoed back.
"""

from __future__ import annotations

import asyncio
import struct

HEADER = struct.Struct(">IQ")
MAX_PAYLOAD = 1 << 20


class FrameError(ValueError):
    pass


def encode(send_ns: int, payload: bytes = b"") -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise FrameError(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    if not 0 <= send_ns < 1 << 64:
        raise FrameError(f"timestamp {send_ns} does not fit in 64 bits")
    return HEADER.pack(len(payload), send_ns) + payload


def decode(buf: bytes) -> tuple[int, bytes, int]:
    """Parse one frame from the start of ``buf``.

    Returns ``(send_ns, payload, consumed)``; raises ``FrameError`` when
    ``buf`` holds an incomplete frame.
    """
    if len(buf) < HEADER.size:
        raise FrameError("incomplete header")
    n, ts = HEADER.unpack_from(buf)
    if n > MAX_PAYLOAD:
        raise FrameError(f"declared payload of {n} bytes exceeds {MAX_PAYLOAD}")
    end = HEADER.size + n
    if len(buf) < end:
        raise FrameError("incomplete payload")
    return ts, bytes(buf[HEADER.size : end]), end


async def read_frame(reader: asyncio.StreamReader) -> tuple[int, bytes]:
    """Read one frame; raises ``asyncio.IncompleteReadError`` on EOF."""
    head = await reader.readexactly(HEADER.size)
    n, ts = HEADER.unpack(head)
    if n > MAX_PAYLOAD:
        raise FrameError(f"declared payload of {n} bytes exceeds {MAX_PAYLOAD}")
    payload = await reader.readexactly(n) if n else b""
    return ts, payload
