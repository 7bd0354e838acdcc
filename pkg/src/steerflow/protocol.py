"""Wire framing shared by the TCP endpoint, the WebSocket endpoint and tests.

Every message is a u32 little-endian header length, a UTF-8 JSON header,
then an optional binary payload whose byte count the header announces in
"payload_bytes". Over TCP the messages are concatenated on the stream; over
WebSocket each binary WS message carries exactly one framed message, so a
single codec serves both transports.
"""

from __future__ import annotations

import json
import socket
import struct
from typing import Optional

MAX_HEADER_BYTES = 1 << 20

CLIENT_TYPES = (
    "hello",
    "add_geometry",
    "delete_geometry",
    "move_geometry",
    "scale_geometry",
    "set_params",
    "set_budget",
    "set_field",
    "set_style",
    "subscribe",
    "snapshot",
    "trigger_batch",
)

SERVER_TYPES = ("scene_ack", "error", "frame", "primitives", "level_done", "job", "snapshot_info")


def encode(header: dict, payload: Optional[bytes] = None) -> bytes:
    if payload is not None:
        header = {**header, "payload_bytes": len(payload)}
    raw = json.dumps(header, separators=(",", ":")).encode()
    return struct.pack("<I", len(raw)) + raw + (payload or b"")


def decode(buf: bytes) -> tuple[dict, Optional[bytes], int]:
    """Decode one message from buf; returns (header, payload, bytes consumed).

    Raises ValueError when buf holds garbage and IndexError-free short reads
    via returning consumed=0 when more bytes are needed.
    """
    if len(buf) < 4:
        return {}, None, 0
    (hlen,) = struct.unpack("<I", buf[:4])
    if hlen > MAX_HEADER_BYTES:
        raise ValueError(f"header length {hlen} exceeds limit")
    if len(buf) < 4 + hlen:
        return {}, None, 0
    header = json.loads(buf[4 : 4 + hlen].decode())
    plen = int(header.get("payload_bytes", 0))
    if len(buf) < 4 + hlen + plen:
        return {}, None, 0
    payload = buf[4 + hlen : 4 + hlen + plen] if plen else None
    return header, payload, 4 + hlen + plen


def _read_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining > 0:
        chunk = sock.recv(remaining)
        if not chunk:
            raise ConnectionError("socket closed mid-message")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_message(sock: socket.socket) -> tuple[dict, Optional[bytes]]:
    (hlen,) = struct.unpack("<I", _read_exact(sock, 4))
    if hlen > MAX_HEADER_BYTES:
        raise ValueError(f"header length {hlen} exceeds limit")
    header = json.loads(_read_exact(sock, hlen).decode())
    plen = int(header.get("payload_bytes", 0))
    payload = _read_exact(sock, plen) if plen else None
    return header, payload


def write_message(sock: socket.socket, header: dict, payload: Optional[bytes] = None) -> None:
    sock.sendall(encode(header, payload))
