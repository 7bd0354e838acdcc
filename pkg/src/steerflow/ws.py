"""Minimal RFC 6455 WebSocket server support plus bare-bones HTTP for assets.

Enough of the protocol for a browser client: the upgrade handshake, masked
client frames, unmasked server binary frames, ping/pong and close. Not a
general-purpose implementation (no extensions, no compression).
"""

from __future__ import annotations

import base64
import hashlib
import socket
import struct
from pathlib import Path
from urllib.parse import parse_qs, urlparse

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".png": "image/png",
    ".svg": "image/svg+xml",
    ".map": "application/json",
}


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + WS_GUID).encode()).digest()
    return base64.b64encode(digest).decode()


def read_http_request(sock: socket.socket) -> tuple[str, str, dict[str, str]]:
    """Read the request line and headers; returns (method, target, headers)."""
    data = b""
    while b"\r\n\r\n" not in data:
        chunk = sock.recv(4096)
        if not chunk:
            raise ConnectionError("client closed during HTTP request")
        data += chunk
        if len(data) > 64 * 1024:
            raise ValueError("oversized HTTP request head")
    head = data.split(b"\r\n\r\n", 1)[0].decode("latin-1")
    lines = head.split("\r\n")
    method, target, _ = lines[0].split(" ", 2)
    headers = {}
    for line in lines[1:]:
        if ":" in line:
            k, v = line.split(":", 1)
            headers[k.strip().lower()] = v.strip()
    return method, target, headers


def is_upgrade(headers: dict[str, str]) -> bool:
    return (
        "websocket" in headers.get("upgrade", "").lower()
        and "sec-websocket-key" in headers
    )


def complete_handshake(sock: socket.socket, headers: dict[str, str]) -> None:
    key = accept_key(headers["sec-websocket-key"])
    sock.sendall(
        (
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {key}\r\n\r\n"
        ).encode()
    )


def query_params(target: str) -> dict[str, str]:
    q = parse_qs(urlparse(target).query)
    return {k: v[0] for k, v in q.items()}


def _read_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining > 0:
        chunk = sock.recv(remaining)
        if not chunk:
            raise ConnectionError("socket closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> tuple[int, bool, bytes]:
    """One raw frame: (opcode, fin, payload); client payloads are unmasked here."""
    b0, b1 = _read_exact(sock, 2)
    fin = bool(b0 & 0x80)
    opcode = b0 & 0x0F
    masked = bool(b1 & 0x80)
    length = b1 & 0x7F
    if length == 126:
        (length,) = struct.unpack(">H", _read_exact(sock, 2))
    elif length == 127:
        (length,) = struct.unpack(">Q", _read_exact(sock, 8))
    mask = _read_exact(sock, 4) if masked else None
    payload = _read_exact(sock, length) if length else b""
    if mask:
        payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    return opcode, fin, payload


def read_message(sock: socket.socket) -> tuple[int, bytes]:
    """Next data message (opcode 1 or 2), transparently answering pings.

    Returns (opcode, data); opcode 8 (close) is returned to the caller.
    """
    buffer = b""
    msg_opcode = None
    while True:
        opcode, fin, payload = read_frame(sock)
        if opcode == 9:  # ping
            send_frame(sock, 10, payload)
            continue
        if opcode == 10:  # pong
            continue
        if opcode == 8:
            return 8, payload
        if opcode in (1, 2):
            msg_opcode = opcode
            buffer = payload
        elif opcode == 0:  # continuation
            buffer += payload
        if fin:
            return msg_opcode or 2, buffer


def send_frame(sock: socket.socket, opcode: int, data: bytes) -> None:
    header = bytearray([0x80 | opcode])
    n = len(data)
    if n < 126:
        header.append(n)
    elif n < 1 << 16:
        header.append(126)
        header += struct.pack(">H", n)
    else:
        header.append(127)
        header += struct.pack(">Q", n)
    sock.sendall(bytes(header) + data)


def send_binary(sock: socket.socket, data: bytes) -> None:
    send_frame(sock, 2, data)


def send_close(sock: socket.socket) -> None:
    try:
        send_frame(sock, 8, b"")
    except OSError:
        pass


def serve_static(sock: socket.socket, target: str, root: Path) -> None:
    """Answer one HTTP GET from the UI asset directory and close."""
    path = urlparse(target).path
    if path.endswith("/"):
        path += "index.html"
    candidate = (root / path.lstrip("/")).resolve()
    try:
        ok = candidate.is_file() and candidate.is_relative_to(root.resolve())
    except AttributeError:  # py<3.9 fallback, not expected here
        ok = False
    if not ok:
        sock.sendall(b"HTTP/1.1 404 Not Found\r\nContent-Length: 9\r\n\r\nnot found")
        return
    body = candidate.read_bytes()
    ctype = CONTENT_TYPES.get(candidate.suffix, "application/octet-stream")
    head = (
        "HTTP/1.1 200 OK\r\n"
        f"Content-Type: {ctype}\r\n"
        f"Content-Length: {len(body)}\r\n"
        "Cache-Control: no-cache\r\n\r\n"
    ).encode()
    sock.sendall(head + body)
