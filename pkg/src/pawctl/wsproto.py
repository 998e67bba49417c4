"""Minimal RFC 6455 server-side WebSocket support.

Just enough for a localhost console: the HTTP upgrade handshake, masked
client frames, unmasked server text frames, ping/pong, and close. Payloads
carry the same NDJSON lines as the raw TCP protocol.
"""

from __future__ import annotations

import base64
import hashlib
import struct

_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT, OP_TEXT, OP_BINARY, OP_CLOSE, OP_PING, OP_PONG = 0x0, 0x1, 0x2, 0x8, 0x9, 0xA


class HandshakeError(ValueError):
    """Request is not a valid WebSocket upgrade."""


def looks_like_http(prefix: bytes) -> bool:
    return prefix.startswith(b"GET ")


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def parse_upgrade_request(data: bytes) -> dict:
    """Parse the upgrade request headers; data must contain the full header block."""
    try:
        head = data.split(b"\r\n\r\n", 1)[0].decode("latin-1")
    except UnicodeDecodeError as exc:
        raise HandshakeError(f"undecodable request: {exc}") from exc
    lines = head.split("\r\n")
    if not lines or not lines[0].startswith("GET "):
        raise HandshakeError("not a GET request")
    headers = {}
    for line in lines[1:]:
        if ":" in line:
            name, value = line.split(":", 1)
            headers[name.strip().lower()] = value.strip()
    if headers.get("upgrade", "").lower() != "websocket":
        raise HandshakeError("missing Upgrade: websocket")
    if "sec-websocket-key" not in headers:
        raise HandshakeError("missing Sec-WebSocket-Key")
    return headers


def handshake_response(headers: dict) -> bytes:
    key = accept_key(headers["sec-websocket-key"])
    return ("HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {key}\r\n\r\n").encode("ascii")


def encode_frame(payload: bytes, opcode: int = OP_TEXT, mask: bool = False) -> bytes:
    """One complete frame. Servers send unmasked; clients must mask."""
    head = bytes([0x80 | opcode])
    n = len(payload)
    mask_bit = 0x80 if mask else 0
    if n < 126:
        head += bytes([mask_bit | n])
    elif n < 1 << 16:
        head += bytes([mask_bit | 126]) + struct.pack(">H", n)
    else:
        head += bytes([mask_bit | 127]) + struct.pack(">Q", n)
    if mask:
        key = struct.pack(">I", 0x37FA213D)
        masked = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
        return head + key + masked
    return head + payload


def encode_text(text: str) -> bytes:
    return encode_frame(text.encode("utf-8"), OP_TEXT)


def encode_close() -> bytes:
    return encode_frame(b"", OP_CLOSE)


def encode_pong(payload: bytes = b"") -> bytes:
    return encode_frame(payload, OP_PONG)


class FrameParser:
    """Incremental frame parser; coalesces continuation fragments."""

    def __init__(self):
        self._buffer = b""
        self._fragments = b""
        self._frag_opcode = None

    def feed(self, data: bytes) -> list:
        """Return a list of complete (opcode, payload) messages."""
        self._buffer += data
        messages = []
        while True:
            parsed = self._parse_one()
            if parsed is None:
                break
            fin, opcode, payload = parsed
            if opcode == OP_CONT:
                self._fragments += payload
                if fin and self._frag_opcode is not None:
                    messages.append((self._frag_opcode, self._fragments))
                    self._fragments = b""
                    self._frag_opcode = None
            elif fin:
                messages.append((opcode, payload))
            else:
                self._frag_opcode = opcode
                self._fragments = payload
        return messages

    def _parse_one(self):
        buf = self._buffer
        if len(buf) < 2:
            return None
        fin = bool(buf[0] & 0x80)
        opcode = buf[0] & 0x0F
        masked = bool(buf[1] & 0x80)
        length = buf[1] & 0x7F
        offset = 2
        if length == 126:
            if len(buf) < offset + 2:
                return None
            length = struct.unpack(">H", buf[offset:offset + 2])[0]
            offset += 2
        elif length == 127:
            if len(buf) < offset + 8:
                return None
            length = struct.unpack(">Q", buf[offset:offset + 8])[0]
            offset += 8
        key = b""
        if masked:
            if len(buf) < offset + 4:
                return None
            key = buf[offset:offset + 4]
            offset += 4
        if len(buf) < offset + length:
            return None
        payload = buf[offset:offset + length]
        self._buffer = buf[offset + length:]
        if masked:
            payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
        return fin, opcode, payload
