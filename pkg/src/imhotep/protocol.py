"""Wire formats: JSON command envelopes and binary frame packets.

Commands travel as JSON text frames; rendered frames travel as binary
packets with a fixed 28-byte header:

    magic "IMFR" | u32 width | u32 height | u32 format | u32 eye |
    u32 sequence | u32 payload length | payload bytes

format: 0 = raw RGBA8 (row-major, top-to-bottom), 1 = PNG.
eye: 0 = mono, 1 = left, 2 = right.  All integers little-endian.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

from .framebuffer import Framebuffer

MAGIC = b"IMFR"
HEADER = struct.Struct("<4s6I")

FORMAT_RAW = 0
FORMAT_PNG = 1

EYE_MONO = 0
EYE_LEFT = 1
EYE_RIGHT = 2


class ProtocolError(Exception):
    """Command rejected; carries the wire-level error code."""

    def __init__(self, code: str, detail: str, field: str | None = None):
        super().__init__(detail)
        self.code = code
        self.detail = detail
        self.field = field


def bad_payload(detail: str, field: str | None = None) -> ProtocolError:
    return ProtocolError("bad_payload", detail, field)


@dataclass(frozen=True)
class WireMessage:
    """One client command: client-chosen id, type, structured payload."""

    id: int
    type: str
    payload: dict

    @classmethod
    def parse(cls, text: str) -> "WireMessage":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise bad_payload(f"not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise bad_payload("message must be a JSON object")
        msg_id = data.get("id")
        if not isinstance(msg_id, int) or isinstance(msg_id, bool) or msg_id < 0:
            raise bad_payload("id must be a non-negative integer", field="id")
        msg_type = data.get("type")
        if not isinstance(msg_type, str) or not msg_type:
            raise bad_payload("type must be a nonempty string", field="type")
        payload = data.get("payload", {})
        if not isinstance(payload, dict):
            raise bad_payload("payload must be an object", field="payload")
        return cls(id=msg_id, type=msg_type, payload=payload)


@dataclass(frozen=True)
class FramePacket:
    width: int
    height: int
    format: int
    eye: int
    sequence: int
    payload: bytes

    def encode(self) -> bytes:
        if self.format == FORMAT_RAW:
            expected = 4 * self.width * self.height
            if len(self.payload) != expected:
                raise ValueError(f"raw payload must be {expected} bytes")
        return HEADER.pack(MAGIC, self.width, self.height, self.format,
                           self.eye, self.sequence, len(self.payload)) + self.payload

    @classmethod
    def decode(cls, data: bytes) -> "FramePacket":
        if len(data) < HEADER.size:
            raise ValueError("packet shorter than header")
        magic, width, height, fmt, eye, seq, length = HEADER.unpack_from(data)
        if magic != MAGIC:
            raise ValueError(f"bad packet magic {magic!r}")
        payload = data[HEADER.size:HEADER.size + length]
        if len(payload) != length:
            raise ValueError("packet payload truncated")
        return cls(width=width, height=height, format=fmt, eye=eye,
                   sequence=seq, payload=payload)


def encode_frame(fb: Framebuffer, eye: int, sequence: int,
                 frame_format: int = FORMAT_PNG) -> FramePacket:
    """Pack a finished framebuffer for the wire."""
    if frame_format == FORMAT_RAW:
        payload = fb.to_rgba8().tobytes()
    elif frame_format == FORMAT_PNG:
        payload = fb.png_bytes()
    else:
        raise ValueError(f"unknown frame format {frame_format}")
    return FramePacket(width=fb.width, height=fb.height, format=frame_format,
                       eye=eye, sequence=sequence, payload=payload)


# --- reply builders (JSON text frames) ---

def ack(msg_id: int, info: dict | None = None) -> str:
    return json.dumps({"id": msg_id, "type": "ack", "payload": info or {}})


def error_reply(msg_id: int, code: str, detail: str, field: str | None = None) -> str:
    payload = {"code": code, "detail": detail}
    if field is not None:
        payload["field"] = field
    return json.dumps({"id": msg_id, "type": "error", "payload": payload})


def reply(msg_id: int, reply_type: str, payload: dict) -> str:
    return json.dumps({"id": msg_id, "type": reply_type, "payload": payload})


# --- payload field checks ---

def need(payload: dict, field: str):
    if field not in payload:
        raise bad_payload(f"missing field {field!r}", field=field)
    return payload[field]


def need_number(payload: dict, field: str) -> float:
    value = need(payload, field)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise bad_payload(f"field {field!r} must be a number", field=field)
    return float(value)


def need_bool(payload: dict, field: str) -> bool:
    value = need(payload, field)
    if not isinstance(value, bool):
        raise bad_payload(f"field {field!r} must be a boolean", field=field)
    return value


def need_str(payload: dict, field: str) -> str:
    value = need(payload, field)
    if not isinstance(value, str):
        raise bad_payload(f"field {field!r} must be a string", field=field)
    return value


def need_vec3(payload: dict, field: str) -> list[float]:
    value = need(payload, field)
    if (not isinstance(value, (list, tuple)) or len(value) != 3
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)):
        raise bad_payload(f"field {field!r} must be [x, y, z]", field=field)
    return [float(v) for v in value]
