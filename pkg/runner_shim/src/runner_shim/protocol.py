"""Length-prefixed framing and request validation for protocol v1.

A session starts with the peer's handshake line ``HELLO v1\\n``; every
later exchange in either direction is one frame::

    <decimal payload length>\\n<payload bytes>

Request payloads are UTF-8 JSON objects carrying ``entry``, ``input``,
and ``solution`` as strings plus ``time_ms`` and ``memory_mb`` as
positive integers; reply payloads carry ``outcome``, ``output``,
``trace``, ``wall_ms``, and ``peak_mb``, serialized with sorted keys.
Anything that breaks these rules raises :class:`ProtocolViolation` with
a small numeric code, which the serving loop reports to the peer as an
``ERR <code>`` frame before exiting.
"""

import json

HELLO = b"HELLO v1"

HANDSHAKE_VIOLATION = 1
FRAME_VIOLATION = 2
PAYLOAD_VIOLATION = 3
LIMIT_VIOLATION = 4


class ProtocolViolation(Exception):
    """A malformed handshake, frame, or request payload."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def read_frame(stream) -> "bytes | None":
    """Read one frame; ``None`` at end of stream."""
    header = stream.readline()
    if not header:
        return None
    digits = header.strip()
    if not digits.isdigit():
        raise ProtocolViolation(FRAME_VIOLATION, f"bad frame header {header!r}")
    length = int(digits)
    payload = stream.read(length)
    if len(payload) != length:
        raise ProtocolViolation(
            FRAME_VIOLATION,
            f"frame payload truncated: expected {length} bytes, got {len(payload)}",
        )
    return payload


def write_frame(stream, payload: bytes) -> None:
    stream.write(b"%d\n%s" % (len(payload), payload))
    stream.flush()


_STRING_FIELDS = ("entry", "input", "solution")
_LIMIT_FIELDS = ("time_ms", "memory_mb")


def parse_request(payload: bytes) -> dict:
    """Decode and validate one request payload."""
    try:
        record = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise ProtocolViolation(
            PAYLOAD_VIOLATION, f"unparseable request payload: {exc}"
        ) from exc
    if not isinstance(record, dict):
        raise ProtocolViolation(PAYLOAD_VIOLATION, "request payload must be an object")
    for name in _STRING_FIELDS:
        if not isinstance(record.get(name), str):
            raise ProtocolViolation(
                PAYLOAD_VIOLATION, f"field {name!r} missing or not a string"
            )
    for name in _LIMIT_FIELDS:
        value = record.get(name)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ProtocolViolation(
                PAYLOAD_VIOLATION, f"field {name!r} missing or not an integer"
            )
        if value <= 0:
            raise ProtocolViolation(LIMIT_VIOLATION, f"field {name!r} must be positive")
    return record


def encode_reply(record: dict) -> bytes:
    return json.dumps(record, sort_keys=True).encode("utf-8")
