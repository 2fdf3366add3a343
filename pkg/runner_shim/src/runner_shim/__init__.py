"""Line-protocol executor for trusted solution fixtures.

Reads length-prefixed run requests on stdin, executes each solution in a
fresh namespace with wall-time and allocator-peak measurement, and
writes one reply frame per request.  See :mod:`runner_shim.protocol`
for the wire format and :mod:`runner_shim.executor` for the execution
semantics.
"""

from .executor import (
    OUTCOME_EXCEPTION,
    OUTCOME_MEMORY,
    OUTCOME_OK,
    OUTCOME_TIMEOUT,
    execute,
)
from .protocol import (
    FRAME_VIOLATION,
    HANDSHAKE_VIOLATION,
    HELLO,
    LIMIT_VIOLATION,
    PAYLOAD_VIOLATION,
    ProtocolViolation,
    encode_reply,
    parse_request,
    read_frame,
    write_frame,
)
from .serve import main, serve

__all__ = [
    "FRAME_VIOLATION",
    "HANDSHAKE_VIOLATION",
    "HELLO",
    "LIMIT_VIOLATION",
    "OUTCOME_EXCEPTION",
    "OUTCOME_MEMORY",
    "OUTCOME_OK",
    "OUTCOME_TIMEOUT",
    "PAYLOAD_VIOLATION",
    "ProtocolViolation",
    "encode_reply",
    "execute",
    "main",
    "parse_request",
    "read_frame",
    "serve",
    "write_frame",
]
