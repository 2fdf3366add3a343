"""Stdin/stdout serving loop for protocol v1.

The launcher opens the session with ``HELLO v1``; after that the loop
answers each request frame with exactly one reply frame until end of
input, then exits 0.  Any protocol violation — bad handshake, bad frame
header, truncated or malformed payload, non-positive limits — is
answered with an ``ERR <code>`` frame and exit status 1.  The loop is
single-threaded on purpose: a launcher wanting parallelism runs several
of these processes.
"""

import sys

from .executor import execute
from .protocol import (
    HANDSHAKE_VIOLATION,
    HELLO,
    ProtocolViolation,
    encode_reply,
    parse_request,
    read_frame,
    write_frame,
)


def serve(stdin=None, stdout=None) -> int:
    """Serve one session; returns the intended process exit status."""
    reader = sys.stdin.buffer if stdin is None else stdin
    writer = sys.stdout.buffer if stdout is None else stdout
    hello = reader.readline()
    if hello.strip() != HELLO:
        write_frame(writer, b"ERR %d" % HANDSHAKE_VIOLATION)
        return 1
    while True:
        try:
            payload = read_frame(reader)
        except ProtocolViolation as violation:
            write_frame(writer, b"ERR %d" % violation.code)
            return 1
        if payload is None:
            return 0
        try:
            request = parse_request(payload)
        except ProtocolViolation as violation:
            write_frame(writer, b"ERR %d" % violation.code)
            return 1
        write_frame(writer, encode_reply(execute(request)))


def main() -> None:
    sys.exit(serve())
