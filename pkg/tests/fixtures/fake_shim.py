"""Scripted stand-in for a runner process, used by protocol-client tests.

Speaks protocol v1 on stdin/stdout but never executes the solution it is
sent; behaviour is keyed off the request's ``input`` field instead:

    "hang"          read the frame, then sleep forever (judge must kill us)
    "protocol-err"  reply with an ERR frame and exit 1
    "boom"          Exception reply with a ZeroDivisionError trace
    "slow"          Timeout reply
    "big"           MemoryExceeded reply
    anything else   Ok reply echoing the input uppercased
"""

import json
import sys
import time


def read_frame(stream):
    header = stream.readline()
    if not header:
        return None
    return stream.read(int(header))


def write_frame(stream, payload: bytes):
    stream.write(b"%d\n%s" % (len(payload), payload))
    stream.flush()


def main():
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    hello = stdin.readline()
    if hello.strip() != b"HELLO v1":
        write_frame(stdout, b"ERR 1")
        sys.exit(1)
    while True:
        frame = read_frame(stdin)
        if frame is None:
            break
        request = json.loads(frame.decode("utf-8"))
        text = request["input"]
        if text == "hang":
            time.sleep(600)
        if text == "protocol-err":
            write_frame(stdout, b"ERR 3")
            sys.exit(1)
        reply = {
            "outcome": "Ok",
            "output": text.upper(),
            "peak_mb": 5.5,
            "trace": "",
            "wall_ms": 12.0,
        }
        if text == "boom":
            reply.update(
                outcome="Exception",
                output="",
                trace="Traceback (most recent call last):\nZeroDivisionError: division by zero",
            )
        elif text == "slow":
            reply.update(outcome="Timeout", output="", wall_ms=float(request["time_ms"]) + 7.0)
        elif text == "big":
            reply.update(outcome="MemoryExceeded", output="", peak_mb=float(request["memory_mb"]) + 3.0)
        write_frame(stdout, json.dumps(reply, sort_keys=True).encode("utf-8"))


if __name__ == "__main__":
    main()
