"""Fresh-namespace execution of one solution against one test input.

Each request is served the same way: the solution source is executed in
a brand-new module namespace, the entry callable is resolved (a name
like ``"Solution.method"`` instantiates the class first; a bare name is
looked up directly), every non-blank line of the test input is decoded
as one JSON argument, and the call runs with its stdout captured.  The
output blob is whatever the call printed, followed by the rendered
return value (strings verbatim, everything else as sorted-key JSON) on
its own line.

Wall time spans loading and calling, measured with the high-resolution
timer.  Peak memory is the Python allocator's traced peak, which tracks
what the solution allocates but is not the process RSS and can diverge
from resident-set figures reported elsewhere.  Limits are enforced
cooperatively after the call returns, with Timeout taking precedence
over MemoryExceeded over Exception; a solution that never returns is
the launcher's problem, by design (this is not a security boundary and
expects trusted fixture code).

Namespace freshness covers the solution's own globals: two sequential
requests cannot see each other's top-level names.  Modules a solution
imports are still cached process-wide, as in any Python program.
"""

import contextlib
import io
import json
import time
import tracemalloc
import traceback

OUTCOME_OK = "Ok"
OUTCOME_EXCEPTION = "Exception"
OUTCOME_TIMEOUT = "Timeout"
OUTCOME_MEMORY = "MemoryExceeded"

_MEBIBYTE = 1024 * 1024


def execute(request: dict) -> dict:
    """Run one validated request and build its reply record."""
    already_tracing = tracemalloc.is_tracing()
    if not already_tracing:
        tracemalloc.start()
    tracemalloc.reset_peak()
    started = time.perf_counter()
    output = ""
    trace = ""
    try:
        output = _run_solution(request["solution"], request["entry"], request["input"])
    except (Exception, SystemExit):
        trace = traceback.format_exc()
    wall_ms = (time.perf_counter() - started) * 1000.0
    peak_mb = tracemalloc.get_traced_memory()[1] / _MEBIBYTE
    if not already_tracing:
        tracemalloc.stop()

    if wall_ms > request["time_ms"]:
        outcome, output, trace = OUTCOME_TIMEOUT, "", ""
    elif peak_mb > request["memory_mb"]:
        outcome, output, trace = OUTCOME_MEMORY, "", ""
    elif trace:
        outcome, output = OUTCOME_EXCEPTION, ""
    else:
        outcome = OUTCOME_OK
    return {
        "outcome": outcome,
        "output": output,
        "peak_mb": peak_mb,
        "trace": trace,
        "wall_ms": wall_ms,
    }


def _run_solution(solution: str, entry: str, test_input: str) -> str:
    namespace = {"__name__": "__solution__"}
    exec(compile(solution, "<solution>", "exec"), namespace)
    target = _resolve_entry(namespace, entry)
    arguments = _parse_arguments(test_input)
    buffer = io.StringIO()
    with contextlib.redirect_stdout(buffer):
        result = target(*arguments)
    output = buffer.getvalue()
    if result is not None:
        rendered = result if isinstance(result, str) else json.dumps(result, sort_keys=True)
        output += rendered + "\n"
    return output


def _resolve_entry(namespace: dict, entry: str):
    class_name, dot, method_name = entry.partition(".")
    if not dot:
        if entry not in namespace:
            raise NameError(f"solution defines no callable named {entry!r}")
        return namespace[entry]
    if class_name not in namespace:
        raise NameError(f"solution defines no class named {class_name!r}")
    return getattr(namespace[class_name](), method_name)


def _parse_arguments(blob: str) -> list:
    values = []
    for line in blob.splitlines():
        text = line.strip()
        if text:
            values.append(json.loads(text))
    return values
