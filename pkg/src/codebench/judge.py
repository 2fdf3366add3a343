"""Local submission judging over a line-protocol runner.

This module stands in for an online judge: it feeds a solution through a
runner process one test case at a time, folds the per-case replies into a
single :class:`Verdict`, and turns runtime/memory measurements into
percentile ranks against a population of other solutions.

Runner line protocol (v1)
-------------------------
The judge launches the runner with the handshake line ``HELLO v1\\n`` on the
runner's stdin, then exchanges length-prefixed frames in both directions::

    <decimal payload length>\\n<payload bytes>

Payloads are UTF-8 JSON objects with sorted keys.

Request::

    {"entry": str, "input": str, "memory_mb": int,
     "solution": str, "time_ms": int}

Reply::

    {"outcome": "Ok" | "Exception" | "Timeout" | "MemoryExceeded",
     "output": str, "peak_mb": float, "trace": str, "wall_ms": float}

``trace`` is empty except on an Exception outcome.  A runner that receives a
malformed frame writes a frame whose payload is ``ERR <code>`` and exits
with status 1.  The runner enforces its limits cooperatively, so the judge
additionally hard-kills any runner that stays silent past twice the time
limit and synthesizes a Timeout reply; this is a convenience for trusted
fixtures, not a security boundary.

Output comparison is byte-exact after trailing-whitespace normalization
(trailing spaces/tabs stripped per line, trailing blank lines dropped),
which may reject alternative valid formats for floating-point answers.
"""

from __future__ import annotations

import hashlib
import json
import queue
import re
import subprocess
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Protocol, Sequence

from .corpus import Problem
from .parser import NodeKind, parse_source

DEFAULT_TIME_LIMIT_MS = 10_000
DEFAULT_MEMORY_LIMIT_MB = 512


class JudgeError(Exception):
    """Base class for judging failures."""


class EmptyPopulation(JudgeError):
    """A percentile rank was requested against an empty population."""


class RunnerUnavailable(JudgeError):
    """The runner process is missing, rejected the handshake, or died."""


class VerdictStatus(Enum):
    ACCEPTED = "Accepted"
    WRONG_ANSWER = "WrongAnswer"
    RUNTIME_ERROR = "RuntimeError"
    TIME_LIMIT_EXCEEDED = "TimeLimitExceeded"
    MEMORY_LIMIT_EXCEEDED = "MemoryLimitExceeded"


@dataclass(frozen=True)
class Verdict:
    """Outcome of judging one solution against one problem.

    ``tests_passed`` equals ``tests_total`` exactly when the status is
    Accepted; for any other status it is the 0-based index of the first
    failing test case.
    """

    status: VerdictStatus
    tests_total: int
    tests_passed: int
    error_info: str
    runtime_ms: float
    peak_memory_mb: float

    def __post_init__(self) -> None:
        accepted = self.status is VerdictStatus.ACCEPTED
        if accepted != (self.tests_passed == self.tests_total):
            raise ValueError("Accepted must mean every test passed")
        if self.runtime_ms < 0 or self.peak_memory_mb < 0:
            raise ValueError("measurements must be non-negative")

    @property
    def accepted(self) -> bool:
        return self.status is VerdictStatus.ACCEPTED


@dataclass(frozen=True)
class RankPair:
    """Runtime and memory percentiles against one solution population."""

    runtime_rank: float
    memory_rank: float
    population_size: int

    def __post_init__(self) -> None:
        for rank in (self.runtime_rank, self.memory_rank):
            if not 0.0 <= rank <= 100.0:
                raise ValueError("ranks live on [0, 100]")
        if self.population_size < 1:
            raise ValueError("population_size must be at least 1")


class Direction(Enum):
    """How measurement values order: lower runtime/memory beats higher."""

    LOWER_IS_BETTER = "LowerIsBetter"


def percentile_rank(
    value: float,
    population: Sequence[float],
    direction: Direction = Direction.LOWER_IS_BETTER,
) -> float:
    """Percentage of the population strictly worse than ``value``.

    A rank of 60 means the value beats 60% of the population.  Ties count
    as not-worse, so a value equal to every population member ranks 0.
    """
    if not population:
        raise EmptyPopulation("cannot rank against an empty population")
    if direction is Direction.LOWER_IS_BETTER:
        worse = sum(1 for p in population if p > value)
    else:  # pragma: no cover - single-member enum today
        worse = sum(1 for p in population if p < value)
    return 100.0 * worse / len(population)


def rank_pair(
    verdict: Verdict, population: Sequence[tuple[float, float]]
) -> RankPair:
    """Rank a verdict's runtime and memory against (runtime, memory) pairs."""
    if not population:
        raise EmptyPopulation("cannot rank against an empty population")
    return RankPair(
        runtime_rank=percentile_rank(
            verdict.runtime_ms, [r for r, _ in population]
        ),
        memory_rank=percentile_rank(
            verdict.peak_memory_mb, [m for _, m in population]
        ),
        population_size=len(population),
    )


def normalize_output(text: str) -> str:
    """Strip trailing whitespace per line and trailing blank lines."""
    lines = [line.rstrip() for line in text.split("\n")]
    while lines and lines[-1] == "":
        lines.pop()
    return "\n".join(lines)


def entry_point(framework: str) -> str:
    """Extract the callable the runner should invoke from a code framework.

    A framework shaped like ``class Solution: def twoSum(self, ...)``
    yields ``"Solution.twoSum"`` (dunder methods are skipped); a bare
    function framework yields the function name.
    """
    tree = parse_source(framework)
    for node in tree.root.children:
        if node.kind is NodeKind.CLASS_DEF:
            for member in node.children:
                name = member.name or ""
                if member.kind is NodeKind.FUNCTION_DEF and not (
                    name.startswith("__") and name.endswith("__")
                ):
                    return f"{node.name}.{name}"
        elif node.kind is NodeKind.FUNCTION_DEF:
            return node.name or ""
    raise ValueError("framework defines no callable entry point")


# --- runner protocol client ---------------------------------------------


class RunOutcome(Enum):
    OK = "Ok"
    EXCEPTION = "Exception"
    TIMEOUT = "Timeout"
    MEMORY_EXCEEDED = "MemoryExceeded"


@dataclass(frozen=True)
class RunRequest:
    solution: str
    entry: str
    input: str
    time_ms: int
    memory_mb: int


@dataclass(frozen=True)
class RunReply:
    outcome: RunOutcome
    output: str
    trace: str
    wall_ms: float
    peak_mb: float


class RunnerClient(Protocol):
    """What run_submission needs from a runner: run one case, clean up."""

    def run(self, request: RunRequest) -> RunReply: ...

    def close(self) -> None: ...


def encode_request(request: RunRequest) -> bytes:
    payload = {
        "entry": request.entry,
        "input": request.input,
        "memory_mb": request.memory_mb,
        "solution": request.solution,
        "time_ms": request.time_ms,
    }
    return json.dumps(payload, sort_keys=True).encode("utf-8")


def decode_reply(payload: bytes) -> RunReply:
    record = json.loads(payload.decode("utf-8"))
    return RunReply(
        outcome=RunOutcome(record["outcome"]),
        output=record.get("output", ""),
        trace=record.get("trace", ""),
        wall_ms=float(record["wall_ms"]),
        peak_mb=float(record["peak_mb"]),
    )


class ProtocolRunner:
    """Judge-side client for one runner subprocess.

    A background thread pumps reply frames into a queue so each request
    can wait with a deadline; a runner silent past twice its time limit
    is killed and reported as a Timeout.
    """

    def __init__(self, command: Sequence[str]):
        try:
            self._proc = subprocess.Popen(
                list(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        except OSError as exc:
            raise RunnerUnavailable(f"cannot launch runner: {exc}") from exc
        self._replies: queue.Queue[bytes | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        try:
            self._proc.stdin.write(b"HELLO v1\n")
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            self.close()
            raise RunnerUnavailable(f"handshake failed: {exc}") from exc

    def _pump(self) -> None:
        stream = self._proc.stdout
        try:
            while True:
                header = stream.readline()
                if not header:
                    break
                payload = stream.read(int(header))
                self._replies.put(payload)
        except (OSError, ValueError):
            pass
        self._replies.put(None)

    def run(self, request: RunRequest) -> RunReply:
        payload = encode_request(request)
        started = time.perf_counter()
        try:
            self._proc.stdin.write(b"%d\n%s" % (len(payload), payload))
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise RunnerUnavailable(f"runner pipe closed: {exc}") from exc
        deadline_s = 2.0 * request.time_ms / 1000.0
        try:
            reply = self._replies.get(timeout=deadline_s)
        except queue.Empty:
            self._proc.kill()
            elapsed_ms = (time.perf_counter() - started) * 1000.0
            return RunReply(
                outcome=RunOutcome.TIMEOUT,
                output="",
                trace="",
                wall_ms=elapsed_ms,
                peak_mb=0.0,
            )
        if reply is None:
            raise RunnerUnavailable("runner exited before replying")
        if reply.startswith(b"ERR "):
            raise RunnerUnavailable(
                f"runner rejected frame: {reply.decode('utf-8', 'replace')}"
            )
        return decode_reply(reply)

    def close(self) -> None:
        if self._proc.stdin and not self._proc.stdin.closed:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        try:
            self._proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()

    def __enter__(self) -> "ProtocolRunner":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


# --- submission judging -------------------------------------------------


def run_submission(
    solution: str,
    problem: Problem,
    limits: tuple[int, int] = (DEFAULT_TIME_LIMIT_MS, DEFAULT_MEMORY_LIMIT_MB),
    runner: RunnerClient | None = None,
) -> Verdict:
    """Judge one solution: run every test case in order, stop at the first
    failure, and fold measurements into a Verdict.

    Runtime and memory aggregate the maximum over all executed cases, the
    failing one included — a timed-out case is precisely the one whose
    wall time matters.
    """
    if not problem.test_cases:
        raise ValueError(f"problem {problem.slug} has no test cases")
    if runner is None:
        raise RunnerUnavailable("no runner client supplied")
    time_ms, memory_mb = limits
    entry = entry_point(problem.code_framework)
    total = len(problem.test_cases)
    max_wall = 0.0
    max_peak = 0.0
    for index, (case_input, expected) in enumerate(problem.test_cases):
        reply = runner.run(
            RunRequest(
                solution=solution,
                entry=entry,
                input=case_input,
                time_ms=time_ms,
                memory_mb=memory_mb,
            )
        )
        max_wall = max(max_wall, reply.wall_ms)
        max_peak = max(max_peak, reply.peak_mb)
        failure = _case_failure(reply, index, case_input, expected, time_ms, memory_mb)
        if failure is not None:
            status, info = failure
            return Verdict(
                status=status,
                tests_total=total,
                tests_passed=index,
                error_info=info,
                runtime_ms=max_wall,
                peak_memory_mb=max_peak,
            )
    return Verdict(
        status=VerdictStatus.ACCEPTED,
        tests_total=total,
        tests_passed=total,
        error_info="",
        runtime_ms=max_wall,
        peak_memory_mb=max_peak,
    )


def _case_failure(
    reply: RunReply,
    index: int,
    case_input: str,
    expected: str,
    time_ms: int,
    memory_mb: int,
) -> tuple[VerdictStatus, str] | None:
    """Map one runner reply to a failure status, or None when it passed."""
    if reply.outcome is RunOutcome.EXCEPTION:
        return (
            VerdictStatus.RUNTIME_ERROR,
            f"test {index}: input:\n{case_input}\n{reply.trace}",
        )
    if reply.outcome is RunOutcome.TIMEOUT:
        return (
            VerdictStatus.TIME_LIMIT_EXCEEDED,
            f"test {index}: exceeded the {time_ms} ms time limit",
        )
    if reply.outcome is RunOutcome.MEMORY_EXCEEDED:
        return (
            VerdictStatus.MEMORY_LIMIT_EXCEEDED,
            f"test {index}: exceeded the {memory_mb} MB memory limit",
        )
    actual = normalize_output(reply.output)
    wanted = normalize_output(expected)
    if actual != wanted:
        return (
            VerdictStatus.WRONG_ANSWER,
            (
                f"test {index}: input:\n{case_input}\n"
                f"expected:\n{wanted}\nactual:\n{actual}"
            ),
        )
    return None


class SubmissionJudge(Protocol):
    """Anything that can turn (solution, problem) into a Verdict."""

    def submit(self, solution: str, problem: Problem) -> Verdict: ...


class LocalJudge:
    """Runs submissions through freshly spawned protocol runners."""

    def __init__(
        self,
        runner_factory: Callable[[], RunnerClient],
        limits: tuple[int, int] = (
            DEFAULT_TIME_LIMIT_MS,
            DEFAULT_MEMORY_LIMIT_MB,
        ),
    ):
        self._runner_factory = runner_factory
        self._limits = limits

    def submit(self, solution: str, problem: Problem) -> Verdict:
        runner = self._runner_factory()
        try:
            return run_submission(solution, problem, self._limits, runner)
        finally:
            runner.close()


# --- canned verdicts ----------------------------------------------------


@dataclass(frozen=True)
class VerdictRule:
    """One pattern → verdict mapping for the canned judge.

    Either ``contains`` (plain substring) or ``pattern`` (regex, searched)
    selects the rule; a rule with neither matches everything and is how a
    per-problem default is written.
    """

    status: VerdictStatus
    contains: str | None = None
    pattern: str | None = None
    tests_passed: int | None = None
    error_info: str = ""

    def matches(self, solution: str) -> bool:
        if self.contains is not None and self.contains not in solution:
            return False
        if self.pattern is not None and not re.search(self.pattern, solution):
            return False
        return True


_DEFAULT_RULE = VerdictRule(
    status=VerdictStatus.WRONG_ANSWER,
    error_info="test 0: output did not match",
)


class CannedVerdictJudge:
    """Deterministic judge that looks verdicts up instead of running code.

    Rules are consulted in order: the problem's own list first, then the
    ``"*"`` list, then the default.  Runtime and memory are derived from a
    hash of the slug and solution text, so repeated submissions of the
    same code always measure identically — which keeps every downstream
    artifact reproducible without a runner process.
    """

    def __init__(
        self,
        rules: dict[str, list[VerdictRule]] | None = None,
        default: VerdictRule = _DEFAULT_RULE,
    ):
        self._rules = dict(rules or {})
        self._default = default

    @classmethod
    def from_file(cls, path: str | Path) -> "CannedVerdictJudge":
        record = json.loads(Path(path).read_text(encoding="utf-8"))
        rules = {
            slug: [_rule_from_record(entry) for entry in entries]
            for slug, entries in record.get("rules", {}).items()
        }
        default = _DEFAULT_RULE
        if "default" in record:
            default = _rule_from_record(record["default"])
        return cls(rules=rules, default=default)

    def submit(self, solution: str, problem: Problem) -> Verdict:
        if not problem.test_cases:
            raise ValueError(f"problem {problem.slug} has no test cases")
        rule = self._match(solution, problem.slug)
        total = len(problem.test_cases)
        if rule.status is VerdictStatus.ACCEPTED:
            passed = total
        elif rule.tests_passed is not None:
            passed = max(0, min(rule.tests_passed, total - 1))
        else:
            passed = 0
        runtime_ms, peak_mb = _measurements(problem.slug, solution)
        return Verdict(
            status=rule.status,
            tests_total=total,
            tests_passed=passed,
            error_info=rule.error_info if rule.status is not VerdictStatus.ACCEPTED else "",
            runtime_ms=runtime_ms,
            peak_memory_mb=peak_mb,
        )

    def _match(self, solution: str, slug: str) -> VerdictRule:
        for rule in self._rules.get(slug, []):
            if rule.matches(solution):
                return rule
        for rule in self._rules.get("*", []):
            if rule.matches(solution):
                return rule
        return self._default


def _rule_from_record(record: dict) -> VerdictRule:
    return VerdictRule(
        status=VerdictStatus(record["status"]),
        contains=record.get("contains"),
        pattern=record.get("pattern"),
        tests_passed=record.get("tests_passed"),
        error_info=record.get("error_info", ""),
    )


def _measurements(slug: str, solution: str) -> tuple[float, float]:
    """Deterministic pseudo-measurements: runtime in [40, 2040) ms and
    peak memory in [14, 78) MB, both with centisecond-style granularity."""
    digest = hashlib.sha256(f"{slug}\n{solution}".encode("utf-8")).digest()
    runtime = 40.0 + int.from_bytes(digest[0:4], "big") % 200_000 / 100.0
    peak = 14.0 + int.from_bytes(digest[4:8], "big") % 6_400 / 100.0
    return round(runtime, 2), round(peak, 2)
