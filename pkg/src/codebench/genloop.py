"""Solution generation against a chat-completion endpoint, with retries.

The loop mirrors a dialogue that keeps no session state: every request
carries the complete problem text, so a fixing round restates the task and
then quotes the judge's error plus the previous code.  A solution is
submitted after each reply; generation stops at the first Accepted verdict
or after ``max_attempts`` rounds, whichever comes first, and every round is
recorded in an attempt log that is byte-reproducible given deterministic
collaborators.

Two client implementations share one call shape: an HTTP client posting
``{model, messages, temperature, n, max_tokens}`` with a bearer token from
``CODEBENCH_API_KEY`` under a token-bucket rate limit, and a canned client
replaying per-problem transcripts from a file for offline runs.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Protocol

import requests

from .corpus import Problem
from .judge import SubmissionJudge, Verdict
from .langdetect import SUBJECT_LANGUAGE, default_profiles

PROMPT_CHARS_PER_TOKEN = 4
CLIENT_RETRY_LIMIT = 3
_FENCE = "```"
_TRIPLE_QUOTE = '"""'


class GenerationError(Exception):
    """Base class for generation failures."""


class MissingFramework(GenerationError):
    """The problem offers no code framework to anchor the prompt."""


class NoCodeFound(GenerationError):
    """A reply contained no usable fenced code block."""


class ClientError(GenerationError):
    """Transport or auth failure talking to the completion endpoint."""


@dataclass(frozen=True)
class GenerationConfig:
    model_name: str = "gpt-3.5-turbo"
    temperature: float = 1.0
    samples_per_call: int = 1
    max_total_tokens: int = 4096
    max_attempts: int = 5
    endpoint: str = ""
    auth_token: str = ""

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must lie in [0, 2]")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        if self.max_total_tokens <= 0:
            raise ValueError("max_total_tokens must be positive")

    @property
    def prompt_budget(self) -> int:
        """Character cap for one prompt: four characters per token is a
        conservative over-estimate, so staying under it keeps requests
        inside the token limit."""
        return PROMPT_CHARS_PER_TOKEN * self.max_total_tokens


class PromptKind(Enum):
    INITIAL = "Initial"
    FIXING = "Fixing"


@dataclass(frozen=True)
class Prompt:
    text: str
    kind: PromptKind
    attempt_index: int


class GenerationStatus(Enum):
    ACCEPTED = "Accepted"
    INVALID = "Invalid"


@dataclass(frozen=True)
class AttemptRecord:
    """One round: what was asked, what came back, how it judged."""

    prompt: Prompt
    raw_reply: str
    extracted_code: str | None
    verdict: Verdict | None
    note: str = ""


@dataclass(frozen=True)
class GenerationOutcome:
    problem_slug: str
    status: GenerationStatus
    attempts_used: int
    final_code: str | None
    attempt_log: list[AttemptRecord] = field(default_factory=list)


_SUBJECT_FENCE_TAG = SUBJECT_LANGUAGE.value.lower()


def build_initial_prompt(problem: Problem) -> Prompt:
    """First-round prompt: solve command, quoted description, framework
    command, fenced framework — one quoted region, one fenced block."""
    if not problem.code_framework.strip():
        raise MissingFramework(f"problem {problem.slug} has no code framework")
    if not problem.description.strip():
        raise ValueError(f"problem {problem.slug} has no description")
    text = (
        "Solve the following programming problem.\n"
        "\n"
        f'{_TRIPLE_QUOTE}\n{problem.description.rstrip()}\n{_TRIPLE_QUOTE}\n'
        "\n"
        "Write your solution inside the following code framework and "
        "return the complete code in a single fenced block.\n"
        "\n"
        f"{_FENCE}{_SUBJECT_FENCE_TAG}\n{problem.code_framework.rstrip()}\n{_FENCE}\n"
    )
    return Prompt(text=text, kind=PromptKind.INITIAL, attempt_index=1)


def build_fixing_prompt(
    problem: Problem, error_info: str, faulty_code: str, attempt: int
) -> Prompt:
    """Repair-round prompt: the full problem again (no session context
    survives between calls), then the judge's error, then the rejected
    code, each announced and delimited."""
    if attempt < 2:
        raise ValueError("fixing prompts start at attempt 2")
    base = build_initial_prompt(problem)
    text = (
        f"{base.text}"
        "\n"
        "Your previous solution was rejected. "
        "The judge reported this error:\n"
        "\n"
        f'{_TRIPLE_QUOTE}\n{error_info.rstrip()}\n{_TRIPLE_QUOTE}\n'
        "\n"
        "This is the faulty code you sent:\n"
        "\n"
        f"{_FENCE}{_SUBJECT_FENCE_TAG}\n{faulty_code.rstrip()}\n{_FENCE}\n"
        "\n"
        "Fix the code and return the complete corrected solution in a "
        "single fenced block.\n"
    )
    return Prompt(text=text, kind=PromptKind.FIXING, attempt_index=attempt)


def extract_fenced_code(reply: str) -> str:
    """Body of the last closed fenced block whose hint is empty or names
    the subject language; other hints are skipped."""
    alias_map = default_profiles().alias_map
    blocks: list[str] = []
    body: list[str] | None = None
    block_matches = False
    for line in reply.split("\n"):
        stripped = line.strip()
        if body is None:
            if stripped.startswith(_FENCE):
                hint = stripped[len(_FENCE):].strip().lower()
                block_matches = (
                    hint == "" or alias_map.get(hint) is SUBJECT_LANGUAGE
                )
                body = []
            continue
        if stripped == _FENCE:
            if block_matches:
                blocks.append("\n".join(body))
            body = None
            continue
        body.append(line)
    if not blocks:
        raise NoCodeFound("reply contains no fenced code block")
    return blocks[-1]


class ChatClient(Protocol):
    """One chat-completion call.  ``slug`` is routing metadata for canned
    clients; network clients ignore it."""

    def complete(self, prompt: str, *, slug: str = "") -> str: ...


def generate_solution(
    problem: Problem,
    client: ChatClient,
    judge: SubmissionJudge,
    cfg: GenerationConfig | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> GenerationOutcome:
    """Run the generate→judge→fix loop for one problem.

    A reply with no extractable code counts as a failed attempt whose
    synthetic error feeds the next fixing prompt.  Judge outcomes never
    raise out of the loop; only ClientError propagates, after bounded
    retries with backoff.
    """
    cfg = cfg or GenerationConfig()
    log: list[AttemptRecord] = []
    error_info = ""
    faulty_code = ""
    for attempt in range(1, cfg.max_attempts + 1):
        if attempt == 1:
            prompt = build_initial_prompt(problem)
        else:
            prompt = build_fixing_prompt(
                problem,
                _fit(error_info, cfg.prompt_budget // 4),
                _fit(faulty_code, cfg.prompt_budget // 4),
                attempt,
            )
        prompt = _capped(prompt, cfg.prompt_budget)
        reply = _call_with_retries(client, prompt.text, problem.slug, sleep)
        try:
            code = extract_fenced_code(reply)
        except NoCodeFound as exc:
            error_info = str(exc)
            faulty_code = ""
            log.append(
                AttemptRecord(
                    prompt=prompt,
                    raw_reply=reply,
                    extracted_code=None,
                    verdict=None,
                    note=error_info,
                )
            )
            continue
        verdict = judge.submit(code, problem)
        note = ""
        if not verdict.accepted and not verdict.error_info:
            note = "verdict carried no error information"
        log.append(
            AttemptRecord(
                prompt=prompt,
                raw_reply=reply,
                extracted_code=code,
                verdict=verdict,
                note=note,
            )
        )
        if verdict.accepted:
            return GenerationOutcome(
                problem_slug=problem.slug,
                status=GenerationStatus.ACCEPTED,
                attempts_used=attempt,
                final_code=code,
                attempt_log=log,
            )
        error_info = verdict.error_info
        faulty_code = code
    return GenerationOutcome(
        problem_slug=problem.slug,
        status=GenerationStatus.INVALID,
        attempts_used=cfg.max_attempts,
        final_code=None,
        attempt_log=log,
    )


def _fit(text: str, limit: int) -> str:
    if len(text) <= limit:
        return text
    marker = "\n… (truncated)"
    return text[: max(limit - len(marker), 0)] + marker


def _capped(prompt: Prompt, budget: int) -> Prompt:
    if len(prompt.text) <= budget:
        return prompt
    return Prompt(
        text=prompt.text[:budget],
        kind=prompt.kind,
        attempt_index=prompt.attempt_index,
    )


def _call_with_retries(
    client: ChatClient,
    prompt_text: str,
    slug: str,
    sleep: Callable[[float], None],
) -> str:
    for tries in range(1, CLIENT_RETRY_LIMIT + 1):
        try:
            return client.complete(prompt_text, slug=slug)
        except ClientError:
            if tries == CLIENT_RETRY_LIMIT:
                raise
            sleep(float(2 ** (tries - 1)))
    raise AssertionError("unreachable")


# --- clients ------------------------------------------------------------


class TokenBucket:
    """Requests-per-minute limiter; callers block until a token is free."""

    def __init__(
        self,
        per_minute: float,
        capacity: float | None = None,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if per_minute <= 0:
            raise ValueError("per_minute must be positive")
        self._rate = per_minute / 60.0
        self._capacity = capacity if capacity is not None else per_minute
        self._tokens = self._capacity
        self._clock = clock
        self._sleep = sleep
        self._stamp = clock()

    def acquire(self) -> None:
        self._refill()
        if self._tokens < 1.0:
            self._sleep((1.0 - self._tokens) / self._rate)
            self._refill()
        self._tokens = max(self._tokens - 1.0, 0.0)

    def _refill(self) -> None:
        now = self._clock()
        self._tokens = min(
            self._capacity, self._tokens + (now - self._stamp) * self._rate
        )
        self._stamp = now


class HttpChatClient:
    """POSTs chat-completion requests to the configured endpoint."""

    def __init__(
        self,
        cfg: GenerationConfig,
        session: requests.Session | None = None,
        bucket: TokenBucket | None = None,
        timeout: float = 120.0,
    ):
        if not cfg.endpoint:
            raise ValueError("config names no endpoint")
        self._cfg = cfg
        self._session = session or requests.Session()
        self._bucket = bucket
        self._timeout = timeout

    def complete(self, prompt: str, *, slug: str = "") -> str:
        token = self._cfg.auth_token or os.environ.get("CODEBENCH_API_KEY", "")
        if not token:
            raise ClientError("no auth token: set CODEBENCH_API_KEY")
        if self._bucket is not None:
            self._bucket.acquire()
        body = {
            "model": self._cfg.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self._cfg.temperature,
            "n": self._cfg.samples_per_call,
            "max_tokens": self._cfg.max_total_tokens,
        }
        try:
            response = self._session.post(
                self._cfg.endpoint,
                json=body,
                headers={"Authorization": f"Bearer {token}"},
                timeout=self._timeout,
            )
        except requests.RequestException as exc:
            raise ClientError(f"transport failure: {exc}") from exc
        if response.status_code != 200:
            raise ClientError(f"endpoint returned HTTP {response.status_code}")
        try:
            payload = response.json()
            return payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ClientError(f"malformed completion payload: {exc}") from exc


class MockChatClient:
    """Replays canned per-problem transcripts.

    Each call for a slug consumes the next scripted reply; once a script
    runs dry its last reply repeats, so attempt caps can be exercised
    with short transcripts.  Slugs without a script fall back to the
    ``"*"`` entry when present.
    """

    def __init__(self, transcripts: dict[str, list[str]]):
        self._transcripts = {
            slug: list(replies) for slug, replies in transcripts.items()
        }
        self._cursor: dict[str, int] = {}

    @classmethod
    def from_file(cls, path: str | Path) -> "MockChatClient":
        record = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(record)

    def complete(self, prompt: str, *, slug: str = "") -> str:
        script = self._transcripts.get(slug) or self._transcripts.get("*")
        if not script:
            raise ClientError(f"no canned transcript for {slug!r}")
        index = self._cursor.get(slug, 0)
        self._cursor[slug] = index + 1
        return script[min(index, len(script) - 1)]
