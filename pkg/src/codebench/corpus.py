"""Corpus data model, on-disk store, and markdown code-block extraction.

The corpus lives in a plain directory:

    <root>/problems.jsonl            one problem record per line
    <root>/posts/<slug>.jsonl        community posts, one per line
    <root>/testcases/<slug>/<n>.in   test-case input blob
    <root>/testcases/<slug>/<n>.out  expected-output blob
    <root>/manifest.json             record counts and the cutoff date

Problem test cases are stored as sibling files rather than inline JSON so
large blobs stay diffable; loading re-attaches them in order.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

DEFAULT_MIN_UPVOTES = 2
DEFAULT_CUTOFF = date(2023, 10, 1)

#: Problems whose every category falls in this set cannot be solved in the
#: subject language and are dropped at import time.
NON_SUBJECT_CATEGORIES = frozenset({"database", "shell"})


class CorpusError(Exception):
    """Base class for corpus import/extraction failures."""


class MalformedDump(CorpusError):
    """A dump record failed to parse or violated a field invariant."""

    def __init__(self, record_index: int, reason: str):
        super().__init__(f"record {record_index}: {reason}")
        self.record_index = record_index
        self.reason = reason


class DuplicateSlug(CorpusError):
    """Two records in one dump share a problem slug."""

    def __init__(self, slug: str):
        super().__init__(f"duplicate problem slug: {slug!r}")
        self.slug = slug


class UnknownProblem(CorpusError):
    """A post references a problem slug absent from the store."""

    def __init__(self, slug: str):
        super().__init__(f"post references unknown problem: {slug!r}")
        self.slug = slug


class UnrepairableMarkdown(CorpusError):
    """Fence parity could not be restored by the repair policy."""


class Difficulty(Enum):
    EASY = "Easy"
    MEDIUM = "Medium"
    HARD = "Hard"


@dataclass
class Problem:
    """One coding task with its judge material."""

    slug: str
    question_id: int
    title: str
    difficulty: Difficulty
    acceptance_rate: float
    categories: frozenset[str]
    description: str
    code_framework: str
    test_cases: list[tuple[str, str]]
    released_at: date
    premium: bool = False

    def is_subject_language(self) -> bool:
        """True unless every category is a non-subject one (Database/Shell)."""
        if not self.categories:
            return True
        lowered = {c.lower() for c in self.categories}
        return not lowered <= NON_SUBJECT_CATEGORIES


@dataclass
class Post:
    """A community post holding zero or more fenced code blocks."""

    post_id: int
    problem_slug: str
    title: str
    tags: list[str]
    upvotes: int
    created_at: date
    author: str
    body: str


@dataclass(frozen=True)
class Snippet:
    """One fenced code block lifted out of a post body."""

    post_id: int
    ordinal: int
    raw_text: str
    fence_language_hint: str | None
    line_count: int


@dataclass(frozen=True)
class Extraction:
    """Snippets from one post plus whether fence repair was needed."""

    snippets: tuple[Snippet, ...]
    repaired: bool


@dataclass(frozen=True)
class CorpusManifest:
    problems: int
    posts: int
    snippets: int
    cutoff_date: date


# --------------------------------------------------------------------------
# Markdown fence extraction


_FENCE_RE = re.compile(r"^\s*(`{3,})(.*)$")


def _scan_markers(body: str) -> tuple[list[str], list[tuple[int, str]]]:
    """Return the body's lines and its fence markers as (line_index, hint).

    Only exactly-three-backtick fences are supported; a longer run makes
    open/close pairing ill-defined for the parity model and is rejected.
    """
    lines = body.split("\n")
    markers: list[tuple[int, str]] = []
    for i, line in enumerate(lines):
        m = _FENCE_RE.match(line)
        if not m:
            continue
        if len(m.group(1)) > 3:
            raise UnrepairableMarkdown(
                f"line {i + 1}: fence marker with {len(m.group(1))} backticks"
            )
        hint = m.group(2).strip().split()
        markers.append((i, hint[0] if hint else ""))
    return lines, markers


def _pair_blocks(
    lines: list[str], markers: list[tuple[int, str]]
) -> tuple[list[tuple[int, int, str]], bool]:
    """Pair markers into (open_line, close_line, hint) blocks.

    Even parity pairs markers verbatim.  Odd parity engages the repair
    policy: a hinted fence met while a block is open closes the block just
    before it, and a block still open at end-of-document closes there.
    """
    if len(markers) % 2 == 0:
        blocks = [
            (markers[k][0], markers[k + 1][0], markers[k][1])
            for k in range(0, len(markers), 2)
        ]
        return blocks, False

    blocks = []
    open_at: int | None = None
    open_hint = ""
    for line_no, hint in markers:
        if open_at is None:
            open_at, open_hint = line_no, hint
        elif hint:
            blocks.append((open_at, line_no, open_hint))
            open_at, open_hint = line_no, hint
        else:
            blocks.append((open_at, line_no, open_hint))
            open_at = None
    if open_at is not None:
        blocks.append((open_at, len(lines), open_hint))
    return blocks, True


def extract_post(post: Post, min_lines: int = 3) -> Extraction:
    """Extract every fenced block of at least ``min_lines`` content lines.

    Inline single-backtick spans are never extracted.  Posts whose fence
    count is odd are repaired (see ``_pair_blocks``) and flagged.
    """
    lines, markers = _scan_markers(post.body)
    blocks, repaired = _pair_blocks(lines, markers)
    snippets = []
    for open_line, close_line, hint in blocks:
        content = lines[open_line + 1 : close_line]
        if len(content) < min_lines:
            continue
        snippets.append(
            Snippet(
                post_id=post.post_id,
                ordinal=len(snippets),
                raw_text="\n".join(content),
                fence_language_hint=hint or None,
                line_count=len(content),
            )
        )
    return Extraction(snippets=tuple(snippets), repaired=repaired)


def extract_snippets(post: Post) -> list[Snippet]:
    """The snippet list alone; see ``extract_post`` for the repair flag."""
    return list(extract_post(post).snippets)


def filter_posts(posts: Iterable[Post], min_upvotes: int = DEFAULT_MIN_UPVOTES) -> list[Post]:
    """Keep posts with at least ``min_upvotes`` upvotes, preserving order."""
    if min_upvotes < 0:
        raise ValueError("min_upvotes must be non-negative")
    return [p for p in posts if p.upvotes >= min_upvotes]


# --------------------------------------------------------------------------
# Record (de)serialization


def _problem_to_record(problem: Problem) -> dict:
    return {
        "slug": problem.slug,
        "question_id": problem.question_id,
        "title": problem.title,
        "difficulty": problem.difficulty.value,
        "acceptance_rate": problem.acceptance_rate,
        "categories": sorted(problem.categories),
        "description": problem.description,
        "code_framework": problem.code_framework,
        "test_cases": [[i, o] for i, o in problem.test_cases],
        "released_at": problem.released_at.isoformat(),
        "premium": problem.premium,
    }


def _problem_from_record(record: dict) -> Problem:
    problem = Problem(
        slug=record["slug"],
        question_id=int(record["question_id"]),
        title=record["title"],
        difficulty=Difficulty(record["difficulty"]),
        acceptance_rate=float(record["acceptance_rate"]),
        categories=frozenset(record.get("categories", [])),
        description=record.get("description", ""),
        code_framework=record.get("code_framework", ""),
        test_cases=[(i, o) for i, o in record.get("test_cases", [])],
        released_at=date.fromisoformat(record["released_at"]),
        premium=bool(record.get("premium", False)),
    )
    if not problem.slug:
        raise ValueError("empty slug")
    if problem.question_id <= 0:
        raise ValueError(f"question_id must be positive: {problem.question_id}")
    if not 0.0 <= problem.acceptance_rate <= 1.0:
        raise ValueError(f"acceptance_rate outside [0,1]: {problem.acceptance_rate}")
    return problem


def _post_to_record(post: Post) -> dict:
    return {
        "post_id": post.post_id,
        "problem_slug": post.problem_slug,
        "title": post.title,
        "tags": list(post.tags),
        "upvotes": post.upvotes,
        "created_at": post.created_at.isoformat(),
        "author": post.author,
        "body": post.body,
    }


def _post_from_record(record: dict) -> Post:
    post = Post(
        post_id=int(record["post_id"]),
        problem_slug=record["problem_slug"],
        title=record.get("title", ""),
        tags=list(record.get("tags", [])),
        upvotes=int(record.get("upvotes", 0)),
        created_at=date.fromisoformat(record["created_at"]),
        author=record.get("author", ""),
        body=record.get("body", ""),
    )
    if post.post_id <= 0:
        raise ValueError(f"post_id must be positive: {post.post_id}")
    if post.upvotes < 0:
        raise ValueError(f"upvotes must be non-negative: {post.upvotes}")
    return post


def _read_dump(dump_path: Path) -> Iterator[tuple[int, dict]]:
    """Yield (record_index, parsed_record) for each non-blank dump line."""
    with open(dump_path, encoding="utf-8") as fh:
        index = 0
        for line in fh:
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedDump(index, f"invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise MalformedDump(index, "record is not an object")
            yield index, record
            index += 1


def _dump_jsonl(path: Path, records: Iterable[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")


def _load_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


# --------------------------------------------------------------------------
# The store


class CorpusStore:
    """Single-writer directory-backed corpus.

    Imports are idempotent per record key: re-importing a slug or post id
    replaces the stored record.  Duplicates *within one dump* are an error.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    # -- paths ------------------------------------------------------------

    @property
    def problems_path(self) -> Path:
        return self.root / "problems.jsonl"

    def posts_path(self, slug: str) -> Path:
        return self.root / "posts" / f"{slug}.jsonl"

    def testcase_dir(self, slug: str) -> Path:
        return self.root / "testcases" / slug

    # -- problems ---------------------------------------------------------

    def import_problems(self, dump_path: str | Path) -> list[Problem]:
        """Import eligible problems from a JSONL dump.

        Premium problems and problems solvable only in database/shell
        categories are dropped.  Retained records are persisted (merged
        with any already stored, keyed by slug) and returned in dump order.
        """
        seen: set[str] = set()
        retained: list[Problem] = []
        for index, record in _read_dump(Path(dump_path)):
            try:
                problem = _problem_from_record(record)
            except (KeyError, ValueError, TypeError) as exc:
                raise MalformedDump(index, str(exc)) from exc
            if problem.slug in seen:
                raise DuplicateSlug(problem.slug)
            seen.add(problem.slug)
            if problem.premium or not problem.is_subject_language():
                continue
            retained.append(problem)
        if retained:
            self._persist_problems(retained)
        return retained

    def _persist_problems(self, problems: list[Problem]) -> None:
        stored = {p.slug: p for p in self.load_problems()}
        for problem in problems:
            stored[problem.slug] = problem
        ordered = sorted(stored.values(), key=lambda p: (p.question_id, p.slug))
        records = []
        for problem in ordered:
            record = _problem_to_record(problem)
            del record["test_cases"]  # stored as sibling blob files
            records.append(record)
            self._write_test_cases(problem)
        _dump_jsonl(self.problems_path, records)

    def _write_test_cases(self, problem: Problem) -> None:
        case_dir = self.testcase_dir(problem.slug)
        if case_dir.exists():
            for old in case_dir.iterdir():
                old.unlink()
        case_dir.mkdir(parents=True, exist_ok=True)
        for n, (blob_in, blob_out) in enumerate(problem.test_cases):
            (case_dir / f"{n}.in").write_text(blob_in, encoding="utf-8")
            (case_dir / f"{n}.out").write_text(blob_out, encoding="utf-8")

    def _read_test_cases(self, slug: str) -> list[tuple[str, str]]:
        case_dir = self.testcase_dir(slug)
        if not case_dir.exists():
            return []
        cases = []
        for n in sorted(int(p.stem) for p in case_dir.glob("*.in")):
            blob_in = (case_dir / f"{n}.in").read_text(encoding="utf-8")
            out_path = case_dir / f"{n}.out"
            blob_out = out_path.read_text(encoding="utf-8") if out_path.exists() else ""
            cases.append((blob_in, blob_out))
        return cases

    def load_problems(self) -> list[Problem]:
        """All stored problems, ordered by question id."""
        problems = []
        for record in _load_jsonl(self.problems_path):
            record.setdefault("test_cases", [])
            problem = _problem_from_record(record)
            problem.test_cases = self._read_test_cases(problem.slug)
            problems.append(problem)
        return problems

    def load_problem(self, slug: str) -> Problem:
        for problem in self.load_problems():
            if problem.slug == slug:
                return problem
        raise UnknownProblem(slug)

    # -- posts ------------------------------------------------------------

    def import_posts(self, dump_path: str | Path) -> list[Post]:
        """Import posts from a JSONL dump, validating problem references."""
        known = {p.slug for p in self.load_problems()}
        seen_ids: set[int] = set()
        imported: list[Post] = []
        for index, record in _read_dump(Path(dump_path)):
            try:
                post = _post_from_record(record)
            except (KeyError, ValueError, TypeError) as exc:
                raise MalformedDump(index, str(exc)) from exc
            if post.post_id in seen_ids:
                raise MalformedDump(index, f"duplicate post_id {post.post_id}")
            seen_ids.add(post.post_id)
            if post.problem_slug not in known:
                raise UnknownProblem(post.problem_slug)
            imported.append(post)
        by_slug: dict[str, list[Post]] = {}
        for post in imported:
            by_slug.setdefault(post.problem_slug, []).append(post)
        for slug, fresh in sorted(by_slug.items()):
            stored = {p.post_id: p for p in self.load_posts(slug)}
            for post in fresh:
                stored[post.post_id] = post
            ordered = sorted(stored.values(), key=lambda p: p.post_id)
            _dump_jsonl(self.posts_path(slug), [_post_to_record(p) for p in ordered])
        return imported

    def save_posts(self, slug: str, posts: list[Post]) -> None:
        ordered = sorted(posts, key=lambda p: p.post_id)
        _dump_jsonl(self.posts_path(slug), [_post_to_record(p) for p in ordered])

    def load_posts(self, slug: str) -> list[Post]:
        return [_post_from_record(r) for r in _load_jsonl(self.posts_path(slug))]

    def iter_all_posts(self) -> Iterator[Post]:
        """Every stored post, grouped by slug in sorted order."""
        posts_dir = self.root / "posts"
        if not posts_dir.exists():
            return
        for path in sorted(posts_dir.glob("*.jsonl")):
            yield from self.load_posts(path.stem)

    # -- manifest ---------------------------------------------------------

    def manifest(self, cutoff_date: date = DEFAULT_CUTOFF) -> CorpusManifest:
        """Counts over stored records; snippet count derives from extraction.

        Posts whose markdown defeats fence repair contribute zero snippets
        (matching extraction, which skips them) but still count as posts.
        """
        problems = self.load_problems()
        n_posts = 0
        n_snippets = 0
        for post in self.iter_all_posts():
            n_posts += 1
            try:
                n_snippets += len(extract_post(post).snippets)
            except UnrepairableMarkdown:
                continue
        return CorpusManifest(
            problems=len(problems),
            posts=n_posts,
            snippets=n_snippets,
            cutoff_date=cutoff_date,
        )

    def write_manifest(self, cutoff_date: date = DEFAULT_CUTOFF) -> Path:
        manifest = self.manifest(cutoff_date)
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.root / "manifest.json"
        path.write_text(
            json.dumps(
                {
                    "problems": manifest.problems,
                    "posts": manifest.posts,
                    "snippets": manifest.snippets,
                    "cutoff_date": manifest.cutoff_date.isoformat(),
                },
                indent=2,
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
        return path
