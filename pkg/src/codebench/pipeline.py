"""Staged pipeline: corpus → validation → generation → metrics → report.

Every stage reads line-delimited records, writes line-delimited records
into the work directory, and is keyed by a content fingerprint of its
inputs and the config slice it depends on.  A stage whose fingerprint
matches its stored output is skipped, which makes every command idempotent
and any interrupted run resumable.  All collections are sorted before
reduction or writing, worker pools preserve submission order, and floats
are serialized by a fixed formatting policy — so two runs over the same
inputs produce byte-identical reports, regardless of worker count.

Work directory layout::

    work/extract.jsonl      snippets lifted from posts (+ repair flags)
    work/detect.jsonl       snippets with detected language and score
    work/repair.jsonl       subject-language snippets, imports restored
    work/judge.jsonl        per-snippet verdicts for user solutions
    work/generate.jsonl     per-problem generation outcomes
    work/analyze.jsonl      metric records for both populations
    work/stats.json         hypothesis battery results
    work/<stage>.meta.json  fingerprint that produced the stage output

The report directory receives one CSV per table plus ``report.json``
holding the whole bundle; totals and percentages are re-derived and
checked on every emit.
"""

from __future__ import annotations

import hashlib
import json
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .corpus import (
    CorpusStore,
    Difficulty,
    Post,
    Problem,
    Snippet,
    UnrepairableMarkdown,
    extract_post,
    filter_posts,
)
from .genloop import (
    ChatClient,
    ClientError,
    GenerationConfig,
    GenerationStatus,
    HttpChatClient,
    MockChatClient,
    generate_solution,
)
from .imports import UnresolvedName, repair
from .judge import (
    CannedVerdictJudge,
    DEFAULT_MEMORY_LIMIT_MB,
    DEFAULT_TIME_LIMIT_MS,
    LocalJudge,
    ProtocolRunner,
    SubmissionJudge,
    VerdictStatus,
    percentile_rank,
)
from .langdetect import SUBJECT_LANGUAGE, default_profiles, detect
from .lexer import LexError
from .metrics import MetricRecord, LineCounts, Origin, analyze_solution
from .stats import EmptyIntersection, StatsConfig, run_battery

DEFAULT_CUTOFF_DATE = date(2023, 10, 1)

_METRIC_FIELDS = (
    "smells_per_kloc",
    "complexity_per_kloc",
    "runtime_rank",
    "memory_rank",
)
_DIFFICULTY_ORDER = ("Easy", "Medium", "Hard")


class PipelineError(Exception):
    """Base class for orchestration failures."""


class ConfigError(PipelineError):
    """The pipeline configuration is missing, malformed, or inconsistent."""


class StageFailure(PipelineError):
    """A stage failed; completed stages stay cached for the next run."""

    def __init__(self, stage: str, resume_token: str, cause: Exception):
        self.stage = stage
        self.resume_token = resume_token
        self.cause = cause
        super().__init__(
            f"stage {stage!r} failed: {cause}; "
            f"work through {resume_token!r} is cached and reused on re-run"
        )


class ReportInconsistent(PipelineError):
    """A report table failed its totals/percentage recomputation check."""


# --------------------------------------------------------------------------
# Configuration


@dataclass
class PipelineConfig:
    """Everything a run needs, loadable from a JSON file.

    Relative paths in the file resolve against the file's own directory,
    so a bundled corpus ships with a working config.
    """

    corpus_dir: Path
    work_dir: Path
    report_dir: Path
    cutoff_date: date = DEFAULT_CUTOFF_DATE
    min_upvotes: int = 2
    workers: int = 1
    seed: int = 0
    count_inserted_imports: bool = False
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    stats: StatsConfig = field(default_factory=StatsConfig)
    judge_mode: str = "canned"
    verdicts_file: Path | None = None
    runner_command: list[str] = field(default_factory=list)
    time_limit_ms: int = DEFAULT_TIME_LIMIT_MS
    memory_limit_mb: int = DEFAULT_MEMORY_LIMIT_MB
    client_mode: str = "mock"
    transcripts_file: Path | None = None

    @classmethod
    def from_file(
        cls, path: str | Path, *, require_corpus: bool = True
    ) -> "PipelineConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            record = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        return cls.from_dict(
            record, base_dir=path.parent, require_corpus=require_corpus
        )

    @classmethod
    def from_dict(
        cls,
        record: dict,
        base_dir: str | Path = ".",
        *,
        require_corpus: bool = True,
    ) -> "PipelineConfig":
        base = Path(base_dir)

        def spot(name: str) -> Path:
            raw = record.get(name)
            if not isinstance(raw, str) or not raw:
                raise ConfigError(f"config needs a {name!r} path")
            p = Path(raw)
            return p if p.is_absolute() else base / p

        def optional_path(section: dict, key: str) -> Path | None:
            raw = section.get(key)
            if raw is None:
                return None
            p = Path(raw)
            return p if p.is_absolute() else base / p

        try:
            cutoff = date.fromisoformat(
                record.get("cutoff_date", DEFAULT_CUTOFF_DATE.isoformat())
            )
        except ValueError as exc:
            raise ConfigError(f"bad cutoff_date: {exc}") from exc
        judge_section = record.get("judge", {})
        client_section = record.get("client", {})
        try:
            generation = GenerationConfig(**record.get("generation", {}))
            stats = StatsConfig(**record.get("stats", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad generation/stats section: {exc}") from exc
        cfg = cls(
            corpus_dir=spot("corpus_dir"),
            work_dir=spot("work_dir"),
            report_dir=spot("report_dir"),
            cutoff_date=cutoff,
            min_upvotes=int(record.get("min_upvotes", 2)),
            workers=int(record.get("workers", 1)),
            seed=int(record.get("seed", 0)),
            count_inserted_imports=bool(
                record.get("count_inserted_imports", False)
            ),
            generation=generation,
            stats=stats,
            judge_mode=judge_section.get("mode", "canned"),
            verdicts_file=optional_path(judge_section, "verdicts"),
            runner_command=list(judge_section.get("runner_command", [])),
            time_limit_ms=int(judge_section.get("time_limit_ms", DEFAULT_TIME_LIMIT_MS)),
            memory_limit_mb=int(
                judge_section.get("memory_limit_mb", DEFAULT_MEMORY_LIMIT_MB)
            ),
            client_mode=client_section.get("mode", "mock"),
            transcripts_file=optional_path(client_section, "transcripts"),
        )
        cfg.validate(require_corpus=require_corpus)
        return cfg

    def validate(self, *, require_corpus: bool = True) -> None:
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.min_upvotes < 0:
            raise ConfigError("min_upvotes must be non-negative")
        if require_corpus and not self.corpus_dir.is_dir():
            raise ConfigError(f"corpus_dir does not exist: {self.corpus_dir}")
        if self.judge_mode not in ("canned", "runner"):
            raise ConfigError(f"unknown judge mode {self.judge_mode!r}")
        if self.client_mode not in ("mock", "http"):
            raise ConfigError(f"unknown client mode {self.client_mode!r}")
        if self.judge_mode == "canned":
            if self.verdicts_file is None or not self.verdicts_file.is_file():
                raise ConfigError("canned judge needs an existing verdicts file")
        elif not self.runner_command:
            raise ConfigError("runner judge needs runner_command")
        if self.client_mode == "mock":
            if (
                self.transcripts_file is None
                or not self.transcripts_file.is_file()
            ):
                raise ConfigError("mock client needs an existing transcripts file")

    def build_judge(self) -> SubmissionJudge:
        if self.judge_mode == "canned":
            return CannedVerdictJudge.from_file(self.verdicts_file)
        limits = (self.time_limit_ms, self.memory_limit_mb)
        command = list(self.runner_command)
        return LocalJudge(lambda: ProtocolRunner(command), limits)

    def build_client(self) -> ChatClient:
        if self.client_mode == "mock":
            return MockChatClient.from_file(self.transcripts_file)
        return HttpChatClient(self.generation)


# --------------------------------------------------------------------------
# Fingerprints and record IO


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _digest_file(path: Path) -> str:
    return _sha256(path.read_bytes())


def _digest_tree(root: Path) -> str:
    """Digest of a directory: every file's relative path and content."""
    acc = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        acc.update(str(path.relative_to(root)).encode("utf-8"))
        acc.update(b"\0")
        acc.update(path.read_bytes())
        acc.update(b"\0")
    return acc.hexdigest()


def _fingerprint(stage: str, parts: dict) -> str:
    return _sha256(
        json.dumps({"stage": stage, "parts": parts}, sort_keys=True).encode("utf-8")
    )


def _write_jsonl(path: Path, rows: Iterable[dict]) -> None:
    text = "".join(json.dumps(row, sort_keys=True) + "\n" for row in rows)
    path.write_text(text, encoding="utf-8")


def _read_jsonl(path: Path) -> list[dict]:
    rows = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            rows.append(json.loads(line))
    return rows


def _cached(
    cfg: PipelineConfig,
    stage: str,
    fingerprint: str,
    suffix: str,
    build: Callable[[Path], None],
) -> Path:
    """Run ``build`` unless the stage output for this fingerprint exists."""
    cfg.work_dir.mkdir(parents=True, exist_ok=True)
    out = cfg.work_dir / f"{stage}{suffix}"
    meta = cfg.work_dir / f"{stage}.meta.json"
    if out.exists() and meta.exists():
        try:
            if json.loads(meta.read_text(encoding="utf-8"))["fingerprint"] == fingerprint:
                return out
        except (ValueError, KeyError):
            pass
    tmp = cfg.work_dir / f"{stage}{suffix}.tmp"
    build(tmp)
    tmp.replace(out)
    meta.write_text(
        json.dumps({"fingerprint": fingerprint, "stage": stage}, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return out


def _map_ordered(fn, items: Sequence, workers: int) -> list:
    """Apply fn preserving input order; a pool only changes wall time."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _generation_asdict(cfg: GenerationConfig) -> dict:
    record = {
        "model_name": cfg.model_name,
        "temperature": cfg.temperature,
        "samples_per_call": cfg.samples_per_call,
        "max_total_tokens": cfg.max_total_tokens,
        "max_attempts": cfg.max_attempts,
        "endpoint": cfg.endpoint,
    }
    # auth_token deliberately left out: secrets never enter fingerprints
    # or persisted state.
    return record


def _judge_slice(cfg: PipelineConfig) -> dict:
    return {
        "mode": cfg.judge_mode,
        "verdicts": _digest_file(cfg.verdicts_file)
        if cfg.verdicts_file is not None and cfg.verdicts_file.is_file()
        else None,
        "runner_command": cfg.runner_command,
        "time_limit_ms": cfg.time_limit_ms,
        "memory_limit_mb": cfg.memory_limit_mb,
    }


# --------------------------------------------------------------------------
# Stages


def _store(cfg: PipelineConfig) -> CorpusStore:
    return CorpusStore(cfg.corpus_dir)


def _corpus_digest(cfg: PipelineConfig) -> str:
    return _digest_tree(cfg.corpus_dir)


def _sorted_problems(store: CorpusStore) -> list[Problem]:
    return sorted(store.load_problems(), key=lambda p: p.slug)


def stage_extract(cfg: PipelineConfig) -> Path:
    """Posts → snippets, upvote-filtered, fences repaired where possible.

    Posts whose markdown cannot be repaired are skipped (they contribute
    no snippets); everything else keeps document order per post.
    """
    fingerprint = _fingerprint(
        "extract",
        {"corpus": _corpus_digest(cfg), "min_upvotes": cfg.min_upvotes},
    )

    def build(out: Path) -> None:
        store = _store(cfg)
        rows = []
        for problem in _sorted_problems(store):
            posts = filter_posts(store.load_posts(problem.slug), cfg.min_upvotes)
            for post in sorted(posts, key=lambda p: p.post_id):
                try:
                    extraction = extract_post(post)
                except UnrepairableMarkdown:
                    continue
                for snippet in extraction.snippets:
                    rows.append(
                        {
                            "hint": snippet.fence_language_hint,
                            "line_count": snippet.line_count,
                            "ordinal": snippet.ordinal,
                            "post_id": snippet.post_id,
                            "repaired_post": extraction.repaired,
                            "slug": problem.slug,
                            "text": snippet.raw_text,
                        }
                    )
        _write_jsonl(out, rows)

    return _cached(cfg, "extract", fingerprint, ".jsonl", build)


def stage_detect(cfg: PipelineConfig) -> Path:
    """Attach a detected language to every extracted snippet."""
    extract_path = stage_extract(cfg)
    fingerprint = _fingerprint(
        "detect", {"extract": _digest_file(extract_path)}
    )

    def build(out: Path) -> None:
        store = _store(cfg)
        profiles = default_profiles()
        posts_by_id: dict[int, Post] = {}
        for problem in _sorted_problems(store):
            for post in store.load_posts(problem.slug):
                posts_by_id[post.post_id] = post
        rows = []
        for row in _read_jsonl(extract_path):
            snippet = Snippet(
                post_id=row["post_id"],
                ordinal=row["ordinal"],
                raw_text=row["text"],
                fence_language_hint=row["hint"],
                line_count=row["line_count"],
            )
            result = detect(snippet, posts_by_id.get(row["post_id"]), profiles)
            rows.append(
                {
                    **row,
                    "language": result.language.value,
                    "score": result.score,
                    "source": result.source.value,
                }
            )
        _write_jsonl(out, rows)

    return _cached(cfg, "detect", fingerprint, ".jsonl", build)


def stage_repair(cfg: PipelineConfig) -> Path:
    """Restore missing imports on subject-language snippets.

    Snippets naming something the mapping cannot supply — or that do not
    even lex — pass through unchanged; the judge then renders the honest
    verdict on the original text.
    """
    detect_path = stage_detect(cfg)
    fingerprint = _fingerprint(
        "repair", {"detect": _digest_file(detect_path)}
    )

    def build(out: Path) -> None:
        rows = []
        for row in _read_jsonl(detect_path):
            if row["language"] != SUBJECT_LANGUAGE.value:
                continue
            original = row["text"]
            try:
                repaired_text = repair(original)
            except (UnresolvedName, LexError):
                repaired_text = original
            inserted = len(repaired_text.split("\n")) - len(original.split("\n"))
            rows.append(
                {
                    "inserted": inserted,
                    "ordinal": row["ordinal"],
                    "original_text": original,
                    "post_id": row["post_id"],
                    "slug": row["slug"],
                    "solution_id": "user-{}-{:08d}-{:02d}".format(
                        row["slug"], row["post_id"], row["ordinal"]
                    ),
                    "text": repaired_text,
                }
            )
        rows.sort(key=lambda r: r["solution_id"])
        _write_jsonl(out, rows)

    return _cached(cfg, "repair", fingerprint, ".jsonl", build)


def stage_judge(cfg: PipelineConfig) -> Path:
    """Verdict for every repaired user solution."""
    repair_path = stage_repair(cfg)
    fingerprint = _fingerprint(
        "judge",
        {
            "repair": _digest_file(repair_path),
            "judge": _judge_slice(cfg),
            "corpus": _corpus_digest(cfg),
        },
    )

    def build(out: Path) -> None:
        store = _store(cfg)
        problems = {p.slug: p for p in _sorted_problems(store)}
        judge = cfg.build_judge()
        rows = _read_jsonl(repair_path)

        def judge_one(row: dict) -> dict:
            verdict = judge.submit(row["text"], problems[row["slug"]])
            return {
                "error_info": verdict.error_info,
                "peak_memory_mb": verdict.peak_memory_mb,
                "runtime_ms": verdict.runtime_ms,
                "slug": row["slug"],
                "solution_id": row["solution_id"],
                "status": verdict.status.value,
                "tests_passed": verdict.tests_passed,
                "tests_total": verdict.tests_total,
            }

        _write_jsonl(out, _map_ordered(judge_one, rows, cfg.workers))

    return _cached(cfg, "judge", fingerprint, ".jsonl", build)


def stage_generate(cfg: PipelineConfig) -> Path:
    """Run the generation loop once per problem.

    Transport failures are recorded per problem with a null status — they
    are logged, excluded from solved-rate arithmetic, and never counted
    as Invalid.
    """
    fingerprint = _fingerprint(
        "generate",
        {
            "corpus": _corpus_digest(cfg),
            "generation": _generation_asdict(cfg.generation),
            "judge": _judge_slice(cfg),
            "seed": cfg.seed,
            "transcripts": _digest_file(cfg.transcripts_file)
            if cfg.transcripts_file is not None and cfg.transcripts_file.is_file()
            else None,
        },
    )

    def build(out: Path) -> None:
        store = _store(cfg)
        problems = _sorted_problems(store)
        client = cfg.build_client()
        judge = cfg.build_judge()

        def generate_one(problem: Problem) -> dict:
            try:
                outcome = generate_solution(
                    problem, client, judge, cfg.generation
                )
            except ClientError as exc:
                return {
                    "attempt_log": [],
                    "attempts_used": None,
                    "client_error": str(exc),
                    "final_code": None,
                    "peak_memory_mb": None,
                    "runtime_ms": None,
                    "slug": problem.slug,
                    "status": None,
                }
            final = outcome.attempt_log[-1].verdict if outcome.attempt_log else None
            return {
                "attempt_log": [
                    {
                        "attempt": record.prompt.attempt_index,
                        "kind": record.prompt.kind.value,
                        "note": record.note,
                        "status": record.verdict.status.value
                        if record.verdict is not None
                        else None,
                    }
                    for record in outcome.attempt_log
                ],
                "attempts_used": outcome.attempts_used,
                "client_error": None,
                "final_code": outcome.final_code,
                "peak_memory_mb": final.peak_memory_mb if final is not None else None,
                "runtime_ms": final.runtime_ms if final is not None else None,
                "slug": outcome.problem_slug,
                "status": outcome.status.value,
            }

        _write_jsonl(out, _map_ordered(generate_one, problems, cfg.workers))

    return _cached(cfg, "generate", fingerprint, ".jsonl", build)


def stage_analyze(cfg: PipelineConfig) -> Path:
    """Metric records for accepted solutions of both origins, with ranks.

    User solutions are measured on the text as posted (the repaired text
    only when ``count_inserted_imports`` is set); ranks come from the
    per-problem population of accepted user measurements.
    """
    repair_path = stage_repair(cfg)
    judge_path = stage_judge(cfg)
    generate_path = stage_generate(cfg)
    fingerprint = _fingerprint(
        "analyze",
        {
            "repair": _digest_file(repair_path),
            "judge": _digest_file(judge_path),
            "generate": _digest_file(generate_path),
            "count_inserted_imports": cfg.count_inserted_imports,
        },
    )

    def build(out: Path) -> None:
        repaired = {row["solution_id"]: row for row in _read_jsonl(repair_path)}
        verdicts = _read_jsonl(judge_path)
        accepted = [
            row
            for row in verdicts
            if row["status"] == VerdictStatus.ACCEPTED.value
        ]
        population: dict[str, list[tuple[float, float]]] = {}
        for row in accepted:
            population.setdefault(row["slug"], []).append(
                (row["runtime_ms"], row["peak_memory_mb"])
            )
        rows = []
        for verdict_row in accepted:
            source_row = repaired[verdict_row["solution_id"]]
            text = (
                source_row["text"]
                if cfg.count_inserted_imports
                else source_row["original_text"]
            )
            record = _measure(
                verdict_row["solution_id"],
                verdict_row["slug"],
                Origin.USER,
                text,
            )
            if record is None:
                continue
            _attach_ranks(
                record,
                verdict_row["runtime_ms"],
                verdict_row["peak_memory_mb"],
                population.get(verdict_row["slug"]),
            )
            rows.append(_record_to_row(record))
        for gen_row in _read_jsonl(generate_path):
            if gen_row["status"] != GenerationStatus.ACCEPTED.value:
                continue
            record = _measure(
                f"gen-{gen_row['slug']}",
                gen_row["slug"],
                Origin.GENERATED,
                gen_row["final_code"],
            )
            if record is None:
                continue
            _attach_ranks(
                record,
                gen_row["runtime_ms"],
                gen_row["peak_memory_mb"],
                population.get(gen_row["slug"]),
            )
            rows.append(_record_to_row(record))
        rows.sort(key=lambda r: (r["origin"], r["solution_id"]))
        _write_jsonl(out, rows)

    return _cached(cfg, "analyze", fingerprint, ".jsonl", build)


def _measure(
    solution_id: str, slug: str, origin: Origin, source: str
) -> MetricRecord | None:
    try:
        return analyze_solution(solution_id, slug, origin, source)
    except LexError:
        return None


def _attach_ranks(
    record: MetricRecord,
    runtime_ms: float,
    peak_memory_mb: float,
    population: list[tuple[float, float]] | None,
) -> None:
    if not population:
        return
    record.runtime_rank = percentile_rank(runtime_ms, [r for r, _ in population])
    record.memory_rank = percentile_rank(peak_memory_mb, [m for _, m in population])


def _record_to_row(record: MetricRecord) -> dict:
    return {
        "complexity_per_kloc": record.complexity_per_kloc,
        "complexity_total": record.complexity_total,
        "memory_rank": record.memory_rank,
        "ncloc": record.line_counts.ncloc,
        "origin": record.origin.value,
        "problem_slug": record.problem_slug,
        "runtime_rank": record.runtime_rank,
        "sloc": record.line_counts.sloc,
        "smell_count": record.smell_count,
        "smells_per_kloc": record.smells_per_kloc,
        "solution_id": record.solution_id,
    }


def _record_from_row(row: dict) -> MetricRecord:
    return MetricRecord(
        solution_id=row["solution_id"],
        problem_slug=row["problem_slug"],
        origin=Origin(row["origin"]),
        line_counts=LineCounts(sloc=row["sloc"], ncloc=row["ncloc"]),
        smell_count=row["smell_count"],
        complexity_total=row["complexity_total"],
        smells_per_kloc=row["smells_per_kloc"],
        complexity_per_kloc=row["complexity_per_kloc"],
        runtime_rank=row["runtime_rank"],
        memory_rank=row["memory_rank"],
    )


def stage_stats(cfg: PipelineConfig) -> Path:
    """Hypothesis battery over the analyzed metric records."""
    analyze_path = stage_analyze(cfg)
    fingerprint = _fingerprint(
        "stats",
        {
            "analyze": _digest_file(analyze_path),
            "alpha": cfg.stats.alpha,
            "corrections": cfg.stats.corrections,
            "two_sided": cfg.stats.two_sided,
        },
    )

    def build(out: Path) -> None:
        records = [_record_from_row(r) for r in _read_jsonl(analyze_path)]
        generated = [r for r in records if r.origin is Origin.GENERATED]
        user = [r for r in records if r.origin is Origin.USER]
        payload: dict = {
            "alpha_adjusted": cfg.stats.alpha_adjusted,
            "error": None,
            "outcomes": [],
        }
        try:
            outcomes = run_battery(generated, user, cfg.stats)
        except EmptyIntersection as exc:
            payload["error"] = str(exc)
        else:
            payload["outcomes"] = [
                {
                    "accepted": o.accepted,
                    "alpha_adjusted": o.alpha_adjusted,
                    "alternative": o.test.alternative.value,
                    "effect_size_d": o.effect_size_d,
                    "exact": o.test.exact,
                    "hypothesis_id": o.hypothesis_id,
                    "label": o.label,
                    "method": o.test.method.value,
                    "n1": o.test.n1,
                    "n2": o.test.n2,
                    "note": o.test.note,
                    "p_value": o.test.p_value,
                    "statistic": o.test.statistic,
                }
                for o in outcomes
            ]
        out.write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    return _cached(cfg, "stats", fingerprint, ".json", build)


# --------------------------------------------------------------------------
# Partition and aggregation


@dataclass(frozen=True)
class CutoffStats:
    """Solved count, attempted count, and the derived percentage."""

    solved: int
    total: int

    @property
    def rate(self) -> float:
        if self.total == 0:
            return 0.0
        return 100.0 * self.solved / self.total


def _outcome_fields(outcome) -> tuple[str, str | None]:
    if isinstance(outcome, dict):
        slug = outcome.get("slug") or outcome.get("problem_slug")
        status = outcome.get("status")
    else:
        slug = getattr(outcome, "problem_slug")
        status = getattr(outcome, "status")
    if hasattr(status, "value"):
        status = status.value
    return slug, status


def partition_by_cutoff(
    problems: Iterable[Problem],
    outcomes: Iterable,
    cutoff_date: date = DEFAULT_CUTOFF_DATE,
) -> tuple[CutoffStats, CutoffStats]:
    """Split generation outcomes on the problem release date.

    Problems released strictly before the cutoff land in the first
    partition.  Outcomes with no status (transport failures) are not
    counted on either side.
    """
    released = {p.slug: p.released_at for p in problems}
    before_solved = before_total = after_solved = after_total = 0
    for outcome in outcomes:
        slug, status = _outcome_fields(outcome)
        if slug not in released:
            raise ValueError(f"outcome references unknown problem {slug!r}")
        if status is None:
            continue
        solved = status == GenerationStatus.ACCEPTED.value
        if released[slug] < cutoff_date:
            before_total += 1
            before_solved += int(solved)
        else:
            after_total += 1
            after_solved += int(solved)
    return (
        CutoffStats(solved=before_solved, total=before_total),
        CutoffStats(solved=after_solved, total=after_total),
    )


@dataclass(frozen=True)
class AggregateRow:
    metric: str
    origin: str
    difficulty: str
    n: int
    mean: float | None
    median: float | None


def aggregate_metrics(
    records: Sequence[MetricRecord],
    difficulties: Mapping[str, Difficulty],
) -> list[AggregateRow]:
    """Mean/median of each metric by origin × difficulty, plus All rows.

    Values are sorted before reduction; rows come out in a fixed order
    (metric, then origin, then Easy/Medium/Hard/All).
    """
    if not records:
        raise ValueError("no metric records to aggregate")
    groups: dict[tuple[str, str, str], list[float]] = {}
    for record in records:
        difficulty = difficulties.get(record.problem_slug)
        if difficulty is None:
            raise ValueError(
                f"record {record.solution_id} references unknown problem "
                f"{record.problem_slug!r}"
            )
        for metric in _METRIC_FIELDS:
            value = getattr(record, metric)
            if value is None:
                continue
            for bucket in (difficulty.value, "All"):
                groups.setdefault(
                    (metric, record.origin.value, bucket), []
                ).append(value)
    rows = []
    for metric in _METRIC_FIELDS:
        for origin in (Origin.GENERATED.value, Origin.USER.value):
            for bucket in (*_DIFFICULTY_ORDER, "All"):
                values = sorted(groups.get((metric, origin, bucket), []))
                rows.append(
                    AggregateRow(
                        metric=metric,
                        origin=origin,
                        difficulty=bucket,
                        n=len(values),
                        mean=statistics.fmean(values) if values else None,
                        median=statistics.median(values) if values else None,
                    )
                )
    return rows


# --------------------------------------------------------------------------
# Report


@dataclass(frozen=True)
class ReportBundle:
    """Every table the pipeline publishes, ready for CSV/JSON emission."""

    problem_overview: list[dict]
    acceptance_rates: list[dict]
    sample_counts: dict[str, list[dict]]
    metric_tables: dict[str, list[dict]]
    hypothesis_table: list[dict]
    retry_histogram: list[dict]

    def as_dict(self) -> dict:
        return {
            "acceptance_rates": self.acceptance_rates,
            "hypothesis_table": self.hypothesis_table,
            "metric_tables": self.metric_tables,
            "problem_overview": self.problem_overview,
            "retry_histogram": self.retry_histogram,
            "sample_counts": self.sample_counts,
        }

    @classmethod
    def from_dict(cls, record: dict) -> "ReportBundle":
        return cls(
            problem_overview=record["problem_overview"],
            acceptance_rates=record["acceptance_rates"],
            sample_counts=record["sample_counts"],
            metric_tables=record["metric_tables"],
            hypothesis_table=record["hypothesis_table"],
            retry_histogram=record["retry_histogram"],
        )


def _round2(value: float) -> float:
    return round(value, 2)


def _build_bundle(cfg: PipelineConfig) -> ReportBundle:
    store = _store(cfg)
    problems = _sorted_problems(store)
    by_slug = {p.slug: p for p in problems}
    extract_rows = _read_jsonl(stage_extract(cfg))
    detect_rows = _read_jsonl(stage_detect(cfg))
    repair_rows = _read_jsonl(stage_repair(cfg))
    verdict_rows = _read_jsonl(stage_judge(cfg))
    generate_rows = _read_jsonl(stage_generate(cfg))
    metric_rows = _read_jsonl(stage_analyze(cfg))
    stats_payload = json.loads(stage_stats(cfg).read_text(encoding="utf-8"))

    user_accepted = [
        r for r in verdict_rows if r["status"] == VerdictStatus.ACCEPTED.value
    ]
    solved_slugs_user = {r["slug"] for r in user_accepted}
    gen_with_status = [r for r in generate_rows if r["status"] is not None]
    gen_accepted = [
        r
        for r in gen_with_status
        if r["status"] == GenerationStatus.ACCEPTED.value
    ]
    gen_solved_slugs = {r["slug"] for r in gen_accepted}
    client_errors = [r for r in generate_rows if r["client_error"] is not None]

    # Table: solved problems by difficulty, both origins.
    overview = []
    sums = {"generated_solved": 0, "user_solved": 0, "problems": 0}
    for bucket in _DIFFICULTY_ORDER:
        slugs = [p.slug for p in problems if p.difficulty.value == bucket]
        row = {
            "difficulty": bucket,
            "generated_solved": sum(1 for s in slugs if s in gen_solved_slugs),
            "user_solved": sum(1 for s in slugs if s in solved_slugs_user),
            "problems": len(slugs),
        }
        overview.append(row)
        for key in sums:
            sums[key] += row[key]
    overview.append({"difficulty": "Total", **sums})

    # Table: community acceptance rates of the problems themselves.
    acceptance = []
    for bucket in (*_DIFFICULTY_ORDER, "All"):
        rates = sorted(
            p.acceptance_rate * 100.0
            for p in problems
            if bucket == "All" or p.difficulty.value == bucket
        )
        acceptance.append(
            {
                "difficulty": bucket,
                "n": len(rates),
                "mean_rate": _round2(statistics.fmean(rates)) if rates else None,
                "median_rate": _round2(statistics.median(rates)) if rates else None,
            }
        )

    # Table: object counts through the funnel.
    subject_rows = [
        r for r in detect_rows if r["language"] == SUBJECT_LANGUAGE.value
    ]
    counts = [
        {"item": "problems", "count": len(problems)},
        {"item": "snippets_extracted", "count": len(extract_rows)},
        {"item": "snippets_subject_language", "count": len(subject_rows)},
        {"item": "user_solutions_judged", "count": len(verdict_rows)},
        {"item": "user_solutions_accepted", "count": len(user_accepted)},
        {"item": "generation_attempted", "count": len(gen_with_status)},
        {"item": "generation_accepted", "count": len(gen_accepted)},
        {
            "item": "generation_invalid",
            "count": len(gen_with_status) - len(gen_accepted),
        },
        {"item": "generation_client_errors", "count": len(client_errors)},
        {
            "item": "imports_repaired_solutions",
            "count": sum(1 for r in repair_rows if r["inserted"] > 0),
        },
    ]

    before, after = partition_by_cutoff(
        problems, gen_with_status, cfg.cutoff_date
    )
    overall = CutoffStats(
        solved=before.solved + after.solved, total=before.total + after.total
    )
    partition = [
        {
            "window": name,
            "solved": s.solved,
            "total": s.total,
            "rate": _round2(s.rate),
        }
        for name, s in (
            ("before_cutoff", before),
            ("after_cutoff", after),
            ("overall", overall),
        )
    ]

    records = [_record_from_row(r) for r in metric_rows]
    metric_tables: dict[str, list[dict]] = {m: [] for m in _METRIC_FIELDS}
    if records:
        difficulties = {p.slug: p.difficulty for p in problems}
        for row in aggregate_metrics(records, difficulties):
            metric_tables[row.metric].append(
                {
                    "origin": row.origin,
                    "difficulty": row.difficulty,
                    "n": row.n,
                    "mean": _round2(row.mean) if row.mean is not None else None,
                    "median": _round2(row.median)
                    if row.median is not None
                    else None,
                }
            )

    histogram = sorted(
        (
            {
                "question_id": by_slug[r["slug"]].question_id,
                "slug": r["slug"],
                "attempts": r["attempts_used"],
                "solved": r["status"] == GenerationStatus.ACCEPTED.value,
            }
            for r in gen_with_status
        ),
        key=lambda row: row["question_id"],
    )

    bundle = ReportBundle(
        problem_overview=overview,
        acceptance_rates=acceptance,
        sample_counts={"counts": counts, "partition": partition},
        metric_tables=metric_tables,
        hypothesis_table=stats_payload["outcomes"],
        retry_histogram=histogram,
    )
    verify_bundle(bundle)
    return bundle


def verify_bundle(bundle: ReportBundle) -> None:
    """Re-derive every total and percentage; raise on any mismatch."""
    overview = bundle.problem_overview
    if overview:
        total_row = overview[-1]
        if total_row.get("difficulty") != "Total":
            raise ReportInconsistent("problem_overview lacks a Total row")
        for key in ("generated_solved", "user_solved", "problems"):
            body = sum(row[key] for row in overview[:-1])
            if body != total_row[key]:
                raise ReportInconsistent(
                    f"problem_overview {key}: rows sum to {body}, "
                    f"total says {total_row[key]}"
                )
    partition = bundle.sample_counts.get("partition", [])
    by_window = {row["window"]: row for row in partition}
    for row in partition:
        expected = (
            0.0
            if row["total"] == 0
            else 100.0 * row["solved"] / row["total"]
        )
        if abs(row["rate"] - expected) > 0.01:
            raise ReportInconsistent(
                f"partition {row['window']}: rate {row['rate']} vs "
                f"recomputed {expected:.4f}"
            )
    if {"before_cutoff", "after_cutoff", "overall"} <= set(by_window):
        for key in ("solved", "total"):
            pieces = by_window["before_cutoff"][key] + by_window["after_cutoff"][key]
            if pieces != by_window["overall"][key]:
                raise ReportInconsistent(
                    f"partition {key}: {pieces} != {by_window['overall'][key]}"
                )
    for row in bundle.acceptance_rates:
        if row["mean_rate"] is not None and not 0 <= row["mean_rate"] <= 100:
            raise ReportInconsistent("acceptance rate out of range")
    for metric, rows in bundle.metric_tables.items():
        per_origin: dict[str, dict[str, int]] = {}
        for row in rows:
            per_origin.setdefault(row["origin"], {})[row["difficulty"]] = row["n"]
        for origin, buckets in per_origin.items():
            body = sum(buckets.get(d, 0) for d in _DIFFICULTY_ORDER)
            if body != buckets.get("All", 0):
                raise ReportInconsistent(
                    f"{metric}/{origin}: difficulty ns {body} != All "
                    f"{buckets.get('All', 0)}"
                )


_CSV_FORMATS = {
    "p_value": "{:.6e}",
    "statistic": "{:.4f}",
    "effect_size_d": "{:.4f}",
    "alpha_adjusted": "{:.4f}",
    "score": "{:.4f}",
}


def _format_cell(column: str, value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        pattern = _CSV_FORMATS.get(column, "{:.2f}")
        return pattern.format(value)
    return str(value)


def _write_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(
            ",".join(_format_cell(col, row.get(col)) for col in columns)
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_bundle(cfg: PipelineConfig, bundle: ReportBundle) -> Path:
    """Emit the bundle as CSV tables plus a single report.json."""
    report_dir = cfg.report_dir
    report_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        report_dir / "problem_overview.csv",
        bundle.problem_overview,
        ["difficulty", "generated_solved", "user_solved", "problems"],
    )
    _write_csv(
        report_dir / "acceptance_rates.csv",
        bundle.acceptance_rates,
        ["difficulty", "n", "mean_rate", "median_rate"],
    )
    _write_csv(
        report_dir / "sample_counts.csv",
        bundle.sample_counts["counts"],
        ["item", "count"],
    )
    _write_csv(
        report_dir / "partition.csv",
        bundle.sample_counts["partition"],
        ["window", "solved", "total", "rate"],
    )
    for metric, rows in bundle.metric_tables.items():
        _write_csv(
            report_dir / f"metric_{metric}.csv",
            rows,
            ["origin", "difficulty", "n", "mean", "median"],
        )
    _write_csv(
        report_dir / "hypotheses.csv",
        bundle.hypothesis_table,
        [
            "hypothesis_id",
            "label",
            "method",
            "alternative",
            "statistic",
            "p_value",
            "alpha_adjusted",
            "effect_size_d",
            "accepted",
            "n1",
            "n2",
            "exact",
            "note",
        ],
    )
    _write_csv(
        report_dir / "retry_histogram.csv",
        bundle.retry_histogram,
        ["question_id", "slug", "attempts", "solved"],
    )
    report_json = report_dir / "report.json"
    report_json.write_text(
        json.dumps(bundle.as_dict(), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return report_json


def stage_report(cfg: PipelineConfig) -> ReportBundle:
    bundle = _build_bundle(cfg)
    write_bundle(cfg, bundle)
    return bundle


# --------------------------------------------------------------------------
# Orchestration


STAGE_ORDER = (
    "extract",
    "detect",
    "repair",
    "judge",
    "generate",
    "analyze",
    "stats",
    "report",
)

_STAGE_FUNCTIONS: dict[str, Callable[[PipelineConfig], object]] = {
    "extract": stage_extract,
    "detect": stage_detect,
    "repair": stage_repair,
    "judge": stage_judge,
    "generate": stage_generate,
    "analyze": stage_analyze,
    "stats": stage_stats,
    "report": stage_report,
}


def run_stage(cfg: PipelineConfig, stage: str):
    """Run one named stage (its dependencies build on demand)."""
    if stage not in _STAGE_FUNCTIONS:
        raise ConfigError(f"unknown stage {stage!r}")
    return _STAGE_FUNCTIONS[stage](cfg)


def cmd_run_all(cfg: PipelineConfig) -> ReportBundle:
    """The whole flow; failures carry the last completed stage name."""
    cfg.validate()
    completed = "none"
    for stage in STAGE_ORDER:
        try:
            result = _STAGE_FUNCTIONS[stage](cfg)
        except PipelineError:
            raise
        except Exception as exc:
            raise StageFailure(stage, completed, exc) from exc
        completed = stage
    assert isinstance(result, ReportBundle)
    return result
