"""Per-solution measurement: line counts, smells, complexity, normalization.

A MetricRecord is the unit every downstream consumer works with — one row
per analyzed solution.  Ranks stay None here; the pipeline fills them in
after judging, since they need the per-problem population.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .lexer import LineKind, classify_lines
from .parser import StructureTree, parse_source
from .smells import SmellConfig, count_smells
from .complexity import cognitive_complexity


class Origin(Enum):
    GENERATED = "Generated"
    USER = "User"


@dataclass(frozen=True)
class LineCounts:
    sloc: int
    ncloc: int


@dataclass
class MetricRecord:
    solution_id: str
    problem_slug: str
    origin: Origin
    line_counts: LineCounts
    smell_count: int
    complexity_total: int
    smells_per_kloc: float | None
    complexity_per_kloc: float | None
    runtime_rank: float | None = None
    memory_rank: float | None = None


class ZeroLines(Exception):
    """per_kloc needs at least one counted code line."""


def line_counts(source: str) -> LineCounts:
    tags = classify_lines(source)
    return LineCounts(
        sloc=len(tags),
        ncloc=sum(1 for t in tags if t is LineKind.CODE),
    )


def per_kloc(count: int, ncloc: int) -> float:
    """Normalize a count to units per thousand code lines."""
    if ncloc <= 0:
        raise ZeroLines(f"cannot normalize {count} over {ncloc} code lines")
    return 1000.0 * count / ncloc


def analyze_solution(
    solution_id: str,
    problem_slug: str,
    origin: Origin,
    source: str,
    smell_config: SmellConfig | None = None,
    tree: StructureTree | None = None,
) -> MetricRecord:
    """Measure one solution; per-kLOC fields are None when ncloc is zero."""
    if tree is None:
        tree = parse_source(source)
    counts = line_counts(source)
    smells = count_smells(tree, source, smell_config)
    complexity = cognitive_complexity(tree)
    if counts.ncloc > 0:
        smells_rate = per_kloc(smells.count, counts.ncloc)
        complexity_rate = per_kloc(complexity.total, counts.ncloc)
    else:
        smells_rate = None
        complexity_rate = None
    return MetricRecord(
        solution_id=solution_id,
        problem_slug=problem_slug,
        origin=origin,
        line_counts=counts,
        smell_count=smells.count,
        complexity_total=complexity.total,
        smells_per_kloc=smells_rate,
        complexity_per_kloc=complexity_rate,
    )
