"""Command-line entry points.

One subcommand per pipeline stage plus ``import`` for loading dumps into
a corpus directory and ``run-all`` for the whole flow.  ``repair`` and
``detect`` also work standalone on single files, without a config.

Exit codes: 0 on success, 2 when a stage fails partway (the message
names the stage and what stayed cached), 3 on configuration errors.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import pipeline
from .corpus import CorpusError, CorpusStore, Snippet
from .imports import ImportMapping, UnresolvedName, repair as repair_source
from .langdetect import default_profiles, score_all
from .lexer import LexError

EXIT_STAGE_FAILURE = 2
EXIT_CONFIG_ERROR = 3


def _load_config(
    path: str, *, require_corpus: bool = True
) -> pipeline.PipelineConfig:
    try:
        return pipeline.PipelineConfig.from_file(
            path, require_corpus=require_corpus
        )
    except pipeline.ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)


def _run_stage(config: str, stage: str) -> None:
    cfg = _load_config(config)
    try:
        pipeline.run_stage(cfg, stage)
    except pipeline.ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    except pipeline.PipelineError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_STAGE_FAILURE)
    click.echo(f"{stage}: ok")


_CONFIG_OPTION = click.option(
    "--config",
    "config",
    default="config.json",
    show_default=True,
    help="Path to the pipeline config file.",
)


@click.group()
def main() -> None:
    """Compare generated and community solutions on a problem corpus."""


@main.command("import")
@_CONFIG_OPTION
@click.option(
    "--problems",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="Problem dump (JSON list) to load into the corpus.",
)
@click.option(
    "--posts",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Post dump (JSON list) to load into the corpus.",
)
def cmd_import(config: str, problems: str, posts: str | None) -> None:
    """Load problem and post dumps into the corpus directory."""
    cfg = _load_config(config, require_corpus=False)
    store = CorpusStore(cfg.corpus_dir)
    try:
        kept = store.import_problems(problems)
        posted = []
        if posts is not None:
            posted = store.import_posts(posts)
        store.write_manifest(cfg.cutoff_date)
    except (OSError, ValueError, KeyError, CorpusError) as exc:
        click.echo(f"error: import failed: {exc}", err=True)
        sys.exit(EXIT_STAGE_FAILURE)
    click.echo(f"import: {len(kept)} problems, {len(posted)} posts")


@main.command("extract")
@_CONFIG_OPTION
def cmd_extract(config: str) -> None:
    """Lift fenced snippets out of the stored posts."""
    _run_stage(config, "extract")


@main.command("detect")
@_CONFIG_OPTION
@click.option(
    "--snippet",
    "snippet_file",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Score a single snippet file instead of running the stage.",
)
def cmd_detect(config: str, snippet_file: str | None) -> None:
    """Detect snippet languages (or score one file with --snippet)."""
    if snippet_file is not None:
        text = Path(snippet_file).read_text(encoding="utf-8")
        snippet = Snippet(
            post_id=0,
            ordinal=0,
            raw_text=text,
            fence_language_hint=None,
            line_count=len(text.split("\n")),
        )
        scores = score_all(snippet, default_profiles())
        for language in sorted(scores, key=lambda l: (-scores[l], l.value)):
            click.echo(f"{language.value}\t{scores[language]:.4f}")
        return
    _run_stage(config, "detect")


@main.command("repair")
@_CONFIG_OPTION
@click.option(
    "--in",
    "in_file",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Repair a single source file instead of running the stage.",
)
@click.option(
    "--out",
    "out_file",
    type=click.Path(dir_okay=False),
    default=None,
    help="Where to write the repaired source (with --in).",
)
@click.option(
    "--map",
    "map_file",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Name-to-import-statement mapping file (with --in).",
)
def cmd_repair(
    config: str, in_file: str | None, out_file: str | None, map_file: str | None
) -> None:
    """Insert missing imports (or repair one file with --in/--out)."""
    if in_file is not None:
        if out_file is None:
            click.echo("error: --in needs --out", err=True)
            sys.exit(EXIT_CONFIG_ERROR)
        mapping = (
            ImportMapping.from_file(map_file) if map_file is not None else None
        )
        source = Path(in_file).read_text(encoding="utf-8")
        try:
            repaired = repair_source(source, mapping)
        except (UnresolvedName, LexError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_STAGE_FAILURE)
        Path(out_file).write_text(repaired, encoding="utf-8")
        click.echo(f"repair: wrote {out_file}")
        return
    _run_stage(config, "repair")


@main.command("judge")
@_CONFIG_OPTION
def cmd_judge(config: str) -> None:
    """Judge the repaired user solutions."""
    _run_stage(config, "judge")


@main.command("generate")
@_CONFIG_OPTION
@click.option("--seed", type=int, default=None, help="Override config seed.")
def cmd_generate(config: str, seed: int | None) -> None:
    """Run the generation loop over every problem."""
    cfg = _load_config(config)
    if seed is not None:
        cfg.seed = seed
    try:
        pipeline.stage_generate(cfg)
    except pipeline.PipelineError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_STAGE_FAILURE)
    click.echo("generate: ok")


@main.command("analyze")
@_CONFIG_OPTION
def cmd_analyze(config: str) -> None:
    """Compute static metrics and performance ranks."""
    _run_stage(config, "analyze")


@main.command("stats")
@_CONFIG_OPTION
def cmd_stats(config: str) -> None:
    """Run the hypothesis battery over the metric records."""
    _run_stage(config, "stats")


@main.command("report")
@_CONFIG_OPTION
def cmd_report(config: str) -> None:
    """Build and emit the report tables."""
    _run_stage(config, "report")


@main.command("run-all")
@_CONFIG_OPTION
@click.option("--seed", type=int, default=None, help="Override config seed.")
def cmd_run_all(config: str, seed: int | None) -> None:
    """Run every stage in order and write the report."""
    cfg = _load_config(config)
    if seed is not None:
        cfg.seed = seed
    try:
        bundle = pipeline.cmd_run_all(cfg)
    except pipeline.ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    except pipeline.StageFailure as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_STAGE_FAILURE)
    except pipeline.PipelineError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_STAGE_FAILURE)
    partition = bundle.sample_counts["partition"]
    overall = next(r for r in partition if r["window"] == "overall")
    click.echo(
        "run-all: {} of {} problems solved ({:.2f}%), report in {}".format(
            overall["solved"], overall["total"], overall["rate"], cfg.report_dir
        )
    )


if __name__ == "__main__":
    main()
