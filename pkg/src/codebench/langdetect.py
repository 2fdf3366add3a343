"""Snippet language identification.

Four signals, tried in a fixed priority order:

1. the fence language hint on the snippet itself,
2. the post's tags (used only when exactly one known language appears),
3. the post title (same exactly-one rule),
4. a weighted keyword/pattern score over the snippet text; the best-scoring
   language wins, with ties and all-zero scores mapping to ``Unknown``.

Profiles — alias tables, title patterns, and scoring rules — are data, not
code; the packaged defaults live in ``data/lang_profiles.json`` and callers
may load their own tuned file.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path


class Language(Enum):
    PYTHON = "Python"
    JAVA = "Java"
    CPP = "C++"
    C = "C"
    CSHARP = "C#"
    JAVASCRIPT = "JavaScript"
    TYPESCRIPT = "TypeScript"
    GO = "Go"
    RUST = "Rust"
    RUBY = "Ruby"
    SWIFT = "Swift"
    KOTLIN = "Kotlin"
    SCALA = "Scala"
    PHP = "PHP"
    SQL = "SQL"
    UNKNOWN = "Unknown"


SUBJECT_LANGUAGE = Language.PYTHON


class DetectionSource(Enum):
    FENCE_HINT = "FenceHint"
    TAG = "Tag"
    TITLE = "Title"
    LEXICAL = "Lexical"


@dataclass(frozen=True)
class Rule:
    """One scoring rule: a literal keyword or a regular-expression pattern."""

    pattern: str
    weight: float
    regex: bool = False

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError(f"rule weight must be positive: {self.weight}")
        if not self.pattern:
            raise ValueError("rule pattern must be non-empty")

    def compile(self) -> re.Pattern:
        if self.regex:
            return re.compile(self.pattern, re.MULTILINE)
        # Literal keywords match case-sensitively, anchored at word
        # boundaries wherever the literal itself starts/ends with a word
        # character.
        body = re.escape(self.pattern)
        if re.match(r"\w", self.pattern):
            body = r"\b" + body
        if re.search(r"\w\Z", self.pattern):
            body = body + r"\b"
        return re.compile(body)


@dataclass(frozen=True)
class LanguageProfile:
    language: Language
    aliases: tuple[str, ...]
    title_pattern: str | None
    rules: tuple[Rule, ...]


@dataclass(frozen=True)
class DetectionResult:
    language: Language
    score: float
    source: DetectionSource
    runner_up_score: float


class ProfileSet:
    """Compiled profiles plus the alias lookup used by hint/tag matching."""

    def __init__(self, profiles: list[LanguageProfile]):
        seen = set()
        for profile in profiles:
            if profile.language in seen:
                raise ValueError(f"duplicate profile for {profile.language}")
            seen.add(profile.language)
        self.profiles = {p.language: p for p in profiles}
        self.alias_map: dict[str, Language] = {}
        for profile in profiles:
            for alias in profile.aliases:
                self.alias_map[alias.lower()] = profile.language
        self._compiled = {
            p.language: [(rule.compile(), rule.weight) for rule in p.rules]
            for p in profiles
        }
        self._title_patterns = {
            p.language: re.compile(p.title_pattern)
            for p in profiles
            if p.title_pattern
        }

    @classmethod
    def from_file(cls, path: str | Path) -> "ProfileSet":
        with open(path, encoding="utf-8") as fh:
            return cls._from_payload(json.load(fh))

    @classmethod
    def default(cls) -> "ProfileSet":
        payload = json.loads(
            resources.files("codebench.data").joinpath("lang_profiles.json").read_text()
        )
        return cls._from_payload(payload)

    @classmethod
    def _from_payload(cls, payload: dict) -> "ProfileSet":
        profiles = []
        for entry in payload["languages"]:
            profiles.append(
                LanguageProfile(
                    language=Language(entry["language"]),
                    aliases=tuple(entry.get("aliases", [])),
                    title_pattern=entry.get("title_pattern"),
                    rules=tuple(
                        Rule(
                            pattern=rule["pattern"],
                            weight=rule["weight"],
                            regex=rule.get("regex", False),
                        )
                        for rule in entry.get("rules", [])
                    ),
                )
            )
        return cls(profiles)

    # -- scoring -----------------------------------------------------------

    def score_all(self, text: str) -> dict[Language, float]:
        """Weighted occurrence score for every profile (diagnostic view)."""
        scores = {}
        for language, rules in self._compiled.items():
            total = 0.0
            for compiled, weight in rules:
                count = sum(1 for _ in compiled.finditer(text))
                total += weight * count
            scores[language] = total
        return scores

    def _lexical(self, text: str) -> DetectionResult:
        scores = self.score_all(text)
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0].value))
        best_lang, best = ranked[0]
        runner_up = ranked[1][1] if len(ranked) > 1 else 0.0
        if best == 0.0 or best == runner_up:
            best_lang = Language.UNKNOWN
        return DetectionResult(best_lang, best, DetectionSource.LEXICAL, runner_up)

    def _single_match(self, candidates: list[Language]) -> Language | None:
        distinct = []
        for language in candidates:
            if language not in distinct:
                distinct.append(language)
        return distinct[0] if len(distinct) == 1 else None

    def detect(self, snippet, post=None) -> DetectionResult:
        """Assign a language to a snippet, using the post for tag/title context."""
        text = getattr(snippet, "raw_text", snippet)
        hint = getattr(snippet, "fence_language_hint", None)
        if hint:
            language = self.alias_map.get(hint.lower())
            if language is not None:
                return DetectionResult(language, 0.0, DetectionSource.FENCE_HINT, 0.0)
        if post is not None:
            tagged = [
                self.alias_map[tag.lower()]
                for tag in post.tags
                if tag.lower() in self.alias_map
            ]
            language = self._single_match(tagged)
            if language is not None:
                return DetectionResult(language, 0.0, DetectionSource.TAG, 0.0)
            titled = [
                lang
                for lang, pattern in sorted(
                    self._title_patterns.items(), key=lambda kv: kv[0].value
                )
                if pattern.search(post.title)
            ]
            language = self._single_match(titled)
            if language is not None:
                return DetectionResult(language, 0.0, DetectionSource.TITLE, 0.0)
        return self._lexical(text)


@lru_cache(maxsize=1)
def default_profiles() -> ProfileSet:
    return ProfileSet.default()


def detect(snippet, post=None, profiles: ProfileSet | None = None) -> DetectionResult:
    """Module-level convenience over the packaged default profiles."""
    return (profiles or default_profiles()).detect(snippet, post)


def score_all(snippet, profiles: ProfileSet | None = None) -> dict[Language, float]:
    text = getattr(snippet, "raw_text", snippet)
    return (profiles or default_profiles()).score_all(text)
