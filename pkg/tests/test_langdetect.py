from datetime import date

import pytest

from codebench.corpus import Post, Snippet
from codebench.langdetect import (
    SUBJECT_LANGUAGE,
    DetectionResult,
    DetectionSource,
    Language,
    LanguageProfile,
    ProfileSet,
    Rule,
    detect,
    score_all,
)
from fixtures.lang_cases import CASES as LANG_CASES


def make_snippet(text, hint=None):
    return Snippet(
        post_id=1,
        ordinal=0,
        raw_text=text,
        fence_language_hint=hint,
        line_count=len(text.split("\n")),
    )


def make_post(tags=(), title="a solution"):
    return Post(
        post_id=1,
        problem_slug="two-sum",
        title=title,
        tags=list(tags),
        upvotes=3,
        created_at=date(2023, 1, 1),
        author="u",
        body="",
    )


JAVA_MAIN = "public static void main(String[] args) {\n}\n"
PY_DEF = "def f():\n    return 1\n#x"


class TestPriorityOrder:
    def test_fence_hint_wins_over_everything(self):
        snippet = make_snippet(JAVA_MAIN, hint="python")
        post = make_post(tags=["go"], title="Rust solution")
        result = detect(snippet, post)
        assert result.language is Language.PYTHON
        assert result.source is DetectionSource.FENCE_HINT

    def test_tag_wins_over_title_and_lexical(self):
        snippet = make_snippet(JAVA_MAIN)
        post = make_post(tags=["python", "two-pointers"], title="Rust solution")
        result = detect(snippet, post)
        assert result.language is Language.PYTHON
        assert result.source is DetectionSource.TAG

    def test_title_wins_over_lexical(self):
        snippet = make_snippet(JAVA_MAIN)
        post = make_post(tags=["arrays"], title="My Python approach, beats 99%")
        result = detect(snippet, post)
        assert result.language is Language.PYTHON
        assert result.source is DetectionSource.TITLE

    def test_lexical_fallback(self):
        snippet = make_snippet(JAVA_MAIN)
        post = make_post(tags=["arrays"], title="fast solution")
        result = detect(snippet, post)
        assert result.language is Language.JAVA
        assert result.source is DetectionSource.LEXICAL

    def test_unknown_hint_falls_through(self):
        snippet = make_snippet(PY_DEF, hint="text")
        result = detect(snippet, make_post())
        assert result.source is DetectionSource.LEXICAL
        assert result.language is SUBJECT_LANGUAGE

    def test_ambiguous_tags_fall_through(self):
        snippet = make_snippet(PY_DEF)
        post = make_post(tags=["java", "python"])
        result = detect(snippet, post)
        assert result.source is not DetectionSource.TAG

    def test_ambiguous_title_falls_through(self):
        snippet = make_snippet(PY_DEF)
        post = make_post(title="Java and Python, both explained")
        result = detect(snippet, post)
        assert result.source is DetectionSource.LEXICAL

    def test_post_optional(self):
        result = detect(make_snippet(PY_DEF))
        assert result.language is SUBJECT_LANGUAGE


class TestHintAliases:
    @pytest.mark.parametrize(
        "hint,language",
        [
            ("python", Language.PYTHON),
            ("python3", Language.PYTHON),
            ("py", Language.PYTHON),
            ("Python", Language.PYTHON),
            ("cpp", Language.CPP),
            ("c++", Language.CPP),
            ("js", Language.JAVASCRIPT),
            ("golang", Language.GO),
        ],
    )
    def test_alias(self, hint, language):
        result = detect(make_snippet("anything\nat\nall", hint=hint))
        assert result.language is language
        assert result.source is DetectionSource.FENCE_HINT


class TestLexical:
    def test_java_phrase_is_java_only(self):
        scores = score_all(make_snippet(JAVA_MAIN))
        assert scores[Language.JAVA] > 0
        nonzero = {lang for lang, s in scores.items() if s > 0}
        assert nonzero == {Language.JAVA}

    def test_python_def_strictly_greatest(self):
        scores = score_all(make_snippet(PY_DEF))
        best = scores[Language.PYTHON]
        assert best > 0
        assert all(s < best for lang, s in scores.items() if lang is not Language.PYTHON)

    def test_prose_is_unknown(self):
        result = detect(make_snippet("nothing but words in here, promise"))
        assert result.language is Language.UNKNOWN
        assert result.score == 0.0

    def test_whitespace_scores_all_zero(self):
        scores = score_all(make_snippet("   \n\t\n  "))
        assert all(s == 0.0 for s in scores.values())

    def test_equal_weight_pair_ties_to_unknown(self):
        # One Java marker and one subject-language marker of equal weight.
        snippet = make_snippet("@Override\n__init__\nzzz")
        scores = score_all(snippet)
        assert scores[Language.JAVA] == scores[Language.PYTHON] > 0
        result = detect(snippet, make_post())
        assert result.language is Language.UNKNOWN
        assert result.score == result.runner_up_score

    def test_lexical_agrees_with_score_all(self):
        for _, _, text in LANG_CASES:
            snippet = make_snippet(text)
            result = detect(snippet)
            if result.source is not DetectionSource.LEXICAL:
                continue
            scores = score_all(snippet)
            best = max(scores.values())
            if result.language is Language.UNKNOWN:
                ties = [s for s in scores.values() if s == best]
                assert best == 0.0 or len(ties) > 1
            else:
                assert scores[result.language] == best == result.score

    def test_score_at_least_runner_up(self):
        for _, _, text in LANG_CASES:
            result = detect(make_snippet(text))
            if result.source is DetectionSource.LEXICAL:
                assert result.score >= result.runner_up_score

    def test_deterministic(self):
        snippet = make_snippet(LANG_CASES[0][2])
        assert detect(snippet) == detect(snippet)


class TestFixtureQuality:
    def test_subject_language_precision(self):
        predicted = []
        for _, label, text in LANG_CASES:
            result = detect(make_snippet(text))
            if result.language is SUBJECT_LANGUAGE:
                predicted.append(label)
        assert predicted, "fixture must produce subject-language predictions"
        precision = sum(1 for label in predicted if label == "Python") / len(predicted)
        assert precision >= 0.95

    def test_sixty_cases(self):
        assert len(LANG_CASES) == 60

    def test_labels_are_valid(self):
        for _, label, _ in LANG_CASES:
            Language(label)


class TestProfileValidation:
    def test_positive_weight_enforced(self):
        with pytest.raises(ValueError):
            Rule(pattern="x", weight=0)

    def test_empty_pattern_rejected(self):
        with pytest.raises(ValueError):
            Rule(pattern="", weight=1)

    def test_duplicate_language_rejected(self):
        profile = LanguageProfile(
            language=Language.GO, aliases=("go",), title_pattern=None, rules=()
        )
        with pytest.raises(ValueError):
            ProfileSet([profile, profile])

    def test_custom_profile_set(self):
        profiles = ProfileSet(
            [
                LanguageProfile(
                    language=Language.GO,
                    aliases=("go",),
                    title_pattern=None,
                    rules=(Rule(pattern="func ", weight=2),),
                )
            ]
        )
        result = profiles.detect(make_snippet("func main() {\n}\n"))
        assert result.language is Language.GO
        assert result.score == 2.0

    def test_word_boundary_literal(self):
        profiles = ProfileSet(
            [
                LanguageProfile(
                    language=Language.RUBY,
                    aliases=(),
                    title_pattern=None,
                    rules=(Rule(pattern="end", weight=1),),
                )
            ]
        )
        # "end" must not match inside "endless" or "append".
        assert profiles.score_all("endless append bend")[Language.RUBY] == 0.0
        assert profiles.score_all("it is the end")[Language.RUBY] == 1.0

    def test_non_overlapping_counts(self):
        profiles = ProfileSet(
            [
                LanguageProfile(
                    language=Language.GO,
                    aliases=(),
                    title_pattern=None,
                    rules=(Rule(pattern=":=", weight=2),),
                )
            ]
        )
        assert profiles.score_all("a := 1\nb := 2\nc := 3")[Language.GO] == 6.0
