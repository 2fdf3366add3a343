"""Judging: percentile ranks, verdict folding, protocol client, canned judge."""

import json
import os
import sys
import time
from datetime import date

import pytest
from hypothesis import given
from hypothesis import strategies as st

from codebench.corpus import Difficulty, Problem
from codebench.judge import (
    CannedVerdictJudge,
    DEFAULT_MEMORY_LIMIT_MB,
    DEFAULT_TIME_LIMIT_MS,
    Direction,
    EmptyPopulation,
    LocalJudge,
    ProtocolRunner,
    RankPair,
    RunOutcome,
    RunReply,
    RunRequest,
    RunnerUnavailable,
    Verdict,
    VerdictRule,
    VerdictStatus,
    decode_reply,
    encode_request,
    entry_point,
    normalize_output,
    percentile_rank,
    rank_pair,
    run_submission,
)

from conftest import FIXTURES

FAKE_SHIM = [sys.executable, os.path.join(FIXTURES, "fake_shim.py")]

FRAMEWORK = (
    "class Solution:\n"
    "    def twoSum(self, nums, target):\n"
    "        pass\n"
)


def make_problem(slug="two-sum", test_cases=None, framework=FRAMEWORK):
    if test_cases is None:
        test_cases = [("2 7 11 15\n9", "0 1"), ("3 3\n6", "0 1")]
    return Problem(
        slug=slug,
        question_id=1,
        title=slug.replace("-", " ").title(),
        difficulty=Difficulty.EASY,
        acceptance_rate=48.5,
        categories=frozenset({"Array"}),
        description="Find indices of two numbers adding to target.",
        code_framework=framework,
        test_cases=test_cases,
        released_at=date(2015, 8, 7),
    )


class ScriptedRunner:
    """Feeds back a fixed sequence of replies and records every request."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.requests = []
        self.closed = False

    def run(self, request):
        self.requests.append(request)
        return self.replies.pop(0)

    def close(self):
        self.closed = True


def ok(output, wall=10.0, peak=4.0):
    return RunReply(
        outcome=RunOutcome.OK, output=output, trace="", wall_ms=wall, peak_mb=peak
    )


class TestPercentileRank:
    def test_middle_value(self):
        assert percentile_rank(55, [40, 60, 70]) == pytest.approx(66.67, abs=0.005)

    def test_worse_than_all(self):
        assert percentile_rank(99, [40, 60, 70]) == 0.0

    def test_better_than_all(self):
        assert percentile_rank(1, [40, 60, 70]) == 100.0

    def test_rank_sixty_means_beating_sixty_percent(self):
        population = [10] * 4 + [90] * 6
        assert percentile_rank(50, population) == 60.0

    def test_ties_count_as_not_worse(self):
        assert percentile_rank(40, [40, 40, 40]) == 0.0
        assert percentile_rank(40, [40, 41]) == 50.0

    def test_empty_population(self):
        with pytest.raises(EmptyPopulation):
            percentile_rank(1.0, [])

    def test_explicit_direction(self):
        assert percentile_rank(55, [40, 60, 70], Direction.LOWER_IS_BETTER) == pytest.approx(
            200.0 / 3.0
        )

    @given(
        st.lists(st.floats(0, 1e6), min_size=1, max_size=30),
        st.floats(0, 1e6),
        st.floats(0, 1e6),
    )
    def test_antitone_in_value(self, population, a, b):
        low, high = min(a, b), max(a, b)
        assert percentile_rank(low, population) >= percentile_rank(high, population)

    @given(st.lists(st.floats(0, 1e6), min_size=1, max_size=30), st.floats(0, 1e6))
    def test_bounded(self, population, value):
        assert 0.0 <= percentile_rank(value, population) <= 100.0


class TestRankPair:
    def test_ranks_each_axis(self):
        verdict = Verdict(VerdictStatus.ACCEPTED, 1, 1, "", 100.0, 20.0)
        pair = rank_pair(verdict, [(150.0, 10.0), (50.0, 30.0), (200.0, 40.0)])
        assert pair.runtime_rank == pytest.approx(200.0 / 3.0)
        assert pair.memory_rank == pytest.approx(200.0 / 3.0)
        assert pair.population_size == 3

    def test_empty_population(self):
        verdict = Verdict(VerdictStatus.ACCEPTED, 1, 1, "", 100.0, 20.0)
        with pytest.raises(EmptyPopulation):
            rank_pair(verdict, [])

    def test_invalid_rank_pair_rejected(self):
        with pytest.raises(ValueError):
            RankPair(runtime_rank=101.0, memory_rank=0.0, population_size=1)
        with pytest.raises(ValueError):
            RankPair(runtime_rank=50.0, memory_rank=50.0, population_size=0)


class TestVerdictInvariants:
    def test_accepted_requires_full_pass(self):
        with pytest.raises(ValueError):
            Verdict(VerdictStatus.ACCEPTED, 3, 2, "", 1.0, 1.0)

    def test_non_accepted_cannot_pass_everything(self):
        with pytest.raises(ValueError):
            Verdict(VerdictStatus.WRONG_ANSWER, 3, 3, "x", 1.0, 1.0)

    def test_negative_measurements_rejected(self):
        with pytest.raises(ValueError):
            Verdict(VerdictStatus.ACCEPTED, 1, 1, "", -1.0, 1.0)


class TestEntryPoint:
    def test_class_method(self):
        assert entry_point(FRAMEWORK) == "Solution.twoSum"

    def test_skips_dunder_methods(self):
        framework = (
            "class MinStack:\n"
            "    def __init__(self):\n"
            "        pass\n"
            "    def push(self, val):\n"
            "        pass\n"
        )
        assert entry_point(framework) == "MinStack.push"

    def test_bare_function(self):
        assert entry_point("def solve(data):\n    pass\n") == "solve"

    def test_no_entry(self):
        with pytest.raises(ValueError):
            entry_point("x = 3\n")


class TestNormalizeOutput:
    def test_trailing_spaces_stripped(self):
        assert normalize_output("3 \n1\t\n") == "3\n1"

    def test_trailing_blank_lines_dropped(self):
        assert normalize_output("3\n\n\n") == "3"

    def test_interior_whitespace_preserved(self):
        assert normalize_output("a  b\nc") == "a  b\nc"


class TestRunSubmission:
    def test_all_passing(self):
        problem = make_problem(
            test_cases=[("a", "A"), ("b", "B"), ("c", "C")]
        )
        runner = ScriptedRunner([ok("A", 10), ok("B", 30), ok("C", 20)])
        verdict = run_submission("code", problem, runner=runner)
        assert verdict.status is VerdictStatus.ACCEPTED
        assert (verdict.tests_passed, verdict.tests_total) == (3, 3)
        assert verdict.runtime_ms == 30
        assert verdict.error_info == ""

    def test_wrong_answer_shows_expected_and_actual(self):
        problem = make_problem(test_cases=[("2 7 11 15\n9", "0 1")])
        runner = ScriptedRunner([ok("1 0")])
        verdict = run_submission("code", problem, runner=runner)
        assert verdict.status is VerdictStatus.WRONG_ANSWER
        assert verdict.tests_passed == 0
        assert "expected:\n0 1" in verdict.error_info
        assert "actual:\n1 0" in verdict.error_info
        assert "2 7 11 15" in verdict.error_info

    def test_stops_at_first_failure(self):
        problem = make_problem(test_cases=[("a", "A"), ("b", "B"), ("c", "C")])
        runner = ScriptedRunner([ok("A"), ok("nope"), ok("C")])
        verdict = run_submission("code", problem, runner=runner)
        assert verdict.tests_passed == 1
        assert len(runner.requests) == 2

    def test_exception_becomes_runtime_error(self):
        problem = make_problem(test_cases=[("a", "A")])
        runner = ScriptedRunner(
            [
                RunReply(
                    outcome=RunOutcome.EXCEPTION,
                    output="",
                    trace="KeyError: 'q'",
                    wall_ms=4.0,
                    peak_mb=3.0,
                )
            ]
        )
        verdict = run_submission("code", problem, runner=runner)
        assert verdict.status is VerdictStatus.RUNTIME_ERROR
        assert "KeyError" in verdict.error_info

    def test_timeout_reply(self):
        problem = make_problem(test_cases=[("a", "A")])
        runner = ScriptedRunner(
            [RunReply(RunOutcome.TIMEOUT, "", "", 1203.0, 2.0)]
        )
        verdict = run_submission("code", problem, limits=(1000, 64), runner=runner)
        assert verdict.status is VerdictStatus.TIME_LIMIT_EXCEEDED
        assert verdict.runtime_ms >= 1000
        assert "1000 ms" in verdict.error_info

    def test_memory_exceeded_reply(self):
        problem = make_problem(test_cases=[("a", "A")])
        runner = ScriptedRunner(
            [RunReply(RunOutcome.MEMORY_EXCEEDED, "", "", 9.0, 70.0)]
        )
        verdict = run_submission("code", problem, limits=(1000, 64), runner=runner)
        assert verdict.status is VerdictStatus.MEMORY_LIMIT_EXCEEDED
        assert "64 MB" in verdict.error_info

    def test_whitespace_normalized_comparison(self):
        problem = make_problem(test_cases=[("a", "3\n")])
        runner = ScriptedRunner([ok("3 \n\n")])
        verdict = run_submission("code", problem, runner=runner)
        assert verdict.status is VerdictStatus.ACCEPTED

    def test_requests_carry_framework_entry_and_limits(self):
        problem = make_problem(test_cases=[("a", "A")])
        runner = ScriptedRunner([ok("A")])
        run_submission("code", problem, limits=(2500, 128), runner=runner)
        request = runner.requests[0]
        assert request.entry == "Solution.twoSum"
        assert request.solution == "code"
        assert (request.time_ms, request.memory_mb) == (2500, 128)

    def test_no_test_cases(self):
        problem = make_problem(test_cases=[])
        with pytest.raises(ValueError):
            run_submission("code", problem, runner=ScriptedRunner([]))

    def test_no_runner(self):
        with pytest.raises(RunnerUnavailable):
            run_submission("code", make_problem())

    def test_first_fail_index_matches_tests_passed(self):
        problem = make_problem(
            test_cases=[("a", "A"), ("b", "B"), ("c", "C"), ("d", "D")]
        )
        runner = ScriptedRunner([ok("A"), ok("B"), ok("X"), ok("D")])
        verdict = run_submission("code", problem, runner=runner)
        assert verdict.tests_passed == 2
        assert verdict.status is VerdictStatus.WRONG_ANSWER


class TestFrameCodec:
    def test_request_round_trip_is_sorted_json(self):
        request = RunRequest("src", "Solution.f", "1 2", 1000, 64)
        payload = encode_request(request)
        record = json.loads(payload)
        assert list(record) == sorted(record)
        assert record["solution"] == "src"

    def test_reply_decoding(self):
        reply = decode_reply(
            b'{"outcome": "Ok", "output": "4", "peak_mb": 1.5, "trace": "", "wall_ms": 2.0}'
        )
        assert reply.outcome is RunOutcome.OK
        assert reply.output == "4"


class TestProtocolRunner:
    def test_round_trip_through_fake_shim(self):
        with ProtocolRunner(FAKE_SHIM) as runner:
            reply = runner.run(RunRequest("s", "e", "hello", 1000, 64))
            assert reply.outcome is RunOutcome.OK
            assert reply.output == "HELLO"
            second = runner.run(RunRequest("s", "e", "again", 1000, 64))
            assert second.output == "AGAIN"

    def test_exception_reply(self):
        with ProtocolRunner(FAKE_SHIM) as runner:
            reply = runner.run(RunRequest("s", "e", "boom", 1000, 64))
            assert reply.outcome is RunOutcome.EXCEPTION
            assert "ZeroDivisionError" in reply.trace

    def test_missing_command(self):
        with pytest.raises(RunnerUnavailable):
            ProtocolRunner(["/nonexistent/runner-binary"])

    def test_err_frame_raises(self):
        with ProtocolRunner(FAKE_SHIM) as runner:
            with pytest.raises(RunnerUnavailable):
                runner.run(RunRequest("s", "e", "protocol-err", 1000, 64))

    def test_silent_runner_killed_at_twice_limit(self):
        with ProtocolRunner(FAKE_SHIM) as runner:
            started = time.perf_counter()
            reply = runner.run(RunRequest("s", "e", "hang", 200, 64))
            elapsed = time.perf_counter() - started
            assert reply.outcome is RunOutcome.TIMEOUT
            assert reply.wall_ms >= 400
            assert elapsed < 10

    def test_unicode_payload(self):
        with ProtocolRunner(FAKE_SHIM) as runner:
            reply = runner.run(RunRequest("s", "e", "père-λ", 1000, 64))
            assert reply.output == "PÈRE-Λ"

    def test_local_judge_over_fake_shim(self):
        judge = LocalJudge(lambda: ProtocolRunner(FAKE_SHIM))
        problem = make_problem(test_cases=[("ab", "AB"), ("cd", "CD")])
        verdict = judge.submit("code", problem)
        assert verdict.status is VerdictStatus.ACCEPTED

    def test_timeout_outcome_maps_to_tle_verdict(self):
        judge = LocalJudge(lambda: ProtocolRunner(FAKE_SHIM), limits=(1000, 64))
        problem = make_problem(test_cases=[("slow", "whatever")])
        verdict = judge.submit("code", problem)
        assert verdict.status is VerdictStatus.TIME_LIMIT_EXCEEDED


class TestCannedVerdictJudge:
    def canned(self):
        return CannedVerdictJudge(
            rules={
                "two-sum": [
                    VerdictRule(
                        status=VerdictStatus.TIME_LIMIT_EXCEEDED,
                        contains="while True",
                        error_info="test 0: exceeded the time limit",
                    ),
                    VerdictRule(status=VerdictStatus.ACCEPTED, contains="return"),
                ],
                "*": [
                    VerdictRule(
                        status=VerdictStatus.RUNTIME_ERROR,
                        pattern=r"\braise\b",
                        error_info="test 0: RuntimeError",
                    ),
                ],
            },
        )

    def test_first_matching_rule_wins(self):
        judge = self.canned()
        verdict = judge.submit("while True:\n    return 1\n", make_problem())
        assert verdict.status is VerdictStatus.TIME_LIMIT_EXCEEDED

    def test_accepted_fills_test_counts(self):
        judge = self.canned()
        problem = make_problem()
        verdict = judge.submit("def f():\n    return 1\n", problem)
        assert verdict.status is VerdictStatus.ACCEPTED
        assert verdict.tests_passed == verdict.tests_total == len(problem.test_cases)
        assert verdict.error_info == ""

    def test_wildcard_rules_apply_to_other_slugs(self):
        judge = self.canned()
        problem = make_problem(slug="other-problem")
        verdict = judge.submit("raise ValueError\n", problem)
        assert verdict.status is VerdictStatus.RUNTIME_ERROR

    def test_default_when_nothing_matches(self):
        judge = self.canned()
        verdict = judge.submit("x = 1\n", make_problem(slug="other-problem"))
        assert verdict.status is VerdictStatus.WRONG_ANSWER
        assert verdict.tests_passed == 0

    def test_deterministic_measurements(self):
        judge = self.canned()
        problem = make_problem()
        one = judge.submit("def f():\n    return 1\n", problem)
        two = judge.submit("def f():\n    return 1\n", problem)
        assert one == two

    def test_measurements_depend_on_solution_text(self):
        judge = self.canned()
        problem = make_problem()
        one = judge.submit("def f():\n    return 1\n", problem)
        two = judge.submit("def f():\n    return 2\n", problem)
        assert (one.runtime_ms, one.peak_memory_mb) != (two.runtime_ms, two.peak_memory_mb)

    def test_measurement_ranges(self):
        judge = self.canned()
        for i in range(25):
            verdict = judge.submit(f"return {i}", make_problem())
            assert 40.0 <= verdict.runtime_ms < 2040.0
            assert 14.0 <= verdict.peak_memory_mb < 78.0

    def test_rule_specified_tests_passed_is_clamped(self):
        judge = CannedVerdictJudge(
            rules={
                "two-sum": [
                    VerdictRule(
                        status=VerdictStatus.WRONG_ANSWER,
                        tests_passed=99,
                        error_info="late failure",
                    )
                ]
            }
        )
        problem = make_problem(test_cases=[("a", "A"), ("b", "B")])
        verdict = judge.submit("anything", problem)
        assert verdict.tests_passed == 1
        assert verdict.tests_total == 2

    def test_no_test_cases_rejected(self):
        judge = self.canned()
        with pytest.raises(ValueError):
            judge.submit("code", make_problem(test_cases=[]))

    def test_from_file(self, tmp_path):
        config = {
            "default": {"status": "RuntimeError", "error_info": "test 0: NameError"},
            "rules": {
                "two-sum": [
                    {"contains": "from collections import", "status": "Accepted"}
                ],
                "*": [
                    {
                        "pattern": "sleep",
                        "status": "TimeLimitExceeded",
                        "error_info": "test 0: exceeded the time limit",
                    }
                ],
            },
        }
        path = tmp_path / "verdicts.json"
        path.write_text(json.dumps(config), encoding="utf-8")
        judge = CannedVerdictJudge.from_file(path)
        accepted = judge.submit(
            "from collections import defaultdict\n", make_problem()
        )
        assert accepted.status is VerdictStatus.ACCEPTED
        fallback = judge.submit("d = defaultdict(list)\n", make_problem())
        assert fallback.status is VerdictStatus.RUNTIME_ERROR
        assert "NameError" in fallback.error_info
        slowed = judge.submit("time.sleep(9)\n", make_problem(slug="elsewhere"))
        assert slowed.status is VerdictStatus.TIME_LIMIT_EXCEEDED

    def test_default_limits_are_generous(self):
        assert DEFAULT_TIME_LIMIT_MS == 10_000
        assert DEFAULT_MEMORY_LIMIT_MB == 512
