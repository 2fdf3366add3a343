import pytest

from codebench.parser import parse_source
from codebench.smells import (
    BUILTIN_NAMES,
    RULES,
    RULE_IDS,
    SmellConfig,
    count_smells,
)


def findings_for(source, config=None):
    return count_smells(parse_source(source), source, config).findings


def rule_ids(source, config=None):
    return [f.rule_id for f in findings_for(source, config)]


CLEAN = """\
import math


def area(radius):
    \"\"\"Circle area.\"\"\"
    return math.pi * radius * radius
"""


class TestRegistry:
    def test_ten_rules_registered(self):
        assert len(RULES) == 10
        assert {r.rule_id for r in RULES} == RULE_IDS

    def test_every_rule_has_severity(self):
        assert all(r.severity in {"low", "medium", "high"} for r in RULES)

    def test_builtin_names_loaded(self):
        assert "print" in BUILTIN_NAMES and "list" in BUILTIN_NAMES
        assert len(BUILTIN_NAMES) > 100

    def test_clean_module_is_clean(self):
        assert findings_for(CLEAN) == []


class TestIndividualRules:
    def test_shadowed_builtin(self):
        assert "shadowed-builtin" in rule_ids("def f():\n    list = [1]\n    return list\n")
        assert "shadowed-builtin" not in rule_ids("def f():\n    items = [1]\n    return items\n")

    def test_shadowed_builtin_parameter(self):
        assert "shadowed-builtin" in rule_ids("def f(id):\n    return id\n")

    def test_empty_function(self):
        assert "empty-function" in rule_ids("def f():\n    pass\n")
        assert "empty-function" in rule_ids("def f():\n    ...\n")
        assert "empty-function" in rule_ids('def f():\n    "doc only"\n')
        assert "empty-function" not in rule_ids("def f():\n    return 1\n")

    def test_empty_function_inline(self):
        assert "empty-function" in rule_ids("def f(): pass\n")

    def test_unused_local(self):
        assert "unused-local" in rule_ids("def f():\n    x = 1\n    return 2\n")
        assert "unused-local" not in rule_ids("def f():\n    x = 1\n    return x\n")

    def test_underscore_local_exempt(self):
        assert "unused-local" not in rule_ids("def f(pairs):\n    for _ in pairs:\n        g()\n")

    def test_fstring_use_counts(self):
        src = 'def f():\n    n = 3\n    return f"{n}"\n'
        assert "unused-local" not in rule_ids(src)

    def test_unused_import(self):
        assert "unused-import" in rule_ids("import os\nx = 1\n")
        assert "unused-import" not in rule_ids("import os\nprint(os.sep)\n")

    def test_unused_import_alias(self):
        assert "unused-import" in rule_ids("import numpy as np\nx = 1\n")
        assert "unused-import" not in rule_ids("import numpy as np\nprint(np.pi)\n")

    def test_bare_except(self):
        assert "bare-except" in rule_ids("try:\n    f()\nexcept:\n    pass\n")
        assert "bare-except" not in rule_ids("try:\n    f()\nexcept Exception:\n    pass\n")

    def test_mutable_default(self):
        assert "mutable-default-parameter" in rule_ids("def f(xs=[]):\n    return xs\n")
        assert "mutable-default-parameter" in rule_ids("def f(d={}):\n    return d\n")
        assert "mutable-default-parameter" in rule_ids("def f(d=dict()):\n    return d\n")
        assert "mutable-default-parameter" not in rule_ids("def f(x=None):\n    return x\n")
        assert "mutable-default-parameter" not in rule_ids("def f(x=()):\n    return x\n")

    def test_too_many_parameters(self):
        eight = ", ".join(f"p{i}" for i in range(8))
        seven = ", ".join(f"p{i}" for i in range(7))
        assert "too-many-parameters" in rule_ids(f"def f({eight}):\n    return p0\n")
        assert "too-many-parameters" not in rule_ids(f"def f({seven}):\n    return p0\n")

    def test_self_excluded_from_parameter_count(self):
        seven = ", ".join(f"p{i}" for i in range(7))
        src = f"class A:\n    def m(self, {seven}):\n        return p0\n"
        assert "too-many-parameters" not in rule_ids(src)

    def test_identical_branches(self):
        src = "if x:\n    y = 1\nelse:\n    y = 1\n"
        assert "identical-if-else-branches" in rule_ids(src)
        src2 = "if x:\n    y = 1\nelse:\n    y = 2\n"
        assert "identical-if-else-branches" not in rule_ids(src2)

    def test_function_too_complex(self):
        # A 16-deep elif ladder scores 17 (> 15 threshold).
        lines = ["def f(x):"]
        lines.append("    if x == 0:")
        lines.append("        return 0")
        for i in range(1, 17):
            lines.append(f"    elif x == {i}:")
            lines.append(f"        return {i}")
        src = "\n".join(lines) + "\n"
        assert "function-too-complex" in rule_ids(src)
        assert "function-too-complex" not in rule_ids("def f(x):\n    if x:\n        return 1\n")

    def test_unreachable_after_return(self):
        src = "def f():\n    return 1\n    x = 2\n"
        assert "unreachable-code-after-return" in rule_ids(src)
        src2 = "def f():\n    if c:\n        return 1\n    x = 2\n    return x\n"
        assert "unreachable-code-after-return" not in rule_ids(src2)


class TestConfig:
    def test_disable_rule(self):
        config = SmellConfig(disabled_rules=frozenset({"empty-function"}))
        assert rule_ids("def f():\n    pass\n", config) == []

    def test_raise_complexity_threshold(self):
        lines = ["def f(x):"]
        lines.append("    if x == 0:")
        lines.append("        return 0")
        for i in range(1, 17):
            lines.append(f"    elif x == {i}:")
            lines.append(f"        return {i}")
        src = "\n".join(lines) + "\n"
        relaxed = SmellConfig(max_complexity=100)
        assert "function-too-complex" not in rule_ids(src, relaxed)

    def test_lower_parameter_threshold(self):
        config = SmellConfig(max_parameters=2)
        assert "too-many-parameters" in rule_ids("def f(a, b, c):\n    return a\n", config)


class TestReport:
    def test_count_matches_findings(self):
        src = "import os\n\n\ndef f():\n    pass\n"
        tree = parse_source(src)
        report = count_smells(tree, src)
        assert report.count == len(report.findings) == 2

    def test_findings_sorted_by_span_then_rule(self):
        src = (
            "import os\n"
            "import sys\n"
            "\n"
            "def f(id):\n"
            "    pass\n"
        )
        report = count_smells(parse_source(src), src)
        keys = [(f.span, f.rule_id) for f in report.findings]
        assert keys == sorted(keys)

    def test_deterministic_across_runs(self):
        src = "import os\ndef f(list=[]):\n    pass\n"
        a = count_smells(parse_source(src), src)
        b = count_smells(parse_source(src), src)
        assert a == b

    def test_multiple_functions_scanned(self):
        src = (
            "def a():\n    pass\n"
            "\n"
            "def b():\n    pass\n"
        )
        ids = rule_ids(src)
        assert ids.count("empty-function") == 2
