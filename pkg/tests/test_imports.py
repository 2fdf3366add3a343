"""Tests for undefined-name detection and import insertion."""

import json

import pytest
from hypothesis import given, strategies as st

from codebench.imports import (
    ImportMapping,
    UnresolvedName,
    default_mapping,
    find_undefined,
    repair,
)
from codebench.lexer import LexError
from codebench.metrics import line_counts
from codebench.parser import parse_source


def undefined_in(source: str) -> set[str]:
    return find_undefined(parse_source(source))


class TestMapping:
    def test_default_has_89_entries(self):
        assert default_mapping().size == 89

    def test_default_is_cached(self):
        assert default_mapping() is default_mapping()

    def test_every_entry_is_a_single_import_statement(self):
        # Construction already validates; re-assert the shape directly.
        from codebench.parser import NodeKind

        for name, statement in default_mapping().entries.items():
            tree = parse_source(statement + "\n")
            kinds = [child.kind for child in tree.root.children]
            assert kinds == [NodeKind.IMPORT], (name, statement)

    def test_mapped_name_appears_in_its_statement(self):
        for name, statement in default_mapping().entries.items():
            assert name in statement.replace(",", " ").split(), (name, statement)

    def test_non_import_entry_rejected(self):
        with pytest.raises(ValueError):
            ImportMapping({"x": "x = 3"})

    def test_compound_entry_rejected(self):
        with pytest.raises(ValueError):
            ImportMapping({"os": "import os; os"})

    def test_contains_and_lookup(self):
        mapping = default_mapping()
        assert "defaultdict" in mapping
        assert mapping.statement_for("defaultdict") == (
            "from collections import defaultdict"
        )
        assert "frobnicate" not in mapping

    def test_from_file(self, tmp_path):
        path = tmp_path / "map.json"
        path.write_text(json.dumps({"sqrt": "from math import sqrt"}))
        mapping = ImportMapping.from_file(path)
        assert mapping.size == 1
        assert mapping.statement_for("sqrt") == "from math import sqrt"


class TestFindUndefined:
    def test_unimported_defaultdict(self):
        src = "class Solution:\n    def f(self, x):\n        return defaultdict(int)\n"
        assert undefined_in(src) == {"defaultdict"}

    def test_self_contained_snippet(self):
        src = "def add(a, b):\n    total = a + b\n    return total\n"
        assert undefined_in(src) == set()

    def test_loop_target_and_builtin(self):
        assert undefined_in("for i in range(3): print(i)\n") == set()

    def test_parameters_bind(self):
        assert undefined_in("def f(alpha):\n    return alpha\n") == set()

    def test_assignment_binds_across_statements(self):
        assert undefined_in("x = 1\ny = x + 1\n") == set()

    def test_import_binds(self):
        assert undefined_in("import math\nprint(math.pi)\n") == set()

    def test_from_import_binds(self):
        assert undefined_in("from math import sqrt\nprint(sqrt(2))\n") == set()

    def test_star_import_binds_nothing(self):
        assert undefined_in("from math import *\nx = sqrt(2)\n") == {"sqrt"}

    def test_with_target_binds(self):
        src = "with open('f') as fh:\n    data = fh.read()\n"
        assert undefined_in(src) == set()

    def test_except_target_binds(self):
        src = "try:\n    pass\nexcept ValueError as err:\n    print(err)\n"
        assert undefined_in(src) == set()

    def test_walrus_binds(self):
        src = "if (n := 4) > 2:\n    print(n)\n"
        assert undefined_in(src) == set()

    def test_nested_function_sees_enclosing(self):
        src = (
            "def outer():\n"
            "    secret = 7\n"
            "    def inner():\n"
            "        return secret\n"
            "    return inner\n"
        )
        assert undefined_in(src) == set()

    def test_function_locals_invisible_outside(self):
        src = "def f():\n    hidden = 1\n    return hidden\n\nprint(hidden)\n"
        assert undefined_in(src) == {"hidden"}

    def test_class_body_sees_own_bindings(self):
        src = "class A:\n    LIMIT = 10\n    DOUBLE = LIMIT * 2\n"
        assert undefined_in(src) == set()

    def test_method_does_not_see_class_body(self):
        src = "class A:\n    LIMIT = 10\n    def f(self):\n        return LIMIT\n"
        assert undefined_in(src) == {"LIMIT"}

    def test_method_sees_module_scope(self):
        src = "LIMIT = 10\nclass A:\n    def f(self):\n        return LIMIT\n"
        assert undefined_in(src) == set()

    def test_class_name_visible_to_methods(self):
        src = "class Tree:\n    def clone(self):\n        return Tree()\n"
        assert undefined_in(src) == set()

    def test_attribute_access_is_not_a_reference(self):
        src = "def f(self):\n    return self.helper()\n"
        assert undefined_in(src) == set()

    def test_fstring_field_never_counts(self):
        # The field name only appears inside the literal; not a real read.
        src = "def f():\n    return f'{missing}'\n"
        assert undefined_in(src) == set()

    def test_later_binding_counts_as_bound(self):
        # Single lexical pass: use-before-def within a scope is not flagged.
        src = "def f():\n    print(value)\n    value = 3\n"
        assert undefined_in(src) == set()

    def test_decorator_reference_checked(self):
        src = "@memoize\ndef f(x):\n    return x\n"
        assert undefined_in(src) == {"memoize"}

    def test_decorator_keyword_argument_ignored(self):
        src = "@lru_cache(maxsize=None)\ndef fib(n):\n    return fib(n - 1)\n"
        assert undefined_in(src) == {"lru_cache"}

    def test_two_undefined_names(self):
        src = "def f(xs):\n    heappush(xs, 1)\n    return sqrt(xs[0])\n"
        assert undefined_in(src) == {"heappush", "sqrt"}

    def test_match_block_noise_suppressed(self):
        src = (
            "def route(cmd):\n"
            "    match cmd:\n"
            "        case _:\n"
            "            return None\n"
        )
        names = undefined_in(src)
        assert "match" not in names
        assert "case" not in names
        assert "_" not in names


class TestRepair:
    def test_insertion_above_class(self):
        src = "class Solution:\n    def f(self, x):\n        return defaultdict(int)\n"
        assert repair(src) == (
            "from collections import defaultdict\n"
            "class Solution:\n"
            "    def f(self, x):\n"
            "        return defaultdict(int)\n"
        )

    def test_clean_source_byte_identical(self):
        src = "def f(x):\n    return x + 1\n"
        assert repair(src) == src

    def test_unmapped_name_raises(self):
        with pytest.raises(UnresolvedName) as info:
            repair("x = frobnicate(3)\n")
        assert info.value.names == frozenset({"frobnicate"})

    def test_mixed_mapped_and_unmapped_still_raises(self):
        src = "def f():\n    return defaultdict(int), frobnicate()\n"
        with pytest.raises(UnresolvedName) as info:
            repair(src)
        assert info.value.names == frozenset({"frobnicate"})

    def test_statements_sorted_and_deduplicated(self):
        src = (
            "class Solution:\n"
            "    def f(self, xs):\n"
            "        heappush(xs, sqrt(4))\n"
            "        return defaultdict(int)\n"
        )
        out = repair(src)
        inserted = out.split("\n")[:3]
        assert inserted == [
            "from collections import defaultdict",
            "from heapq import heappush",
            "from math import sqrt",
        ]

    def test_shared_statement_inserted_once(self):
        mapping = ImportMapping(
            {"alpha_rng": "import random", "beta_rng": "import random"}
        )
        src = "x = alpha_rng\ny = beta_rng\n"
        out = repair(src, mapping)
        assert out.count("import random") == 1

    def test_insertion_backs_over_decorator(self):
        src = (
            "@lru_cache(maxsize=None)\n"
            "def fib(n):\n"
            "    return fib(n - 1) + fib(n - 2) if n > 1 else n\n"
        )
        out = repair(src)
        assert out.startswith("from functools import lru_cache\n@lru_cache")

    def test_insertion_backs_over_decorator_stack(self):
        src = (
            '"""Memoized helpers."""\n'
            "@cache\n"
            "@lru_cache(maxsize=None)\n"
            "def run(target):\n"
            "    return target\n"
        )
        out = repair(src)
        lines = out.split("\n")
        assert lines[0] == '"""Memoized helpers."""'
        assert lines[1] == "from functools import cache"
        assert lines[2] == "from functools import lru_cache"
        assert lines[3] == "@cache"

    def test_no_definition_goes_after_docstring(self):
        out = repair('"""Doc."""\nx = sqrt(2)\n')
        assert out == '"""Doc."""\nfrom math import sqrt\nx = sqrt(2)\n'

    def test_no_definition_no_docstring_goes_first(self):
        out = repair("result = ceil(1.2)\n")
        assert out == "from math import ceil\nresult = ceil(1.2)\n"

    def test_statements_before_definition_stay_above_insert(self):
        src = "EPS = 1e-9\ndef close(a, b):\n    return floor(a - b) < EPS\n"
        out = repair(src)
        assert out == (
            "EPS = 1e-9\n"
            "from math import floor\n"
            "def close(a, b):\n"
            "    return floor(a - b) < EPS\n"
        )

    def test_no_trailing_newline_preserved_shape(self):
        out = repair("x = ceil(1.2)")
        assert out == "from math import ceil\nx = ceil(1.2)"

    def test_unlexable_source_propagates(self):
        with pytest.raises(LexError):
            repair("x = 'unterminated\n")

    def test_output_reparses_with_names_bound(self):
        src = "class Solution:\n    def f(self, n):\n        return factorial(n)\n"
        out = repair(src)
        assert undefined_in(out) == set()


REPAIRABLE_SOURCES = [
    "class Solution:\n    def f(self, x):\n        return defaultdict(int)\n",
    "def area(r):\n    return pi * r * r\n",
    "@lru_cache(maxsize=None)\ndef fib(n):\n    return fib(n - 1) + fib(n - 2) if n > 1 else n\n",
    '"""Utilities."""\n\ncounts = Counter("banana")\n',
    "def merge(xs, ys):\n    return list(chain(xs, ys))\n",
    "def f(xs):\n    heapify(xs)\n    return heappop(xs)\n",
    "class Grid:\n    def walk(self):\n        return deque([(0, 0)])\n",
    "def pick(xs):\n    return choice(xs)\n",
    "def locate(xs, v):\n    return bisect_left(xs, v)\n",
    "def clone(board):\n    return deepcopy(board)\n",
    "def f(n):\n    return comb(n, 2) + factorial(3)\n",
    "def g(pairs):\n    return sorted(pairs, key=cmp_to_key(lambda a, b: a - b))\n",
]


class TestRepairInvariants:
    @pytest.mark.parametrize("src", REPAIRABLE_SOURCES)
    def test_idempotent(self, src):
        once = repair(src)
        assert repair(once) == once

    @pytest.mark.parametrize("src", REPAIRABLE_SOURCES)
    def test_ncloc_grows_by_exactly_inserted_lines(self, src):
        out = repair(src)
        inserted = len(out.split("\n")) - len(src.split("\n"))
        assert inserted >= 1
        before = line_counts(src)
        after = line_counts(out)
        assert after.ncloc - before.ncloc == inserted
        assert after.sloc - before.sloc == inserted

    @pytest.mark.parametrize("src", REPAIRABLE_SOURCES)
    def test_no_mapped_name_left_undefined(self, src):
        mapping = default_mapping()
        remaining = undefined_in(repair(src))
        assert remaining.isdisjoint(mapping.entries.keys())

    @pytest.mark.parametrize("src", REPAIRABLE_SOURCES)
    def test_original_lines_survive_in_order(self, src):
        out_lines = repair(src).split("\n")
        src_lines = src.split("\n")
        it = iter(out_lines)
        assert all(line in it for line in src_lines)


@st.composite
def _mapped_name_sources(draw):
    """Small function bodies using a sample of mapped names as calls."""
    names = draw(
        st.lists(
            st.sampled_from(
                ["defaultdict", "sqrt", "heappush", "Counter", "deque", "ceil"]
            ),
            min_size=0,
            max_size=4,
            unique=True,
        )
    )
    body = "".join(f"    v{i} = {name}\n" for i, name in enumerate(names))
    return "def built(x):\n" + (body or "    pass\n") + "    return x\n"


class TestRepairProperties:
    @given(_mapped_name_sources())
    def test_idempotence(self, src):
        once = repair(src)
        assert repair(once) == once

    @given(_mapped_name_sources())
    def test_clean_iff_identical(self, src):
        out = repair(src)
        if undefined_in(src):
            assert out != src
        else:
            assert out == src
