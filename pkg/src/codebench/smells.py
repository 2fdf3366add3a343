"""Static smell rules over the structure tree.

Ten rules, each a small function registered with an id and a severity.  The
severity is carried as metadata only; counting treats every finding alike.
Findings come back ordered by span start then rule id, so registration order
never shows through in reports.

Scope conventions shared with undefined-name analysis: a function's own
scope is its body minus nested function/class bodies; closures count as
uses when deciding whether a local is read.  Names starting with an
underscore are exempt from the unused-* rules by convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Callable, Iterable, Iterator

from .complexity import cognitive_complexity
from .lexer import source_lines
from .parser import Node, NodeKind, StructureTree


@dataclass(frozen=True)
class Finding:
    rule_id: str
    span: tuple[int, int]
    message: str
    severity: str


@dataclass
class SmellReport:
    findings: list[Finding]
    count: int


@dataclass
class SmellConfig:
    max_parameters: int = 7
    max_complexity: int = 15
    disabled_rules: frozenset[str] = frozenset()


@dataclass(frozen=True)
class SmellRule:
    rule_id: str
    severity: str
    check: Callable[[StructureTree, list[str], SmellConfig], Iterable[Finding]]


def load_builtin_names() -> frozenset[str]:
    text = resources.files("codebench.data").joinpath("builtins.txt").read_text()
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


BUILTIN_NAMES = load_builtin_names()

_CLAUSE_KINDS = (NodeKind.ELIF, NodeKind.ELSE, NodeKind.EXCEPT_HANDLER)
_SCOPE_KINDS = (NodeKind.FUNCTION_DEF, NodeKind.CLASS_DEF)


def iter_scope_statements(node: Node) -> Iterator[Node]:
    """Statements in *node*'s own scope: descend blocks, not nested scopes."""
    for child in node.children:
        yield child
        if child.kind not in _SCOPE_KINDS:
            yield from iter_scope_statements(child)


def iter_functions(tree: StructureTree) -> Iterator[Node]:
    for node in tree.walk():
        if node.kind is NodeKind.FUNCTION_DEF:
            yield node


def scope_bindings(func: Node) -> list[tuple[str, Node]]:
    """(name, binding statement) pairs for assignments in a function scope.

    Any statement kind may carry targets: assignment/loop/with/except
    bindings, plus walrus targets hoisted from header expressions.
    """
    out: list[tuple[str, Node]] = []
    for stmt in iter_scope_statements(func):
        for name in stmt.targets or []:
            out.append((name, stmt))
    return out


def subtree_uses(node: Node) -> set[str]:
    """All names read anywhere under *node*, f-string fields included."""
    used: set[str] = set()
    for sub in node.walk():
        used |= sub.refs
        used |= sub.soft_refs
    return used


# -- rules ---------------------------------------------------------------


def _check_shadowed_builtin(tree, lines, config):
    for func in iter_functions(tree):
        for pname in func.params or []:
            if pname in BUILTIN_NAMES:
                yield _finding(
                    "shadowed-builtin",
                    (func.start_line, func.start_line),
                    f"Parameter '{pname}' shadows a builtin",
                )
        seen: set[str] = set()
        for name, stmt in scope_bindings(func):
            if name in BUILTIN_NAMES and name not in seen:
                seen.add(name)
                yield _finding(
                    "shadowed-builtin",
                    (stmt.start_line, stmt.start_line),
                    f"Local variable '{name}' shadows a builtin",
                )


def _is_filler_statement(stmt: Node, lines: list[str]) -> bool:
    if stmt.kind is NodeKind.EXPRESSION_STMT and stmt.is_string_literal:
        return True
    if stmt.start_line > len(lines) or stmt.start_line != stmt.end_line:
        return False
    text = lines[stmt.start_line - 1].strip()
    if stmt.kind is NodeKind.OPAQUE_LINE:
        # Inline bodies ('def f(): pass') share the header line; look after
        # the last colon in that case.
        return text in ("pass", "...") or text.rpartition(":")[2].strip() in ("pass", "...")
    if stmt.kind is NodeKind.EXPRESSION_STMT and not stmt.children and not stmt.refs:
        return text.rpartition(":")[2].strip() == "..." or text == "..."
    return False


def _check_empty_function(tree, lines, config):
    for func in iter_functions(tree):
        body = func.children
        if body and all(_is_filler_statement(s, lines) for s in body):
            yield _finding(
                "empty-function",
                (func.start_line, func.end_line),
                f"Function '{func.name}' is empty",
            )


def _check_unused_local(tree, lines, config):
    for func in iter_functions(tree):
        used = subtree_uses(func)
        reported: set[str] = set()
        for name, stmt in scope_bindings(func):
            if stmt.kind is NodeKind.EXCEPT_HANDLER:
                continue  # 'except … as e' with unused e is idiomatic enough
            if name.startswith("_") or name in reported or name in used:
                continue
            reported.add(name)
            yield _finding(
                "unused-local",
                (stmt.start_line, stmt.start_line),
                f"Local variable '{name}' is never used",
            )


def _check_unused_import(tree, lines, config):
    used = subtree_uses(tree.root)
    for stmt in tree.walk():
        if stmt.kind is not NodeKind.IMPORT:
            continue
        for name in stmt.names or []:
            if name.startswith("_") or name in used:
                continue
            yield _finding(
                "unused-import",
                (stmt.start_line, stmt.start_line),
                f"'{name}' is imported but never used",
            )


def _check_bare_except(tree, lines, config):
    for node in tree.walk():
        if node.kind is NodeKind.EXCEPT_HANDLER and node.is_bare:
            yield _finding(
                "bare-except",
                (node.start_line, node.start_line),
                "Bare 'except:' swallows every exception",
            )


_MUTABLE_HEADS = ("[", "{", "list(", "dict(", "set(")


def _check_mutable_default(tree, lines, config):
    for func in iter_functions(tree):
        for pname, head in func.param_defaults or []:
            if head.startswith(_MUTABLE_HEADS):
                yield _finding(
                    "mutable-default-parameter",
                    (func.start_line, func.start_line),
                    f"Parameter '{pname}' defaults to a mutable value",
                )


def _check_too_many_parameters(tree, lines, config):
    for func in iter_functions(tree):
        params = list(func.params or [])
        if params and params[0] in ("self", "cls"):
            params = params[1:]
        if len(params) > config.max_parameters:
            yield _finding(
                "too-many-parameters",
                (func.start_line, func.start_line),
                f"Function '{func.name}' takes {len(params)} parameters "
                f"(limit {config.max_parameters})",
            )


def _branch_text(stmts: list[Node], lines: list[str]) -> str:
    covered: set[int] = set()
    for stmt in stmts:
        covered.update(range(stmt.start_line, stmt.end_line + 1))
    kept = [
        lines[i - 1].strip()
        for i in sorted(covered)
        if i <= len(lines) and lines[i - 1].strip()
    ]
    return "\n".join(kept)


def _check_identical_branches(tree, lines, config):
    for node in tree.walk():
        if node.kind is not NodeKind.IF:
            continue
        branches: list[list[Node]] = [[c for c in node.children if c.kind not in _CLAUSE_KINDS]]
        has_else = False
        for clause in node.children:
            if clause.kind is NodeKind.ELIF:
                branches.append([c for c in clause.children])
            elif clause.kind is NodeKind.ELSE:
                has_else = True
                branches.append(list(clause.children))
        if not has_else and len(branches) < 2:
            continue
        texts = [_branch_text(b, lines) for b in branches if b]
        if len(texts) >= 2 and any(
            texts[i] == texts[j]
            for i in range(len(texts))
            for j in range(i + 1, len(texts))
            if texts[i]
        ):
            yield _finding(
                "identical-if-else-branches",
                (node.start_line, node.end_line),
                "Two branches of this conditional are identical",
            )


def _check_function_too_complex(tree, lines, config):
    for func in iter_functions(tree):
        score = cognitive_complexity(func).total
        if score > config.max_complexity:
            yield _finding(
                "function-too-complex",
                (func.start_line, func.end_line),
                f"Function '{func.name}' has cognitive complexity {score} "
                f"(limit {config.max_complexity})",
            )


def _check_unreachable_code(tree, lines, config):
    for node in tree.walk():
        block = [c for c in node.children if c.kind not in _CLAUSE_KINDS]
        for i, stmt in enumerate(block):
            if stmt.kind in (NodeKind.RETURN, NodeKind.RAISE) and i + 1 < len(block):
                tail = block[i + 1 :]
                yield _finding(
                    "unreachable-code-after-return",
                    (tail[0].start_line, tail[-1].end_line),
                    "Code after 'return' or 'raise' is unreachable",
                )
                break


def _finding(rule_id: str, span: tuple[int, int], message: str) -> Finding:
    return Finding(rule_id, span, message, _SEVERITIES[rule_id])


_SEVERITIES = {
    "shadowed-builtin": "medium",
    "empty-function": "medium",
    "unused-local": "low",
    "unused-import": "low",
    "bare-except": "medium",
    "mutable-default-parameter": "high",
    "too-many-parameters": "low",
    "identical-if-else-branches": "high",
    "function-too-complex": "high",
    "unreachable-code-after-return": "high",
}

RULES: list[SmellRule] = [
    SmellRule("shadowed-builtin", "medium", _check_shadowed_builtin),
    SmellRule("empty-function", "medium", _check_empty_function),
    SmellRule("unused-local", "low", _check_unused_local),
    SmellRule("unused-import", "low", _check_unused_import),
    SmellRule("bare-except", "medium", _check_bare_except),
    SmellRule("mutable-default-parameter", "high", _check_mutable_default),
    SmellRule("too-many-parameters", "low", _check_too_many_parameters),
    SmellRule("identical-if-else-branches", "high", _check_identical_branches),
    SmellRule("function-too-complex", "high", _check_function_too_complex),
    SmellRule("unreachable-code-after-return", "high", _check_unreachable_code),
]

RULE_IDS = frozenset(r.rule_id for r in RULES)


def count_smells(
    tree: StructureTree, source: str, config: SmellConfig | None = None
) -> SmellReport:
    """Run every enabled rule; findings sorted by (span start, rule id)."""
    config = config or SmellConfig()
    lines = source_lines(source)
    findings: list[Finding] = []
    for rule in RULES:
        if rule.rule_id in config.disabled_rules:
            continue
        findings.extend(rule.check(tree, lines, config))
    findings.sort(key=lambda f: (f.span[0], f.span[1], f.rule_id, f.message))
    return SmellReport(findings=findings, count=len(findings))
