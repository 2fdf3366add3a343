"""Cognitive-complexity scoring over the structure tree.

The increment table is normative for this codebase (see README for the
rendered version):

======================  =======================================
construct               increment
======================  =======================================
``if``                  1 + nesting level
``elif``                1 (flat)
``else``                1 (flat; ``finally`` suites excluded)
``for`` / ``while``     1 + nesting level
except handler          1 + nesting level
ternary / comp guard    1 + nesting level
boolean-op sequence     1 per sequence of alike operators
direct recursion        1 per function containing a self-call
======================  =======================================

Nesting increases inside the bodies of if/elif/else/for/while/except and
ternaries, and inside functions or lambdas that are themselves nested in
another function.  ``try``/``with`` bodies and class bodies do not nest.
A sequence of alike boolean operators counts once; every alternation
(``and`` ↔ ``or``) starts a new sequence.  Comprehensions are treated as
shorthand — only their guard clauses score.  Recursion detection compares
the final call segment, so ``self.solve(…)`` inside ``def solve`` counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .parser import Node, NodeKind, StructureTree


class Reason(Enum):
    CONDITIONAL = "if"
    ELIF_BRANCH = "elif"
    ELSE_BRANCH = "else"
    LOOP_FOR = "for"
    LOOP_WHILE = "while"
    EXCEPT_HANDLER = "except"
    TERNARY = "ternary"
    BOOL_SEQUENCE = "bool-sequence"
    RECURSION = "recursion"


@dataclass(frozen=True)
class Contribution:
    span: tuple[int, int]
    base: int
    nesting_penalty: int
    reason: Reason


@dataclass
class ComplexityScore:
    total: int
    contributions: list[Contribution]


_CLAUSE_KINDS = (NodeKind.ELIF, NodeKind.ELSE, NodeKind.EXCEPT_HANDLER)


def cognitive_complexity(tree: StructureTree | Node) -> ComplexityScore:
    """Score a whole tree, or any subtree when given a node directly."""
    root = tree.root if isinstance(tree, StructureTree) else tree
    contributions: list[Contribution] = []

    def add(node: Node, nesting: int, reason: Reason) -> None:
        penalty = nesting if reason not in (
            Reason.ELIF_BRANCH,
            Reason.ELSE_BRANCH,
            Reason.BOOL_SEQUENCE,
            Reason.RECURSION,
        ) else 0
        contributions.append(
            Contribution((node.start_line, node.end_line), 1, penalty, reason)
        )

    def visit_body(nodes: list[Node], nesting: int, in_function: bool) -> None:
        for sub in nodes:
            visit(sub, nesting, in_function)

    def visit(node: Node, nesting: int, in_function: bool) -> None:
        kind = node.kind
        if kind is NodeKind.FUNCTION_DEF:
            recursive_call = _find_recursive_call(node)
            if recursive_call is not None:
                add(recursive_call, nesting, Reason.RECURSION)
            visit_body(node.head, nesting, in_function)
            inner = nesting + 1 if in_function else nesting
            visit_body(node.children, inner, True)
            return
        if kind is NodeKind.LAMBDA:
            inner = nesting + 1 if in_function else nesting
            visit_body(node.children, inner, in_function)
            return
        if kind is NodeKind.IF:
            add(node, nesting, Reason.CONDITIONAL)
            visit_body(node.head, nesting, in_function)
            for sub in node.children:
                if sub.kind in _CLAUSE_KINDS:
                    visit(sub, nesting, in_function)
                else:
                    visit(sub, nesting + 1, in_function)
            return
        if kind is NodeKind.ELIF:
            add(node, nesting, Reason.ELIF_BRANCH)
            visit_body(node.head, nesting, in_function)
            visit_body(node.children, nesting + 1, in_function)
            return
        if kind is NodeKind.ELSE:
            if node.is_finally:
                visit_body(node.children, nesting, in_function)
                return
            add(node, nesting, Reason.ELSE_BRANCH)
            visit_body(node.children, nesting + 1, in_function)
            return
        if kind in (NodeKind.FOR, NodeKind.WHILE):
            reason = Reason.LOOP_FOR if kind is NodeKind.FOR else Reason.LOOP_WHILE
            add(node, nesting, reason)
            visit_body(node.head, nesting, in_function)
            for sub in node.children:
                if sub.kind in _CLAUSE_KINDS:
                    visit(sub, nesting, in_function)
                else:
                    visit(sub, nesting + 1, in_function)
            return
        if kind is NodeKind.TRY:
            # The try body itself does not nest; handlers score on their own.
            visit_body(node.children, nesting, in_function)
            return
        if kind is NodeKind.EXCEPT_HANDLER:
            add(node, nesting, Reason.EXCEPT_HANDLER)
            visit_body(node.head, nesting, in_function)
            visit_body(node.children, nesting + 1, in_function)
            return
        if kind is NodeKind.CONDITIONAL:
            add(node, nesting, Reason.TERNARY)
            visit_body(node.children, nesting + 1, in_function)
            return
        if kind is NodeKind.BOOL_SEQUENCE:
            add(node, nesting, Reason.BOOL_SEQUENCE)
            visit_body(node.children, nesting, in_function)
            return
        # Structural pass-through: Module, ClassDef, With, Assign, Return,
        # Raise, Import, ExpressionStmt, Call, OpaqueLine.
        visit_body(node.head, nesting, in_function)
        visit_body(node.children, nesting, in_function)

    visit(root, 0, False)
    total = sum(c.base + c.nesting_penalty for c in contributions)
    return ComplexityScore(total=total, contributions=contributions)


def _find_recursive_call(func: Node) -> Node | None:
    """First Call anywhere inside *func* whose callee matches its name."""
    for node in func.walk():
        if node is func:
            continue
        if node.kind is NodeKind.CALL and node.callee_name == func.name:
            return node
    return None
