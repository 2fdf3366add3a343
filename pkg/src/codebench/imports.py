"""Undefined-name detection and automatic import insertion.

Corpus solutions are frequently posted without their import lines (the
surrounding page made them obvious).  This module finds names that are
referenced but never bound, then splices the matching import statements
in above the first class or function definition so the solution runs
under the judge.

Scoping is a deliberate approximation: a single lexical pass with
function-local scopes chained through their enclosing functions and the
module, class bodies visible only to themselves, and no global/nonlocal
tracking.  Use-before-def within a scope is not modeled — a name bound
anywhere in the scope counts as bound.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .parser import Node, NodeKind, StructureTree, parse_source
from .smells import BUILTIN_NAMES, iter_scope_statements


class UnresolvedName(Exception):
    """Undefined names with no mapping entry; repair cannot proceed."""

    def __init__(self, names):
        self.names = frozenset(names)
        super().__init__(f"no import mapping for: {', '.join(sorted(self.names))}")


@dataclass(frozen=True)
class ImportMapping:
    """Bare name -> import statement text."""

    entries: dict[str, str]

    def __post_init__(self):
        for name, statement in self.entries.items():
            tree = parse_source(statement + "\n")
            kinds = [child.kind for child in tree.root.children]
            if kinds != [NodeKind.IMPORT]:
                raise ValueError(
                    f"mapping entry for {name!r} is not an import statement: "
                    f"{statement!r}"
                )

    @property
    def size(self) -> int:
        return len(self.entries)

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def statement_for(self, name: str) -> str:
        return self.entries[name]

    @classmethod
    def from_file(cls, path: str | Path) -> "ImportMapping":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))


@lru_cache(maxsize=1)
def default_mapping() -> ImportMapping:
    payload = json.loads(
        resources.files("codebench.data").joinpath("import_map.json").read_text()
    )
    return ImportMapping(payload)


# --------------------------------------------------------------------------
# Undefined-name analysis

# Soft keywords and the conventional throwaway read like plain names to the
# structural pass (``case _:`` inside an opaque block records both), but they
# never indicate a missing import.
_LEXICAL_NOISE = frozenset({"match", "case", "_"})


def _unknown(name: str, visible) -> bool:
    return (
        name not in visible
        and name not in BUILTIN_NAMES
        and name not in _LEXICAL_NOISE
    )


def _scope_locals(owner: Node) -> set[str]:
    """Names bound by the statements of one scope (nested scopes excluded)."""
    bound: set[str] = set()
    if owner.kind is NodeKind.FUNCTION_DEF:
        bound.update(owner.params or [])
    for stmt in iter_scope_statements(owner):
        if stmt.kind in (NodeKind.FUNCTION_DEF, NodeKind.CLASS_DEF) and stmt.name:
            bound.add(stmt.name)
        if stmt.kind is NodeKind.IMPORT:
            bound.update(stmt.names or [])
        bound.update(stmt.targets or [])
    return bound


def find_undefined(tree: StructureTree) -> set[str]:
    """Names referenced somewhere but bound nowhere visible.

    Builtins and f-string field names never count; the latter are display
    conveniences, not evidence that the judge environment needs a module.
    """
    undefined: set[str] = set()

    def visit(owner: Node, inherited: frozenset[str]) -> None:
        visible = inherited | _scope_locals(owner)
        for stmt in iter_scope_statements(owner):
            for name in stmt.refs:
                if _unknown(name, visible):
                    undefined.add(name)
        for stmt in iter_scope_statements(owner):
            if stmt.kind is NodeKind.FUNCTION_DEF:
                visit(stmt, frozenset(visible))
            elif stmt.kind is NodeKind.CLASS_DEF:
                # Class bodies see the enclosing scope; methods inside see
                # the enclosing scope but NOT the class body's bindings.
                class_visible = inherited | _scope_locals(owner) | _scope_locals(stmt)
                for inner in iter_scope_statements(stmt):
                    for name in inner.refs:
                        if _unknown(name, class_visible):
                            undefined.add(name)
                for inner in iter_scope_statements(stmt):
                    if inner.kind is NodeKind.FUNCTION_DEF:
                        visit(inner, frozenset(visible))
                    elif inner.kind is NodeKind.CLASS_DEF:
                        visit_nested_class(inner, frozenset(visible))

    def visit_nested_class(cls: Node, inherited: frozenset[str]) -> None:
        class_visible = inherited | _scope_locals(cls)
        for inner in iter_scope_statements(cls):
            for name in inner.refs:
                if _unknown(name, class_visible):
                    undefined.add(name)
        for inner in iter_scope_statements(cls):
            if inner.kind is NodeKind.FUNCTION_DEF:
                visit(inner, inherited)
            elif inner.kind is NodeKind.CLASS_DEF:
                visit_nested_class(inner, inherited)

    visit(tree.root, frozenset())
    return undefined


# --------------------------------------------------------------------------
# Repair


def _insertion_line(tree: StructureTree, lines: list[str]) -> int:
    """0-based line index where new imports go.

    Above the first top-level class/function definition, backing up over
    its decorator lines; with no definition, after a leading module
    docstring, else the top of the file.
    """
    for stmt in tree.root.children:
        if stmt.kind in (NodeKind.FUNCTION_DEF, NodeKind.CLASS_DEF):
            at = stmt.start_line - 1
            while at > 0 and lines[at - 1].lstrip().startswith("@"):
                at -= 1
            return at
    first = tree.root.children[0] if tree.root.children else None
    if first is not None and first.kind is NodeKind.EXPRESSION_STMT and first.is_string_literal:
        return first.end_line
    return 0


def repair(source: str, mapping: ImportMapping | None = None) -> str:
    """Insert imports for every undefined name the mapping covers.

    Returns the source byte-identical when nothing is undefined.  Raises
    ``UnresolvedName`` when any undefined name has no mapping entry.
    """
    if mapping is None:
        mapping = default_mapping()
    tree = parse_source(source)
    undefined = find_undefined(tree)
    if not undefined:
        return source
    unmapped = {name for name in undefined if name not in mapping}
    if unmapped:
        raise UnresolvedName(unmapped)
    statements = sorted({mapping.statement_for(name) for name in undefined})
    lines = source.split("\n")
    at = _insertion_line(tree, lines)
    repaired = lines[:at] + statements + lines[at:]
    return "\n".join(repaired)
