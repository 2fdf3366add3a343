"""Tolerant structural parser producing the tree consumed by metrics and repair.

The grammar subset covers what the analyzers score: def/class, the
if/elif/else family, loops, try/except/finally, with, return/raise, imports,
assignments, plain expressions, and — inside expressions — boolean-operator
sequences, ternaries, lambdas, calls, and comprehension guards.  Anything
else (``match``, decorators, ``async`` constructs, unparseable lines) folds
into ``OpaqueLine`` nodes that still span their statement, so the tree always
covers the source and parsing never fails on lexable input.

Conventions worth knowing before reading on:

* Statement-header expressions (an ``if`` test, a loop iterable, assignment
  values, decorators excluded) live in the node's ``head`` list; ``children``
  holds body statements.  ``Conditional`` nodes cover both ternaries and
  comprehension guard clauses.  ``finally:`` suites parse as an ``Else`` node
  flagged ``is_finally`` since they need a container but score differently.
* Every statement node records the names its expressions reference (``refs``)
  so undefined-name analysis can run without a second pass.  Names that only
  occur inside f-string braces are kept apart in ``soft_refs``: good enough
  to suppress unused-variable findings, too unreliable to trigger repair.
* Comprehension targets and lambda parameters are treated as bound for the
  whole statement, erring toward fewer false undefined-name reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import re

from .lexer import LexError, Token, TokenKind, source_lines, tokenize


class NodeKind(Enum):
    MODULE = "Module"
    FUNCTION_DEF = "FunctionDef"
    CLASS_DEF = "ClassDef"
    IF = "If"
    ELIF = "Elif"
    ELSE = "Else"
    FOR = "For"
    WHILE = "While"
    TRY = "Try"
    EXCEPT_HANDLER = "ExceptHandler"
    WITH = "With"
    RETURN = "Return"
    RAISE = "Raise"
    ASSIGN = "Assign"
    IMPORT = "Import"
    EXPRESSION_STMT = "ExpressionStmt"
    BOOL_SEQUENCE = "BoolSequence"
    CONDITIONAL = "Conditional"
    LAMBDA = "Lambda"
    CALL = "Call"
    OPAQUE_LINE = "OpaqueLine"


@dataclass
class Node:
    kind: NodeKind
    start_line: int
    end_line: int
    head: list["Node"] = field(default_factory=list)
    children: list["Node"] = field(default_factory=list)
    name: str | None = None
    params: list[str] | None = None
    param_defaults: list[tuple[str, str]] | None = None
    targets: list[str] | None = None
    names: list[str] | None = None
    operator: str | None = None
    length: int | None = None
    callee_name: str | None = None
    is_bare: bool = False
    has_elif_chain: bool = False
    is_finally: bool = False
    is_string_literal: bool = False
    refs: set[str] = field(default_factory=set)
    soft_refs: set[str] = field(default_factory=set)

    def walk(self):
        yield self
        for sub in self.head:
            yield from sub.walk()
        for sub in self.children:
            yield from sub.walk()


@dataclass
class StructureTree:
    root: Node
    line_count: int

    def walk(self):
        yield from self.root.walk()


_COMPOUND_KEYWORDS = {"def", "class", "if", "for", "while", "try", "with"}
_OPAQUE_KEYWORDS = {"pass", "break", "continue", "del", "global", "nonlocal", "assert", "async"}
_AUGMENTED_OPS = {
    "+=", "-=", "*=", "/=", "//=", "%=", "**=", "@=",
    "&=", "|=", "^=", "<<=", ">>=",
}
_COMPARE_OPS = {"<", ">", "<=", ">=", "==", "!="}
_BINARY_OPS = {"+", "-", "*", "/", "//", "%", "@", "&", "|", "^", "<<", ">>", "**"}
_ATOM_KEYWORDS = {"True", "False", "None"}
_FSTRING_NAME_RE = re.compile(r"[^\W\d]\w*")
_FSTRING_FIELD_RE = re.compile(r"\{([^{}]+)\}")


class _Unrecognized(Exception):
    """Internal backtracking signal; never escapes parse()."""


class _Parser:
    def __init__(self, tokens: list[Token]) -> None:
        self.tokens = [
            t
            for t in tokens
            if t.kind is not TokenKind.COMMENT
            and not (t.kind is TokenKind.OPERATOR and t.text == "\\")
        ]
        self.pos = 0
        self.last_line = 1

    # -- token helpers ---------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        i = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[i]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if self.pos < len(self.tokens) - 1:
            self.pos += 1
        if tok.kind not in (TokenKind.INDENT, TokenKind.DEDENT, TokenKind.END_OF_FILE):
            self.last_line = max(self.last_line, tok.line)
        return tok

    def at(self, kind: TokenKind, text: str | None = None) -> bool:
        tok = self.peek()
        return tok.kind is kind and (text is None or tok.text == text)

    def expect(self, kind: TokenKind, text: str | None = None) -> Token:
        if not self.at(kind, text):
            raise _Unrecognized
        return self.advance()

    def at_operator(self, text: str) -> bool:
        return self.at(TokenKind.OPERATOR, text)

    def at_keyword(self, text: str) -> bool:
        return self.at(TokenKind.KEYWORD, text)

    # -- module / blocks -------------------------------------------------

    def parse_module(self) -> Node:
        body = self.parse_statements()
        end = max((n.end_line for n in body), default=1)
        module = Node(NodeKind.MODULE, 1, end, children=body)
        return module

    def parse_statements(self) -> list[Node]:
        """Parse statements until a Dedent or EOF at this level."""
        out: list[Node] = []
        while True:
            tok = self.peek()
            if tok.kind is TokenKind.NEWLINE:
                self.advance()
                continue
            if tok.kind is TokenKind.END_OF_FILE:
                break
            if tok.kind is TokenKind.DEDENT:
                break
            if tok.kind is TokenKind.INDENT:
                # Indentation that opens without a compound header (repaired
                # input); absorb the block at this level.
                self.advance()
                out.extend(self.parse_statements())
                if self.at(TokenKind.DEDENT):
                    self.advance()
                continue
            out.append(self.parse_statement())
        return out

    def parse_block(self) -> list[Node]:
        """Parse a suite after ':' — inline statements or an indented block."""
        if self.at(TokenKind.NEWLINE):
            self.advance()
            # Blank and comment-only lines between the header and its body
            # surface as extra Newline tokens; they don't end the suite.
            while self.at(TokenKind.NEWLINE):
                self.advance()
            if not self.at(TokenKind.INDENT):
                return []
            self.advance()
            body = self.parse_statements()
            if self.at(TokenKind.DEDENT):
                self.advance()
            return body
        # Inline suite: one or more simple statements on the header line.
        body = [self.parse_inline_statement()]
        while self.at_operator(";"):
            self.advance()
            if self.at(TokenKind.NEWLINE) or self.at(TokenKind.END_OF_FILE):
                break
            body.append(self.parse_inline_statement())
        if self.at(TokenKind.NEWLINE):
            self.advance()
        return body

    def parse_inline_statement(self) -> Node:
        start = self.pos
        try:
            return self.parse_simple_statement()
        except _Unrecognized:
            self.pos = start
            return self.parse_opaque_inline()

    def parse_opaque_inline(self) -> Node:
        """Swallow one inline simple statement (no block) as OpaqueLine."""
        start_line = self.peek().line
        refs: set[str] = set()
        prev_dot = False
        while not (
            self.at(TokenKind.NEWLINE)
            or self.at(TokenKind.END_OF_FILE)
            or self.at(TokenKind.DEDENT)
            or self.at_operator(";")
        ):
            tok = self.advance()
            # Names after a dot are attributes; names before a bare '=' are
            # keyword labels or assignment targets.  Neither is a read.
            if tok.kind is TokenKind.NAME and not prev_dot and not self.at_operator("="):
                refs.add(tok.text)
            prev_dot = tok.kind is TokenKind.OPERATOR and tok.text == "."
        node = Node(NodeKind.OPAQUE_LINE, start_line, self.last_line)
        node.refs = refs
        return node

    # -- statements ------------------------------------------------------

    def parse_statement(self) -> Node:
        start = self.pos
        try:
            return self.parse_statement_inner()
        except _Unrecognized:
            self.pos = start
            return self.parse_opaque_statement()

    def parse_statement_inner(self) -> Node:
        tok = self.peek()
        if tok.kind is TokenKind.KEYWORD:
            word = tok.text
            if word == "def":
                return self.parse_def()
            if word == "class":
                return self.parse_class()
            if word == "if":
                return self.parse_if()
            if word == "for":
                return self.parse_for()
            if word == "while":
                return self.parse_while()
            if word == "try":
                return self.parse_try()
            if word == "with":
                return self.parse_with()
            if word == "return":
                return self.parse_return()
            if word == "raise":
                return self.parse_raise()
            if word in ("import", "from"):
                return self.parse_import()
            if word in _OPAQUE_KEYWORDS:
                raise _Unrecognized
            if word in ("elif", "else", "except", "finally"):
                raise _Unrecognized  # orphan clause
        return self.parse_simple_statement(terminated=True)

    def parse_simple_statement(self, terminated: bool = False) -> Node:
        """Assignment or expression statement (one ';'-delimited piece).

        With ``terminated`` the statement must end cleanly at a Newline/';',
        otherwise the whole physical statement is rejected as opaque.
        """
        tok = self.peek()
        if tok.kind is TokenKind.KEYWORD and tok.text in ("return", "raise"):
            return self.parse_return() if tok.text == "return" else self.parse_raise()
        if tok.kind is TokenKind.KEYWORD and tok.text in ("import", "from"):
            return self.parse_import()
        node = self.parse_assign_or_expr()
        if terminated:
            if not (
                self.at(TokenKind.NEWLINE)
                or self.at(TokenKind.END_OF_FILE)
                or self.at_operator(";")
            ):
                raise _Unrecognized
            if self.at_operator(";"):
                # Leave the ';' for the statement loop? Simple statements at
                # top level may chain; absorb the rest into siblings via
                # normal flow by consuming here and parsing the remainder.
                self.advance()
                if not (self.at(TokenKind.NEWLINE) or self.at(TokenKind.END_OF_FILE)):
                    # Chain becomes: current node returned; the remainder is
                    # parsed by the caller loop as its own statement(s) since
                    # we stopped before the Newline.
                    return node
            if self.at(TokenKind.NEWLINE):
                self.advance()
        return node

    def parse_opaque_statement(self) -> Node:
        """Swallow one statement (plus any indented block) as OpaqueLine."""
        start_tok = self.peek()
        start_line = start_tok.line
        refs: set[str] = set()
        soft: set[str] = set()
        prev_dot = False
        while not (
            self.at(TokenKind.NEWLINE)
            or self.at(TokenKind.END_OF_FILE)
            or self.at(TokenKind.DEDENT)
        ):
            tok = self.advance()
            if tok.kind is TokenKind.NAME and not prev_dot and not self.at_operator("="):
                refs.add(tok.text)
            if tok.kind is TokenKind.STRING:
                soft |= _fstring_soft_refs(tok.text)
            prev_dot = tok.kind is TokenKind.OPERATOR and tok.text == "."
        if self.at(TokenKind.NEWLINE):
            self.advance()
        end_line = self.last_line
        if self.at(TokenKind.INDENT):
            self.advance()
            depth = 1
            prev_dot = False
            while depth and not self.at(TokenKind.END_OF_FILE):
                tok = self.advance()
                if tok.kind is TokenKind.INDENT:
                    depth += 1
                elif tok.kind is TokenKind.DEDENT:
                    depth -= 1
                elif tok.kind is TokenKind.NAME and not prev_dot and not self.at_operator("="):
                    refs.add(tok.text)
                elif tok.kind is TokenKind.STRING:
                    soft |= _fstring_soft_refs(tok.text)
                prev_dot = tok.kind is TokenKind.OPERATOR and tok.text == "."
            end_line = self.last_line
        node = Node(NodeKind.OPAQUE_LINE, start_line, end_line)
        node.refs = refs
        node.soft_refs = soft
        return node

    # -- compound statements ---------------------------------------------

    def parse_def(self) -> Node:
        start = self.expect(TokenKind.KEYWORD, "def").line
        name = self.expect(TokenKind.NAME).text
        expr = _ExprReader(self)
        params: list[str] = []
        defaults: list[tuple[str, str]] = []
        self.expect(TokenKind.OPERATOR, "(")
        while not self.at_operator(")"):
            if self.at_operator("*") or self.at_operator("**") or self.at_operator("/"):
                self.advance()
                if self.at_operator(","):
                    self.advance()
                continue
            pname = self.expect(TokenKind.NAME).text
            params.append(pname)
            if self.at_operator(":"):
                self.advance()
                expr.parse_expression()
            if self.at_operator("="):
                self.advance()
                head_tok = self.peek()
                head = head_tok.text
                nxt = self.peek(1)
                if nxt.kind is TokenKind.OPERATOR and nxt.text == "(":
                    head += "("
                defaults.append((pname, head))
                expr.parse_expression()
            if self.at_operator(","):
                self.advance()
            elif not self.at_operator(")"):
                raise _Unrecognized
        self.expect(TokenKind.OPERATOR, ")")
        if self.at_operator("->"):
            self.advance()
            expr.parse_expression()
        self.expect(TokenKind.OPERATOR, ":")
        body = self.parse_block()
        node = Node(
            NodeKind.FUNCTION_DEF,
            start,
            _span_end(start, expr.nodes, body, self.last_line),
            head=expr.nodes,
            children=body,
            name=name,
            params=params,
            param_defaults=defaults,
        )
        expr.finish(node)
        return node

    def parse_class(self) -> Node:
        start = self.expect(TokenKind.KEYWORD, "class").line
        name = self.expect(TokenKind.NAME).text
        expr = _ExprReader(self)
        if self.at_operator("("):
            self.advance()
            while not self.at_operator(")"):
                if self.at(TokenKind.NAME) and self.peek(1).kind is TokenKind.OPERATOR and self.peek(1).text == "=":
                    self.advance()
                    self.advance()
                if not self.at_operator(")"):
                    expr.parse_expression()
                if self.at_operator(","):
                    self.advance()
                elif not self.at_operator(")"):
                    raise _Unrecognized
            self.advance()
        self.expect(TokenKind.OPERATOR, ":")
        body = self.parse_block()
        node = Node(
            NodeKind.CLASS_DEF,
            start,
            _span_end(start, expr.nodes, body, self.last_line),
            head=expr.nodes,
            children=body,
            name=name,
        )
        expr.finish(node)
        return node

    def parse_if(self) -> Node:
        start = self.expect(TokenKind.KEYWORD, "if").line
        expr = _ExprReader(self)
        expr.parse_expression()
        self.expect(TokenKind.OPERATOR, ":")
        body = self.parse_block()
        children = list(body)
        has_elif = False
        while self.at_keyword("elif"):
            clause_start = self.advance().line
            has_elif = True
            clause_expr = _ExprReader(self)
            clause_expr.parse_expression()
            self.expect(TokenKind.OPERATOR, ":")
            clause_body = self.parse_block()
            clause = Node(
                NodeKind.ELIF,
                clause_start,
                _span_end(clause_start, clause_expr.nodes, clause_body, self.last_line),
                head=clause_expr.nodes,
                children=clause_body,
            )
            clause_expr.finish(clause)
            children.append(clause)
        if self.at_keyword("else"):
            children.append(self.parse_else_clause())
        node = Node(
            NodeKind.IF,
            start,
            _span_end(start, expr.nodes, children, self.last_line),
            head=expr.nodes,
            children=children,
            has_elif_chain=has_elif,
        )
        expr.finish(node)
        return node

    def parse_else_clause(self) -> Node:
        start = self.expect(TokenKind.KEYWORD, "else").line
        self.expect(TokenKind.OPERATOR, ":")
        body = self.parse_block()
        return Node(NodeKind.ELSE, start, _span_end(start, [], body, self.last_line), children=body)

    def parse_for(self) -> Node:
        start = self.expect(TokenKind.KEYWORD, "for").line
        expr = _ExprReader(self)
        targets = expr.parse_target_list(stop_keyword="in")
        self.expect(TokenKind.KEYWORD, "in")
        expr.parse_expression_list()
        self.expect(TokenKind.OPERATOR, ":")
        body = self.parse_block()
        children = list(body)
        if self.at_keyword("else"):
            children.append(self.parse_else_clause())
        node = Node(
            NodeKind.FOR,
            start,
            _span_end(start, expr.nodes, children, self.last_line),
            head=expr.nodes,
            children=children,
            targets=targets,
        )
        expr.finish(node)
        return node

    def parse_while(self) -> Node:
        start = self.expect(TokenKind.KEYWORD, "while").line
        expr = _ExprReader(self)
        expr.parse_expression()
        self.expect(TokenKind.OPERATOR, ":")
        body = self.parse_block()
        children = list(body)
        if self.at_keyword("else"):
            children.append(self.parse_else_clause())
        node = Node(
            NodeKind.WHILE,
            start,
            _span_end(start, expr.nodes, children, self.last_line),
            head=expr.nodes,
            children=children,
        )
        expr.finish(node)
        return node

    def parse_try(self) -> Node:
        start = self.expect(TokenKind.KEYWORD, "try").line
        self.expect(TokenKind.OPERATOR, ":")
        body = self.parse_block()
        children = list(body)
        saw_clause = False
        while self.at_keyword("except"):
            saw_clause = True
            clause_start = self.advance().line
            clause_expr = _ExprReader(self)
            caught: list[str] = []
            bare = True
            if not self.at_operator(":"):
                bare = False
                clause_expr.parse_expression()
                if self.at_keyword("as"):
                    self.advance()
                    caught.append(self.expect(TokenKind.NAME).text)
            self.expect(TokenKind.OPERATOR, ":")
            clause_body = self.parse_block()
            clause = Node(
                NodeKind.EXCEPT_HANDLER,
                clause_start,
                _span_end(clause_start, clause_expr.nodes, clause_body, self.last_line),
                head=clause_expr.nodes,
                children=clause_body,
                targets=caught,
                is_bare=bare,
            )
            clause_expr.finish(clause)
            children.append(clause)
        if self.at_keyword("else"):
            saw_clause = True
            children.append(self.parse_else_clause())
        if self.at_keyword("finally"):
            saw_clause = True
            clause_start = self.advance().line
            self.expect(TokenKind.OPERATOR, ":")
            clause_body = self.parse_block()
            clause = Node(
                NodeKind.ELSE,
                clause_start,
                _span_end(clause_start, [], clause_body, self.last_line),
                children=clause_body,
                is_finally=True,
            )
            children.append(clause)
        if not saw_clause:
            raise _Unrecognized
        return Node(NodeKind.TRY, start, _span_end(start, [], children, self.last_line), children=children)

    def parse_with(self) -> Node:
        start = self.expect(TokenKind.KEYWORD, "with").line
        expr = _ExprReader(self)
        targets: list[str] = []
        while True:
            expr.parse_expression()
            if self.at_keyword("as"):
                self.advance()
                targets.extend(expr.parse_target_atom())
            if self.at_operator(","):
                self.advance()
                continue
            break
        self.expect(TokenKind.OPERATOR, ":")
        body = self.parse_block()
        node = Node(
            NodeKind.WITH,
            start,
            _span_end(start, expr.nodes, body, self.last_line),
            head=expr.nodes,
            children=body,
            targets=targets,
        )
        expr.finish(node)
        return node

    def parse_return(self) -> Node:
        start = self.expect(TokenKind.KEYWORD, "return").line
        expr = _ExprReader(self)
        if not self._at_statement_end():
            expr.parse_expression_list()
        node = Node(
            NodeKind.RETURN,
            start,
            _span_end(start, expr.nodes, [], self.last_line),
            head=expr.nodes,
        )
        expr.finish(node)
        self._consume_statement_end()
        return node

    def parse_raise(self) -> Node:
        start = self.expect(TokenKind.KEYWORD, "raise").line
        expr = _ExprReader(self)
        if not self._at_statement_end():
            expr.parse_expression()
            if self.at_keyword("from"):
                self.advance()
                expr.parse_expression()
        node = Node(
            NodeKind.RAISE,
            start,
            _span_end(start, expr.nodes, [], self.last_line),
            head=expr.nodes,
        )
        expr.finish(node)
        self._consume_statement_end()
        return node

    def parse_import(self) -> Node:
        tok = self.peek()
        start = tok.line
        bound: list[str] = []
        if tok.text == "import":
            self.advance()
            while True:
                first = self.expect(TokenKind.NAME).text
                while self.at_operator("."):
                    self.advance()
                    self.expect(TokenKind.NAME)
                if self.at_keyword("as"):
                    self.advance()
                    bound.append(self.expect(TokenKind.NAME).text)
                else:
                    bound.append(first)
                if self.at_operator(","):
                    self.advance()
                    continue
                break
        else:
            self.expect(TokenKind.KEYWORD, "from")
            while self.at_operator(".") or self.at_operator("..."):
                self.advance()
            if self.at(TokenKind.NAME):
                self.advance()
                while self.at_operator("."):
                    self.advance()
                    self.expect(TokenKind.NAME)
            self.expect(TokenKind.KEYWORD, "import")
            if self.at_operator("*"):
                self.advance()
            else:
                parenthesized = self.at_operator("(")
                if parenthesized:
                    self.advance()
                while True:
                    if parenthesized and self.at_operator(")"):
                        break
                    imported = self.expect(TokenKind.NAME).text
                    if self.at_keyword("as"):
                        self.advance()
                        bound.append(self.expect(TokenKind.NAME).text)
                    else:
                        bound.append(imported)
                    if self.at_operator(","):
                        self.advance()
                        continue
                    break
                if parenthesized:
                    self.expect(TokenKind.OPERATOR, ")")
        node = Node(NodeKind.IMPORT, start, self.last_line, names=bound)
        self._consume_statement_end()
        return node

    # -- simple statements -----------------------------------------------

    def parse_assign_or_expr(self) -> Node:
        start_tok = self.peek()
        if start_tok.kind in (TokenKind.NEWLINE, TokenKind.END_OF_FILE, TokenKind.DEDENT, TokenKind.INDENT):
            raise _Unrecognized
        start = start_tok.line
        expr = _ExprReader(self)
        targets: list[str] = []
        saw_assign = False
        while True:
            checkpoint = self.pos
            ref_mark = expr.mark()
            string_start = self.pos
            expr.parse_expression_list()
            if self.at_operator("="):
                self.pos = checkpoint
                expr.rollback(ref_mark)
                saw_assign = True
                targets.extend(expr.parse_target_list(stop_operator="="))
                self.expect(TokenKind.OPERATOR, "=")
                continue
            aug = self.peek()
            if aug.kind is TokenKind.OPERATOR and aug.text in _AUGMENTED_OPS and not saw_assign:
                self.pos = checkpoint
                expr.rollback(ref_mark)
                saw_assign = True
                names = expr.parse_target_list(stop_operator=aug.text)
                targets.extend(names)
                expr.refs.update(names)  # augmented target is read too
                self.advance()
                continue
            if self.at_operator(":") and not saw_assign:
                # Annotated assignment: name ':' annotation ['=' value].
                self.pos = checkpoint
                expr.rollback(ref_mark)
                saw_assign = True
                targets.extend(expr.parse_target_list(stop_operator=":"))
                self.expect(TokenKind.OPERATOR, ":")
                expr.parse_expression()
                if self.at_operator("="):
                    self.advance()
                    continue
            break
        if not self._at_simple_statement_end():
            raise _Unrecognized
        end = _span_end(start, expr.nodes, [], self.last_line)
        if saw_assign:
            node = Node(NodeKind.ASSIGN, start, end, head=expr.nodes, targets=sorted(set(targets)))
        else:
            node = Node(NodeKind.EXPRESSION_STMT, start, end, children=expr.nodes)
            consumed = self.tokens[string_start : self.pos]
            content = [t for t in consumed if t.kind not in (TokenKind.NEWLINE, TokenKind.END_OF_FILE)]
            if content and all(t.kind is TokenKind.STRING for t in content):
                node.is_string_literal = True
        expr.finish(node)
        return node

    def _at_statement_end(self) -> bool:
        return (
            self.at(TokenKind.NEWLINE)
            or self.at(TokenKind.END_OF_FILE)
            or self.at_operator(";")
        )

    def _at_simple_statement_end(self) -> bool:
        return self._at_statement_end() or self.at(TokenKind.DEDENT)

    def _consume_statement_end(self) -> None:
        if self.at_operator(";"):
            self.advance()
            return
        if self.at(TokenKind.NEWLINE):
            self.advance()


def _span_end(start: int, head: list[Node], children: list[Node], last_line: int) -> int:
    end = max(start, last_line)
    for node in head:
        end = max(end, node.end_line)
    for node in children:
        end = max(end, node.end_line)
    return end


def _fstring_soft_refs(text: str) -> set[str]:
    """Names appearing inside f-string replacement fields, approximately."""
    quote_pos = min((i for i in (text.find("'"), text.find('"')) if i >= 0), default=0)
    if "f" not in text[:quote_pos].lower():
        return set()
    found: set[str] = set()
    for fieldtext in _FSTRING_FIELD_RE.findall(text):
        found.update(_FSTRING_NAME_RE.findall(fieldtext))
    return found


class _ExprReader:
    """Expression scanner: builds metric-relevant nodes and collects names.

    Produces BoolSequence / Conditional / Lambda / Call nodes (nested), adds
    referenced names to ``refs``, and suppresses comprehension targets and
    lambda parameters from the final reference set.
    """

    def __init__(self, parser: _Parser) -> None:
        self.p = parser
        self.nodes: list[Node] = []
        self.refs: set[str] = set()
        self.soft_refs: set[str] = set()
        self.suppressed: set[str] = set()
        self.walrus: set[str] = set()

    # bookkeeping for assignment backtracking
    def mark(self) -> tuple[int, set[str], set[str], set[str], set[str]]:
        return (
            len(self.nodes),
            set(self.refs),
            set(self.soft_refs),
            set(self.suppressed),
            set(self.walrus),
        )

    def rollback(self, mark: tuple[int, set[str], set[str], set[str], set[str]]) -> None:
        count, refs, soft, supp, walrus = mark
        del self.nodes[count:]
        self.refs = refs
        self.soft_refs = soft
        self.suppressed = supp
        self.walrus = walrus

    def finish(self, node: Node) -> None:
        node.refs |= self.refs - self.suppressed
        node.soft_refs |= self.soft_refs
        # Walrus assignments bind in the enclosing statement's scope.
        if self.walrus:
            if node.targets is None:
                node.targets = []
            for name in sorted(self.walrus):
                if name not in node.targets:
                    node.targets.append(name)

    # -- targets ---------------------------------------------------------

    def parse_target_list(self, stop_keyword: str | None = None, stop_operator: str | None = None) -> list[str]:
        bound: list[str] = []
        while True:
            if stop_keyword and self.p.at_keyword(stop_keyword):
                break
            if stop_operator and self.p.at_operator(stop_operator):
                break
            bound.extend(self.parse_target_atom())
            if self.p.at_operator(","):
                self.p.advance()
                continue
            break
        return bound

    def parse_target_atom(self) -> list[str]:
        if self.p.at_operator("*"):
            self.p.advance()
            return self.parse_target_atom()
        if self.p.at_operator("(") or self.p.at_operator("["):
            closer = ")" if self.p.peek().text == "(" else "]"
            self.p.advance()
            bound: list[str] = []
            while not self.p.at_operator(closer):
                bound.extend(self.parse_target_atom())
                if self.p.at_operator(","):
                    self.p.advance()
            self.p.advance()
            return bound
        if self.p.at(TokenKind.NAME):
            name_tok = self.p.advance()
            if self.p.at_operator(".") or self.p.at_operator("[") or self.p.at_operator("("):
                # Attribute/subscript target: the base is a reference.
                self.refs.add(name_tok.text)
                self._consume_postfix()
                return []
            return [name_tok.text]
        # Unexpected target shape — parse as expression, bind nothing.
        self.parse_expression()
        return []

    def _consume_postfix(self) -> None:
        while True:
            if self.p.at_operator("."):
                self.p.advance()
                if self.p.at(TokenKind.NAME):
                    self.p.advance()
                continue
            if self.p.at_operator("[") or self.p.at_operator("("):
                closer = "]" if self.p.peek().text == "[" else ")"
                self.p.advance()
                while not self.p.at_operator(closer):
                    if self.p.at_operator(",") or self.p.at_operator(":"):
                        self.p.advance()
                        continue
                    self.parse_expression()
                self.p.advance()
                continue
            break

    # -- expressions -----------------------------------------------------

    def parse_expression_list(self) -> None:
        self.parse_expression()
        while self.p.at_operator(","):
            self.p.advance()
            if self._at_expression_end():
                break
            self.parse_expression()

    def _at_expression_end(self) -> bool:
        tok = self.p.peek()
        if tok.kind in (TokenKind.NEWLINE, TokenKind.END_OF_FILE, TokenKind.DEDENT, TokenKind.INDENT):
            return True
        if tok.kind is TokenKind.OPERATOR and tok.text in (")", "]", "}", ":", ";", "="):
            return True
        return False

    def parse_expression(self) -> None:
        """Ternary level: or-test ['if' or-test 'else' expression]."""
        before = len(self.nodes)
        start_line = self.p.peek().line
        self.parse_or_test()
        if self.p.at_keyword("if"):
            self.p.advance()
            body_nodes = self.nodes[before:]
            del self.nodes[before:]
            cond = Node(NodeKind.CONDITIONAL, start_line, start_line)
            inner_before = len(self.nodes)
            self.parse_or_test()
            if self.p.at_keyword("else"):
                self.p.advance()
                self.parse_expression()
            cond.children = body_nodes + self.nodes[inner_before:]
            del self.nodes[inner_before:]
            cond.end_line = max(
                [start_line, self.p.last_line] + [n.end_line for n in cond.children]
            )
            self.nodes.append(cond)

    def parse_or_test(self) -> None:
        self._parse_bool_level("or", self.parse_and_test)

    def parse_and_test(self) -> None:
        self._parse_bool_level("and", self.parse_not_test)

    def _parse_bool_level(self, op: str, sub) -> None:
        before = len(self.nodes)
        start_line = self.p.peek().line
        sub()
        count = 1
        while self.p.at_keyword(op):
            self.p.advance()
            count += 1
            sub()
        if count > 1:
            seq = Node(
                NodeKind.BOOL_SEQUENCE,
                start_line,
                max([start_line, self.p.last_line] + [n.end_line for n in self.nodes[before:]]),
                operator=op,
                length=count,
            )
            seq.children = self.nodes[before:]
            del self.nodes[before:]
            self.nodes.append(seq)

    def parse_not_test(self) -> None:
        while self.p.at_keyword("not"):
            self.p.advance()
        self.parse_comparison()

    def parse_comparison(self) -> None:
        self.parse_arith()
        while True:
            tok = self.p.peek()
            if tok.kind is TokenKind.OPERATOR and tok.text in _COMPARE_OPS:
                self.p.advance()
                self.parse_arith()
                continue
            if tok.kind is TokenKind.KEYWORD and tok.text in ("in", "is"):
                self.p.advance()
                if self.p.at_keyword("not"):
                    self.p.advance()
                self.parse_arith()
                continue
            if tok.kind is TokenKind.KEYWORD and tok.text == "not":
                # 'not in'
                self.p.advance()
                if self.p.at_keyword("in"):
                    self.p.advance()
                self.parse_arith()
                continue
            break

    def parse_arith(self) -> None:
        self.parse_unary()
        while True:
            tok = self.p.peek()
            if tok.kind is TokenKind.OPERATOR and tok.text in _BINARY_OPS:
                self.p.advance()
                self.parse_unary()
                continue
            break

    def parse_unary(self) -> None:
        while True:
            tok = self.p.peek()
            if tok.kind is TokenKind.OPERATOR and tok.text in ("+", "-", "~", "*", "**"):
                self.p.advance()
                continue
            if tok.kind is TokenKind.KEYWORD and tok.text in ("await", "yield"):
                self.p.advance()
                if self.p.at_keyword("from"):
                    self.p.advance()
                if self._at_expression_end() or self.p.at_operator(","):
                    return
                continue
            break
        self.parse_postfix()

    def parse_postfix(self) -> None:
        self.parse_atom()
        while True:
            if self.p.at_operator("."):
                self.p.advance()
                if self.p.at(TokenKind.NAME) or self.p.at(TokenKind.KEYWORD):
                    name_tok = self.p.advance()
                    if self.p.at_operator("("):
                        # Method call: record the final attribute segment so
                        # recursion via self.<name>(…) is detectable.
                        self._parse_call_args(callee_name=name_tok.text, start_line=name_tok.line)
                continue
            if self.p.at_operator("("):
                self._parse_call_args(callee_name=None)
                continue
            if self.p.at_operator("["):
                self.p.advance()
                while not self.p.at_operator("]"):
                    if self.p.at_operator(":") or self.p.at_operator(","):
                        self.p.advance()
                        continue
                    if self.p.at(TokenKind.END_OF_FILE):
                        raise _Unrecognized
                    self.parse_expression()
                self.p.advance()
                continue
            break

    def parse_atom(self) -> None:
        tok = self.p.peek()
        if tok.kind is TokenKind.NAME:
            nxt = self.p.peek(1)
            if nxt.kind is TokenKind.OPERATOR and nxt.text == ":=":
                # Walrus target binds at statement level; not a reference.
                self.p.advance()
                self.p.advance()
                self.suppressed.add(tok.text)
                self.walrus.add(tok.text)
                self.parse_expression()
                return
            if nxt.kind is TokenKind.OPERATOR and nxt.text == "(":
                self.refs.add(tok.text)
                self.p.advance()
                call = self._parse_call_args(callee_name=tok.text, start_line=tok.line)
                self._continue_postfix_after_call(call)
                return
            self.refs.add(tok.text)
            self.p.advance()
            return
        if tok.kind is TokenKind.NUMBER:
            self.p.advance()
            return
        if tok.kind is TokenKind.STRING:
            self.soft_refs |= _fstring_soft_refs(tok.text)
            self.p.advance()
            while self.p.at(TokenKind.STRING):
                self.soft_refs |= _fstring_soft_refs(self.p.peek().text)
                self.p.advance()
            return
        if tok.kind is TokenKind.KEYWORD:
            if tok.text in _ATOM_KEYWORDS:
                self.p.advance()
                return
            if tok.text == "lambda":
                self.parse_lambda()
                return
            if tok.text == "not":
                self.p.advance()
                self.parse_not_test()
                return
            raise _Unrecognized
        if tok.kind is TokenKind.OPERATOR:
            if tok.text == "(":
                self._parse_bracketed(")", allow_comprehension=True)
                return
            if tok.text == "[":
                self._parse_bracketed("]", allow_comprehension=True)
                return
            if tok.text == "{":
                self._parse_bracketed("}", allow_comprehension=True, allow_colon=True)
                return
            if tok.text == "...":
                self.p.advance()
                return
        raise _Unrecognized

    def parse_lambda(self) -> None:
        start = self.p.expect(TokenKind.KEYWORD, "lambda").line
        while not self.p.at_operator(":"):
            if self.p.at(TokenKind.NAME):
                self.suppressed.add(self.p.advance().text)
            elif self.p.at_operator("*") or self.p.at_operator("**") or self.p.at_operator(","):
                self.p.advance()
            elif self.p.at_operator("="):
                self.p.advance()
                self.parse_or_test()
            else:
                raise _Unrecognized
        self.p.advance()
        before = len(self.nodes)
        self.parse_expression()
        lam = Node(NodeKind.LAMBDA, start, start)
        lam.children = self.nodes[before:]
        del self.nodes[before:]
        lam.end_line = max([start, self.p.last_line] + [n.end_line for n in lam.children])
        self.nodes.append(lam)

    def _parse_call_args(self, callee_name: str | None, start_line: int | None = None) -> Node | None:
        """Parse '(…)' after a callable; returns the Call node if named."""
        line = start_line if start_line is not None else self.p.peek().line
        self.p.expect(TokenKind.OPERATOR, "(")
        before = len(self.nodes)
        while not self.p.at_operator(")"):
            if self.p.at(TokenKind.END_OF_FILE):
                raise _Unrecognized
            if self.p.at_operator("*") or self.p.at_operator("**"):
                self.p.advance()
                continue
            if (
                self.p.at(TokenKind.NAME)
                and self.p.peek(1).kind is TokenKind.OPERATOR
                and self.p.peek(1).text == "="
            ):
                self.p.advance()  # keyword-argument label, not a reference
                self.p.advance()
                continue
            self.parse_expression()
            if self.p.at_keyword("for"):
                self._parse_comprehension_clauses()
            if self.p.at_operator(","):
                self.p.advance()
        self.p.advance()
        if callee_name is None:
            return None
        call = Node(NodeKind.CALL, line, line, callee_name=callee_name)
        call.children = self.nodes[before:]
        del self.nodes[before:]
        call.end_line = max([line, self.p.last_line] + [n.end_line for n in call.children])
        self.nodes.append(call)
        return call

    def _continue_postfix_after_call(self, call: Node | None) -> None:
        """Handle chains like f(x)(y) or f(x).g[0] after a named call."""
        while True:
            if self.p.at_operator("."):
                self.p.advance()
                if self.p.at(TokenKind.NAME) or self.p.at(TokenKind.KEYWORD):
                    name_tok = self.p.advance()
                    if self.p.at_operator("("):
                        self._parse_call_args(callee_name=name_tok.text, start_line=name_tok.line)
                continue
            if self.p.at_operator("("):
                self._parse_call_args(callee_name=None)
                continue
            if self.p.at_operator("["):
                self.p.advance()
                while not self.p.at_operator("]"):
                    if self.p.at_operator(":") or self.p.at_operator(","):
                        self.p.advance()
                        continue
                    if self.p.at(TokenKind.END_OF_FILE):
                        raise _Unrecognized
                    self.parse_expression()
                self.p.advance()
                continue
            break

    def _parse_bracketed(self, closer: str, allow_comprehension: bool, allow_colon: bool = False) -> None:
        self.p.advance()
        while not self.p.at_operator(closer):
            if self.p.at(TokenKind.END_OF_FILE):
                raise _Unrecognized
            if self.p.at_operator(",") or (allow_colon and self.p.at_operator(":")):
                self.p.advance()
                continue
            if self.p.at_operator("*") or self.p.at_operator("**"):
                self.p.advance()
                continue
            self.parse_expression()
            if allow_comprehension and self.p.at_keyword("for"):
                self._parse_comprehension_clauses()
        self.p.advance()

    def _parse_comprehension_clauses(self) -> None:
        """'for' target 'in' or-test ('if' or-test | 'for' …)* — guards score."""
        while True:
            if self.p.at_keyword("for"):
                self.p.advance()
                names = self.parse_target_list(stop_keyword="in")
                self.suppressed.update(names)
                self.p.expect(TokenKind.KEYWORD, "in")
                self.parse_or_test()
                continue
            if self.p.at_keyword("if"):
                guard_line = self.p.advance().line
                before = len(self.nodes)
                self.parse_or_test()
                guard = Node(NodeKind.CONDITIONAL, guard_line, guard_line)
                guard.children = self.nodes[before:]
                del self.nodes[before:]
                guard.end_line = max(
                    [guard_line, self.p.last_line] + [n.end_line for n in guard.children]
                )
                self.nodes.append(guard)
                continue
            if self.p.at_keyword("async"):
                self.p.advance()
                continue
            break


def parse(tokens: list[Token]) -> StructureTree:
    """Build a StructureTree from a token stream; never fails on lexable input."""
    line_count = 1
    for tok in tokens:
        if tok.kind not in (TokenKind.END_OF_FILE, TokenKind.INDENT, TokenKind.DEDENT):
            line_count = max(line_count, tok.line)
    parser = _Parser(tokens)
    root = parser.parse_module()
    root.end_line = max(root.end_line, line_count)
    return StructureTree(root=root, line_count=line_count)


def parse_source(source: str) -> StructureTree:
    """Convenience wrapper: normalize, tokenize, and parse in one call."""
    return parse(tokenize(source))


def try_parse_source(source: str) -> StructureTree | None:
    """Like parse_source but returns None on LexError instead of raising."""
    try:
        return parse_source(source)
    except LexError:
        return None


def dump_tree(tree: StructureTree) -> str:
    """Render the tree as a stable s-expression, one node per line.

    Format: ``(Kind start-end key=value …)`` with header-expression nodes
    wrapped in ``(head …)`` ahead of body children.
    """
    out: list[str] = []

    def attr_text(node: Node) -> str:
        parts: list[str] = []
        if node.name is not None:
            parts.append(f"name={node.name}")
        if node.params is not None:
            parts.append("params=[%s]" % ",".join(node.params))
        if node.targets:
            parts.append("targets=[%s]" % ",".join(node.targets))
        if node.names is not None:
            parts.append("names=[%s]" % ",".join(node.names))
        if node.operator is not None:
            parts.append(f"operator={node.operator}")
        if node.length is not None:
            parts.append(f"length={node.length}")
        if node.callee_name is not None:
            parts.append(f"callee={node.callee_name}")
        if node.kind is NodeKind.EXCEPT_HANDLER:
            parts.append(f"bare={node.is_bare}")
        if node.kind is NodeKind.IF:
            parts.append(f"elif_chain={node.has_elif_chain}")
        if node.is_finally:
            parts.append("finally=True")
        return " ".join(parts)

    def render(node: Node, depth: int) -> None:
        pad = "  " * depth
        attrs = attr_text(node)
        header = f"{pad}({node.kind.value} {node.start_line}-{node.end_line}"
        if attrs:
            header += " " + attrs
        if not node.head and not node.children:
            out.append(header + ")")
            return
        out.append(header)
        if node.head:
            out.append(f"{pad}  (head")
            for sub in node.head:
                render(sub, depth + 2)
            out.append(f"{pad}  )")
        for sub in node.children:
            render(sub, depth + 1)
        out.append(pad + ")")

    render(tree.root, 0)
    return "\n".join(out) + "\n"


def line_coverage_ok(tree: StructureTree, source: str) -> bool:
    """Check the span-coverage invariant: every Code line sits in the root span."""
    from .lexer import LineKind, classify_lines

    tags = classify_lines(source)
    for i, tag in enumerate(tags, start=1):
        if tag is LineKind.CODE and not (tree.root.start_line <= i <= tree.root.end_line):
            return False
    return True
