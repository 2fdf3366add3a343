"""Tolerant line-oriented tokenizer for Python-like source text.

The scanner is deliberately forgiving: judge submissions arrive with stray
operators, inconsistent indentation, and occasionally non-Python content.
Anything that can be scanned is scanned; the only hard failure is an
unterminated string literal, which makes the rest of the text unlexable.

Normalization applied before scanning (and assumed by every consumer):

* ``\\r\\n`` and ``\\r`` become ``\\n``;
* tabs expand to the next multiple of eight columns (this also touches tabs
  inside string literals, which is acceptable for line-based metrics but
  means token text is not always byte-identical to the raw input).

Indentation tokens follow the usual scheme: ``Indent`` when a code line is
deeper than the top of the indent stack, ``Dedent`` when shallower.  A dedent
to a depth that was never pushed is repaired by re-opening a block at the new
width instead of failing.  Blank and comment-only lines never move the stack.

Every physical line break outside brackets produces a ``Newline`` token
(including blank lines), so rendering the token stream back to text is exact
for normalized input; line breaks inside brackets and immediately after a
backslash are structural and are reconstructed from token positions instead.
"""

from __future__ import annotations

import keyword
import re
from enum import Enum
from typing import NamedTuple

TAB_WIDTH = 8

KEYWORDS = frozenset(keyword.kwlist)

_NAME_RE = re.compile(r"[^\W\d]\w*")
_NUMBER_RE = re.compile(
    r"""(?x)
    (?:
        0[xX][0-9a-fA-F_]+
      | 0[oO][0-7_]+
      | 0[bB][01_]+
      | (?:\d[\d_]*)?\.\d[\d_]*(?:[eE][+-]?\d+)?
      | \d[\d_]*\.?(?:[eE][+-]?\d+)?
    )[jJ]?
    """
)
_STRING_PREFIX_RE = re.compile(r"[rRbBfFuU]{1,2}")

_OPERATORS_3 = ("**=", "//=", "<<=", ">>=", "...")
_OPERATORS_2 = (
    "**", "//", "<<", ">>", "<=", ">=", "==", "!=", "->", ":=",
    "+=", "-=", "*=", "/=", "%=", "@=", "&=", "|=", "^=",
)
_OPERATORS_1 = "+-*/%@&|^~<>()[]{},:.;="

_OPENERS = "([{"
_CLOSERS = ")]}"


class TokenKind(Enum):
    NAME = "Name"
    NUMBER = "Number"
    STRING = "String"
    OPERATOR = "Operator"
    KEYWORD = "Keyword"
    NEWLINE = "Newline"
    INDENT = "Indent"
    DEDENT = "Dedent"
    COMMENT = "Comment"
    END_OF_FILE = "EndOfFile"


class Token(NamedTuple):
    kind: TokenKind
    text: str
    line: int
    col: int


class LineKind(Enum):
    CODE = "Code"
    BLANK = "Blank"
    COMMENT_ONLY = "CommentOnly"


class LexError(Exception):
    """Raised when text cannot be scanned; carries the offending position."""

    def __init__(self, message: str, line: int, col: int) -> None:
        super().__init__(f"{message} (line {line}, col {col})")
        self.line = line
        self.col = col


def normalize(source: str) -> str:
    """Return *source* with line endings converted to ``\\n`` and tabs expanded."""
    return source.replace("\r\n", "\n").replace("\r", "\n").expandtabs(TAB_WIDTH)


def source_lines(source: str) -> list[str]:
    """Split normalized text into physical lines, without a phantom final line."""
    lines = normalize(source).split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def classify_lines(source: str) -> list[LineKind]:
    """Classify each physical line as Code, Blank, or CommentOnly.

    The rule is line-local on purpose: a line inside a multi-line string
    classifies by its own text, so counts stay cheap and reproducible
    without a full parse.
    """
    kinds = []
    for raw in source_lines(source):
        stripped = raw.strip()
        if not stripped:
            kinds.append(LineKind.BLANK)
        elif stripped.startswith("#"):
            kinds.append(LineKind.COMMENT_ONLY)
        else:
            kinds.append(LineKind.CODE)
    return kinds


class _Scanner:
    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 0
        self.depth = 0
        self.indents = [0]
        self.tokens: list[Token] = []
        self.at_line_start = True

    # -- primitives ------------------------------------------------------

    def peek(self, offset: int = 0) -> str:
        i = self.pos + offset
        return self.text[i] if i < len(self.text) else ""

    def advance(self, count: int = 1) -> str:
        chunk = self.text[self.pos : self.pos + count]
        for ch in chunk:
            if ch == "\n":
                self.line += 1
                self.col = 0
            else:
                self.col += 1
        self.pos += count
        return chunk

    def emit(self, kind: TokenKind, text: str, line: int, col: int) -> None:
        self.tokens.append(Token(kind, text, line, col))

    # -- line structure --------------------------------------------------

    def handle_line_start(self) -> None:
        start = self.pos
        while self.peek() == " ":
            self.advance()
        width = self.pos - start
        nxt = self.peek()
        if nxt == "" or nxt == "\n" or nxt == "#":
            # Blank and comment-only lines leave the indent stack alone.
            self.at_line_start = False
            return
        self.at_line_start = False
        if width > self.indents[-1]:
            self.indents.append(width)
            self.emit(TokenKind.INDENT, "", self.line, 0)
            return
        while width < self.indents[-1]:
            self.indents.pop()
            self.emit(TokenKind.DEDENT, "", self.line, 0)
        if width > self.indents[-1]:
            # Unindent to a level that was never opened; repair by opening
            # a fresh block at the observed width.
            self.indents.append(width)
            self.emit(TokenKind.INDENT, "", self.line, 0)

    def handle_newline(self) -> None:
        line, col = self.line, self.col
        self.advance()
        if self.depth == 0:
            self.emit(TokenKind.NEWLINE, "\n", line, col)
            self.at_line_start = True

    # -- token scanners --------------------------------------------------

    def scan_comment(self) -> None:
        line, col = self.line, self.col
        start = self.pos
        while self.peek() not in ("", "\n"):
            self.advance()
        self.emit(TokenKind.COMMENT, self.text[start : self.pos], line, col)

    def scan_string(self, prefix_start: int, line: int, col: int) -> None:
        quote = self.peek()
        if self.text.startswith(quote * 3, self.pos):
            closer = quote * 3
            self.advance(3)
        else:
            closer = quote
            self.advance()
        while True:
            ch = self.peek()
            if ch == "":
                raise LexError("unterminated string literal", line, col)
            if ch == "\\":
                self.advance(2)
                continue
            if len(closer) == 1 and ch == "\n":
                raise LexError("unterminated string literal", line, col)
            if self.text.startswith(closer, self.pos):
                self.advance(len(closer))
                break
            self.advance()
        self.emit(TokenKind.STRING, self.text[prefix_start : self.pos], line, col)

    def scan_name_or_string(self) -> None:
        line, col = self.line, self.col
        start = self.pos
        match = _NAME_RE.match(self.text, self.pos)
        assert match is not None
        word = match.group()
        if (
            len(word) <= 2
            and _STRING_PREFIX_RE.fullmatch(word)
            and self.text[self.pos + len(word) : self.pos + len(word) + 1] in "'\""
        ):
            self.advance(len(word))
            self.scan_string(start, line, col)
            return
        self.advance(len(word))
        kind = TokenKind.KEYWORD if word in KEYWORDS else TokenKind.NAME
        self.emit(kind, word, line, col)

    def scan_number(self) -> None:
        line, col = self.line, self.col
        match = _NUMBER_RE.match(self.text, self.pos)
        assert match is not None
        self.advance(len(match.group()))
        self.emit(TokenKind.NUMBER, match.group(), line, col)

    def scan_operator(self) -> None:
        line, col = self.line, self.col
        for group in (_OPERATORS_3, _OPERATORS_2):
            for op in group:
                if self.text.startswith(op, self.pos):
                    self.advance(len(op))
                    self.emit(TokenKind.OPERATOR, op, line, col)
                    self._track_depth(op)
                    return
        ch = self.advance()
        self.emit(TokenKind.OPERATOR, ch, line, col)
        self._track_depth(ch)

    def _track_depth(self, op: str) -> None:
        if op in _OPENERS:
            self.depth += 1
        elif op in _CLOSERS:
            self.depth = max(0, self.depth - 1)

    # -- driver ----------------------------------------------------------

    def run(self) -> list[Token]:
        while self.pos < len(self.text):
            if self.at_line_start and self.depth == 0:
                self.handle_line_start()
                continue
            ch = self.peek()
            if ch == "\n":
                self.handle_newline()
                continue
            if ch == " ":
                self.advance()
                continue
            if ch == "#":
                self.scan_comment()
                continue
            if ch == "\\":
                line, col = self.line, self.col
                self.advance()
                self.emit(TokenKind.OPERATOR, "\\", line, col)
                if self.peek() == "\n":
                    self.advance()  # explicit continuation: swallow the break
                continue
            if ch in "'\"":
                self.scan_string(self.pos, self.line, self.col)
                continue
            if _NAME_RE.match(self.text, self.pos):
                self.scan_name_or_string()
                continue
            if ch.isdigit() or (ch == "." and self.peek(1).isdigit()):
                self.scan_number()
                continue
            self.scan_operator()
        self._finish()
        return self.tokens

    def _finish(self) -> None:
        if self.tokens and not self.at_line_start:
            last = self.tokens[-1]
            if last.kind is not TokenKind.NEWLINE:
                self.emit(TokenKind.NEWLINE, "", self.line, self.col)
        while len(self.indents) > 1:
            self.indents.pop()
            self.emit(TokenKind.DEDENT, "", self.line, self.col)
        self.emit(TokenKind.END_OF_FILE, "", self.line, self.col)


def tokenize(source: str) -> list[Token]:
    """Scan *source* into tokens over its normalized form.

    Raises :class:`LexError` only for unterminated string literals; every
    other oddity is passed through as the closest matching token.
    """
    return _Scanner(normalize(source)).run()


def render_tokens(tokens: list[Token]) -> str:
    """Rebuild normalized source text from a token stream.

    Positions drive the reconstruction: missing lines become line breaks and
    missing columns become spaces.  For normalized input this is exact except
    for trailing spaces on whitespace-only lines inside brackets, which no
    token records.
    """
    parts: list[str] = []
    line, col = 1, 0
    for tok in tokens:
        if tok.line > line:
            parts.append("\n" * (tok.line - line))
            line, col = tok.line, 0
        if tok.col > col:
            parts.append(" " * (tok.col - col))
            col = tok.col
        if not tok.text:
            continue
        parts.append(tok.text)
        breaks = tok.text.count("\n")
        if breaks:
            line += breaks
            col = len(tok.text) - tok.text.rindex("\n") - 1
        else:
            col += len(tok.text)
    return "".join(parts)
