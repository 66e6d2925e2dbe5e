"""S-expression tokenizer and reader for the SMT-LIB 2 concrete syntax.

Shared by the clause-file frontend, the solver-process client (response
parsing) and the bundled solver (command parsing).  Atoms keep their
source position so diagnostics can point at the offending token.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Union


class SexprError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def __str__(self) -> str:
        if self.line:
            return f"{self.line}:{self.col}: {self.message}"
        return self.message


@dataclass(frozen=True)
class Atom:
    """A non-list token: symbol, keyword, numeral, decimal or string."""

    text: str
    kind: str  # symbol | numeral | decimal | string | keyword
    line: int = 0
    col: int = 0

    def __repr__(self) -> str:
        return self.text


@dataclass(frozen=True)
class SList:
    items: tuple
    line: int = 0
    col: int = 0

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def __repr__(self) -> str:
        return "(" + " ".join(map(repr, self.items)) + ")"


Node = Union[Atom, SList]

_SYMBOL_CHARS = set(
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
    "~!@$%^&*_-+=<>.?/"
)


class Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def _advance(self, n: int = 1) -> None:
        for _ in range(n):
            if self.pos < len(self.text) and self.text[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def tokens(self) -> Iterator[tuple[str, str, int, int]]:
        """Yields (kind, text, line, col); kind in {open, close, ...atom kinds}."""
        text = self.text
        while self.pos < len(text):
            c = text[self.pos]
            line, col = self.line, self.col
            if c in " \t\r\n":
                self._advance()
                continue
            if c == ";":
                while self.pos < len(text) and text[self.pos] != "\n":
                    self._advance()
                continue
            if c == "(":
                self._advance()
                yield ("open", "(", line, col)
                continue
            if c == ")":
                self._advance()
                yield ("close", ")", line, col)
                continue
            if c == '"':
                start = self.pos
                self._advance()
                while True:
                    if self.pos >= len(text):
                        raise SexprError("unterminated string literal", line, col)
                    if text[self.pos] == '"':
                        # "" is the SMT-LIB escape for a quote character
                        if self.pos + 1 < len(text) and text[self.pos + 1] == '"':
                            self._advance(2)
                            continue
                        self._advance()
                        break
                    self._advance()
                yield ("string", text[start:self.pos], line, col)
                continue
            if c == "|":
                start = self.pos
                self._advance()
                while self.pos < len(text) and text[self.pos] != "|":
                    self._advance()
                if self.pos >= len(text):
                    raise SexprError("unterminated quoted symbol", line, col)
                self._advance()
                yield ("symbol", text[start + 1:self.pos - 1], line, col)
                continue
            if c == ":":
                start = self.pos
                self._advance()
                while self.pos < len(text) and text[self.pos] in _SYMBOL_CHARS:
                    self._advance()
                yield ("keyword", text[start:self.pos], line, col)
                continue
            if c == "#":
                # #x.. / #b.. literals read as numerals
                start = self.pos
                self._advance(2)
                while self.pos < len(text) and text[self.pos] in _SYMBOL_CHARS:
                    self._advance()
                lit = text[start:self.pos]
                try:
                    if lit[1] == "x":
                        value = int(lit[2:], 16)
                    elif lit[1] == "b":
                        value = int(lit[2:], 2)
                    else:
                        raise ValueError
                except (ValueError, IndexError):
                    raise SexprError(f"bad literal {lit!r}", line, col) from None
                yield ("numeral", str(value), line, col)
                continue
            if c in _SYMBOL_CHARS:
                start = self.pos
                while self.pos < len(text) and text[self.pos] in _SYMBOL_CHARS:
                    self._advance()
                tok = text[start:self.pos]
                if tok[0].isdigit() or (tok[0] == "." and len(tok) > 1):
                    if "." in tok:
                        yield ("decimal", tok, line, col)
                    else:
                        yield ("numeral", tok, line, col)
                else:
                    yield ("symbol", tok, line, col)
                continue
            raise SexprError(f"unexpected character {c!r}", line, col)


def read_all(text: str) -> list[Node]:
    """Read every top-level s-expression in the input."""
    out: list[Node] = []
    stack: list[tuple[list, int, int]] = []
    for kind, tok, line, col in Tokenizer(text).tokens():
        if kind == "open":
            stack.append(([], line, col))
        elif kind == "close":
            if not stack:
                raise SexprError("unbalanced ')'", line, col)
            items, l0, c0 = stack.pop()
            node = SList(tuple(items), l0, c0)
            if stack:
                stack[-1][0].append(node)
            else:
                out.append(node)
        else:
            atom = Atom(tok, kind, line, col)
            if stack:
                stack[-1][0].append(atom)
            else:
                out.append(atom)
    if stack:
        _, line, col = stack[-1]
        raise SexprError("unbalanced '('", line, col)
    return out


def read_one(text: str) -> Node:
    nodes = read_all(text)
    if len(nodes) != 1:
        raise SexprError(f"expected one s-expression, found {len(nodes)}")
    return nodes[0]


def write_node(node: Node) -> str:
    if isinstance(node, Atom):
        return node.text
    return "(" + " ".join(write_node(i) for i in node.items) + ")"


def first_complete(text: str) -> int:
    """End index of the first complete top-level node, or -1 if incomplete.

    Used for incremental reads from a stream: a list is complete at its
    matching ')'; a bare atom only once a delimiter follows it (so a
    token split across reads is never cut short).
    """
    i = 0
    n = len(text)
    # leading whitespace and comments
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        else:
            break
    if i >= n:
        return -1
    if text[i] == "(":
        depth = 0
        j = i
        while j < n:
            c = text[j]
            if c == ";":
                while j < n and text[j] != "\n":
                    j += 1
                continue
            if c == '"':
                j += 1
                while j < n:
                    if text[j] == '"':
                        if j + 1 < n and text[j + 1] == '"':
                            j += 2
                            continue
                        break
                    j += 1
                if j >= n:
                    return -1
            elif c == "|":
                j += 1
                while j < n and text[j] != "|":
                    j += 1
                if j >= n:
                    return -1
            elif c == "(":
                depth += 1
            elif c == ")":
                depth -= 1
                if depth == 0:
                    return j + 1
            j += 1
        return -1
    if text[i] == '"':
        j = i + 1
        while j < n:
            if text[j] == '"':
                if j + 1 < n and text[j + 1] == '"':
                    j += 2
                    continue
                return j + 1
            j += 1
        return -1
    if text[i] == "|":
        j = text.find("|", i + 1)
        return -1 if j < 0 else j + 1
    j = i
    while j < n and text[j] not in " \t\r\n();\"|":
        j += 1
    if j >= n:
        return -1  # might be a prefix of a longer token
    return j
