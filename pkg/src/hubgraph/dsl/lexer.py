"""Tokenizer for ``.hub`` model files."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .diagnostics import DslError, Span, error

KEYWORD = "keyword"
IDENT = "identifier"
NUMBER = "number"
STRING = "string"
PUNCT = "punctuation"
EOF = "eof"

KEYWORDS = frozenset({"horizon", "node", "hyperedge", "series", "scenario"})

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<number>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<punct>\*=|[{}\[\]();:,.=\-])
""", re.VERBOSE)

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: str
    lexeme: str
    line: int
    col: int

    @property
    def span(self) -> Span:
        return Span(self.line, self.col)

    def describe(self) -> str:
        return "end of file" if self.kind == EOF else repr(self.lexeme)


def unescape(lexeme: str) -> str:
    body = lexeme[1:-1]
    return re.sub(r"\\(.)", lambda m: _ESCAPES.get(m.group(1), m.group(1)), body)


def escape(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'


def tokenize(source: str) -> list[Token]:
    """Tokens of ``source`` followed by an end-of-file token.

    Raises DslError at the first character that starts no token.
    """
    tokens: list[Token] = []
    pos, line, line_start, n = 0, 1, 0, len(source)
    match = _TOKEN.match
    while pos < n:
        m = match(source, pos)
        col = pos - line_start + 1
        if m is None:
            ch = source[pos]
            if ch == '"':
                msg = "unterminated string literal"
            else:
                msg = f"illegal character {ch!r}"
            raise DslError([error(msg, Span(line, col))])
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "ident":
            tokens.append(Token(KEYWORD if text in KEYWORDS else IDENT, text, line, col))
        elif kind == "number":
            tokens.append(Token(NUMBER, text, line, col))
        elif kind == "string":
            tokens.append(Token(STRING, text, line, col))
        elif kind == "punct":
            tokens.append(Token(PUNCT, text, line, col))
        pos = m.end()
    tokens.append(Token(EOF, "", line, pos - line_start + 1))
    return tokens
