"""Recursive-descent parser with recovery at declaration boundaries."""

from __future__ import annotations

from .diagnostics import DslError, Span, error
from .lexer import EOF, IDENT, KEYWORD, NUMBER, PUNCT, STRING, Token, tokenize, unescape
from .tree import (Assignment, Ast, Call, HorizonDecl, HyperedgeDecl, ListValue, Name, NodeDecl, Number,
                   ScenarioDecl, SeriesDecl, SettingDecl, String)

MAX_NESTING = 16
DECLARATION_START = ("horizon", "node", "hyperedge", "series", "scenario", "<setting>")


class _Failure(Exception):
    def __init__(self, diag):
        self.diag = diag


def _quote(items) -> str:
    items = [i if i.startswith("<") else repr(i) for i in items]
    if len(items) == 1:
        return items[0]
    return "one of " + ", ".join(items)


class Parser:
    def __init__(self, tokens: list[Token]):
        if not tokens or tokens[-1].kind != EOF:
            raise ValueError("token list must end with an end-of-file token")
        self.toks = tokens
        self.i = 0
        self.depth = 0
        self.nesting = 0
        self.diags = []

    # -- token helpers -----------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.i]
        if t.kind != EOF:
            self.i += 1
        return t

    def at(self, lexeme: str) -> bool:
        t = self.tok
        return t.kind in (PUNCT, KEYWORD) and t.lexeme == lexeme

    def fail(self, expected, found: Token | None = None, note: str = ""):
        found = found or self.tok
        msg = f"expected {_quote(expected)}, found {found.describe()}"
        raise _Failure(error(msg + note, found.span))

    def expect(self, lexeme: str) -> Token:
        if self.at(lexeme):
            return self.advance()
        self.fail([lexeme])

    def ident(self, what: str = "<identifier>") -> Token:
        if self.tok.kind == IDENT:
            return self.advance()
        self.fail([what])

    # -- declarations ------------------------------------------------------------
    def parse_file(self) -> Ast:
        decls = []
        seen_horizon = None
        while self.tok.kind != EOF:
            start = self.i
            self.depth = 0
            try:
                d = self.declaration()
            except _Failure as f:
                self.diags.append(f.diag)
                self.synchronize(start)
                continue
            if isinstance(d, HorizonDecl):
                if seen_horizon is not None:
                    self.diags.append(error(f"duplicate horizon declaration (first at {seen_horizon.span})", d.span))
                    continue
                seen_horizon = d
            decls.append(d)
        if self.diags:
            raise DslError(self.diags)
        return Ast(tuple(decls))

    def synchronize(self, start: int):
        if self.i == start:
            self.advance()
        while True:
            t = self.tok
            if t.kind == EOF or t.kind == KEYWORD:
                return
            self.advance()
            if t.kind == PUNCT:
                if t.lexeme == "{":
                    self.depth += 1
                elif t.lexeme == "}":
                    self.depth -= 1
                    if self.depth <= 0:
                        return
                elif t.lexeme == ";" and self.depth <= 0:
                    return

    def declaration(self):
        t = self.tok
        if t.kind == KEYWORD:
            return getattr(self, "decl_" + t.lexeme)()
        if t.kind == IDENT:
            a = self.assignment(("=",))
            return SettingDecl(a, a.span)
        self.fail(DECLARATION_START)

    def block(self, item):
        open_tok = self.expect("{")
        self.depth += 1
        items = []
        while not self.at("}"):
            t = self.tok
            if t.kind in (EOF, KEYWORD):
                raise _Failure(error(f"unterminated block: '{{' at {open_tok.span} is not closed before "
                                     f"{t.describe()}", t.span))
            items.append(item())
        self.advance()
        self.depth -= 1
        return tuple(items)

    def decl_horizon(self):
        kw = self.advance()
        return HorizonDecl(self.block(lambda: self.assignment(("=",))), kw.span)

    def decl_series(self):
        kw = self.advance()
        name = self.ident("<series name>")
        self.expect("=")
        src = self.call()
        self.expect(";")
        return SeriesDecl(name.lexeme, src, kw.span)

    def decl_node(self):
        kw = self.advance()
        name = self.ident("<node name>")
        self.expect(":")
        kind = self.ident("<template kind>")
        body = self.block(lambda: self.assignment(("=",)))
        return NodeDecl(name.lexeme, kind.lexeme, body, kw.span, kind.span)

    def decl_hyperedge(self):
        kw = self.advance()
        name = self.ident("<hyperedge name>")
        kind = None
        kind_span = None
        if self.at(":"):
            self.advance()
            k = self.ident("<template kind>")
            kind, kind_span = k.lexeme, k.span
        body = self.block(lambda: self.assignment(("=",)))
        return HyperedgeDecl(name.lexeme, kind, body, kw.span, kind_span)

    def decl_scenario(self):
        kw = self.advance()
        name = self.ident("<scenario name>")
        base = None
        if self.at(":"):
            self.advance()
            base = self.ident("<base scenario name>").lexeme
        body = self.block(lambda: self.assignment(("=", "*=")))
        return ScenarioDecl(name.lexeme, base, body, kw.span)

    # -- pieces ------------------------------------------------------------------
    def dotted(self, what: str) -> tuple[tuple[str, ...], Span]:
        first = self.ident(what)
        parts = [first.lexeme]
        while self.at("."):
            self.advance()
            parts.append(self.ident("<identifier>").lexeme)
        return tuple(parts), first.span

    def assignment(self, ops) -> Assignment:
        parts, span = self.dotted("<parameter name>")
        if not (self.tok.kind == PUNCT and self.tok.lexeme in ops):
            self.fail(list(ops) + ["."])
        op = self.advance().lexeme
        value = self.value()
        self.expect(";")
        return Assignment(".".join(parts), value, op, span)

    def value(self):
        if self.nesting >= MAX_NESTING:
            raise _Failure(error(f"values nest deeper than {MAX_NESTING} levels", self.tok.span))
        self.nesting += 1
        try:
            return self._value()
        finally:
            self.nesting -= 1

    def _value(self):
        t = self.tok
        if t.kind == NUMBER:
            self.advance()
            return Number(float(t.lexeme), t.lexeme, t.span)
        if t.kind == PUNCT and t.lexeme == "-":
            self.advance()
            n = self.tok
            if n.kind != NUMBER:
                self.fail(["<number>"])
            self.advance()
            return Number(-float(n.lexeme), "-" + n.lexeme, t.span)
        if t.kind == STRING:
            self.advance()
            return String(unescape(t.lexeme), t.span)
        if t.kind == IDENT:
            if self.peek().kind == PUNCT and self.peek().lexeme == "(":
                return self.call()
            parts, span = self.dotted("<identifier>")
            return Name(parts, span)
        if t.kind == PUNCT and t.lexeme == "[":
            return self.list_value()
        self.fail(["<number>", "<string>", "<identifier>", "["])

    def list_value(self) -> ListValue:
        open_tok = self.advance()
        items = []
        while not self.at("]"):
            if self.tok.kind in (EOF, KEYWORD):
                raise _Failure(error(f"unterminated list: '[' at {open_tok.span} is not closed before "
                                     f"{self.tok.describe()}", self.tok.span))
            items.append(self.value())
            if self.at(","):
                self.advance()
            elif not self.at("]"):
                self.fail([",", "]"])
        self.advance()
        return ListValue(tuple(items), open_tok.span)

    def call(self) -> Call:
        fn = self.ident("<series source>")
        self.expect("(")
        args, kwargs = [], []
        while not self.at(")"):
            if self.tok.kind == IDENT and self.peek().kind == PUNCT and self.peek().lexeme == "=":
                key = self.advance().lexeme
                self.advance()
                kwargs.append((key, self.value()))
            else:
                if kwargs:
                    raise _Failure(error("positional argument after keyword argument", self.tok.span))
                args.append(self.value())
            if self.at(","):
                self.advance()
            elif not self.at(")"):
                self.fail([",", ")"])
        self.advance()
        return Call(fn.lexeme, tuple(args), tuple(kwargs), fn.span)


def parse(tokens: list[Token]) -> Ast:
    return Parser(tokens).parse_file()


def parse_source(source: str, path: str = "<input>") -> Ast:
    try:
        return parse(tokenize(source))
    except DslError as exc:
        raise DslError(exc.diagnostics, path) from None
