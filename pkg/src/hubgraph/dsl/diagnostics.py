"""Positioned diagnostics shared by the lexer, parser and resolver."""

from __future__ import annotations

from dataclasses import dataclass

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class Span:
    line: int
    col: int

    def __str__(self):
        return f"{self.line}:{self.col}"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    message: str
    span: Span | None = None

    def format(self, path: str = "<input>") -> str:
        where = f"{path}:{self.span.line}:{self.span.col}" if self.span else path
        return f"{where}: {self.severity}: {self.message}"

    def __str__(self):
        return self.format()


class DslError(Exception):
    """One or more error diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic], path: str = "<input>"):
        self.diagnostics = list(diagnostics)
        self.path = path
        super().__init__("\n".join(d.format(path) for d in self.diagnostics))

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == ERROR]


def error(message: str, span: Span | None = None) -> Diagnostic:
    return Diagnostic(ERROR, message, span)


def warning(message: str, span: Span | None = None) -> Diagnostic:
    return Diagnostic(WARNING, message, span)
