"""Syntax tree of a model file.  Spans never take part in equality."""

from __future__ import annotations

from dataclasses import dataclass, field

from .diagnostics import Span


def _span():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Number:
    value: float
    text: str = field(default="", compare=False)
    span: Span | None = _span()


@dataclass(frozen=True)
class String:
    value: str
    span: Span | None = _span()


@dataclass(frozen=True)
class Name:
    """Bare or dotted identifier: commodity, series, sense keyword, member path."""

    parts: tuple[str, ...]
    span: Span | None = _span()

    @property
    def dotted(self) -> str:
        return ".".join(self.parts)


@dataclass(frozen=True)
class ListValue:
    items: tuple
    span: Span | None = _span()


@dataclass(frozen=True)
class Call:
    """Series source such as ``csv("file.csv", "solar", start = 8760)``."""

    func: str
    args: tuple
    kwargs: tuple[tuple[str, object], ...] = ()
    span: Span | None = _span()


@dataclass(frozen=True)
class Assignment:
    key: str
    value: object
    op: str = "="
    span: Span | None = _span()


@dataclass(frozen=True)
class HorizonDecl:
    assignments: tuple[Assignment, ...]
    span: Span | None = _span()


@dataclass(frozen=True)
class SettingDecl:
    """File-level ``key = value;`` (only ``wacc`` is meaningful)."""

    assignment: Assignment
    span: Span | None = _span()


@dataclass(frozen=True)
class SeriesDecl:
    name: str
    source: Call
    span: Span | None = _span()


@dataclass(frozen=True)
class NodeDecl:
    name: str
    kind: str
    assignments: tuple[Assignment, ...]
    span: Span | None = _span()
    kind_span: Span | None = _span()


@dataclass(frozen=True)
class HyperedgeDecl:
    name: str
    kind: str | None
    assignments: tuple[Assignment, ...]
    span: Span | None = _span()
    kind_span: Span | None = _span()


@dataclass(frozen=True)
class ScenarioDecl:
    name: str
    base: str | None
    overrides: tuple[Assignment, ...]
    span: Span | None = _span()


Declaration = HorizonDecl | SettingDecl | SeriesDecl | NodeDecl | HyperedgeDecl | ScenarioDecl


@dataclass(frozen=True)
class Ast:
    declarations: tuple = ()

    def _of(self, cls):
        return [d for d in self.declarations if isinstance(d, cls)]

    @property
    def horizon(self) -> HorizonDecl | None:
        h = self._of(HorizonDecl)
        return h[0] if h else None

    @property
    def settings(self) -> list[SettingDecl]:
        return self._of(SettingDecl)

    @property
    def series(self) -> list[SeriesDecl]:
        return self._of(SeriesDecl)

    @property
    def nodes(self) -> list[NodeDecl]:
        return self._of(NodeDecl)

    @property
    def hyperedges(self) -> list[HyperedgeDecl]:
        return self._of(HyperedgeDecl)

    @property
    def scenarios(self) -> list[ScenarioDecl]:
        return self._of(ScenarioDecl)
