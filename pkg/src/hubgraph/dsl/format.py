"""Canonical pretty-printer: parse(format_ast(ast)) == ast."""

from __future__ import annotations

from .lexer import escape
from .tree import (Assignment, Ast, Call, HorizonDecl, HyperedgeDecl, ListValue, Name, NodeDecl, Number,
                   ScenarioDecl, SeriesDecl, SettingDecl, String)

INDENT = "    "


def format_number(n: Number) -> str:
    if n.text:
        return n.text
    v = n.value
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def format_value(v) -> str:
    if isinstance(v, Number):
        return format_number(v)
    if isinstance(v, String):
        return escape(v.value)
    if isinstance(v, Name):
        return v.dotted
    if isinstance(v, ListValue):
        return "[" + ", ".join(format_value(i) for i in v.items) + "]"
    if isinstance(v, Call):
        args = [format_value(a) for a in v.args] + [f"{k} = {format_value(x)}" for k, x in v.kwargs]
        return f"{v.func}(" + ", ".join(args) + ")"
    raise TypeError(f"cannot format {type(v).__name__}")


def _assign(a: Assignment) -> str:
    return f"{a.key} {a.op} {format_value(a.value)};"


def _block(head: str, items) -> list[str]:
    if not items:
        return [head + " {}"]
    return [head + " {"] + [INDENT + _assign(a) for a in items] + ["}"]


def format_ast(ast: Ast) -> str:
    out: list[str] = []
    prev = None
    for d in ast.declarations:
        kind = type(d)
        # blank line between declarations, except runs of one-line ones
        if out and not (kind is prev and kind in (SettingDecl, SeriesDecl)):
            out.append("")
        prev = kind
        if isinstance(d, HorizonDecl):
            out += _block("horizon", d.assignments)
        elif isinstance(d, SettingDecl):
            out.append(_assign(d.assignment))
        elif isinstance(d, SeriesDecl):
            out.append(f"series {d.name} = {format_value(d.source)};")
        elif isinstance(d, NodeDecl):
            out += _block(f"node {d.name} : {d.kind}", d.assignments)
        elif isinstance(d, HyperedgeDecl):
            head = f"hyperedge {d.name}" + (f" : {d.kind}" if d.kind else "")
            out += _block(head, d.assignments)
        elif isinstance(d, ScenarioDecl):
            head = f"scenario {d.name}" + (f" : {d.base}" if d.base else "")
            out += _block(head, d.overrides)
    return "\n".join(out) + "\n" if out else ""
